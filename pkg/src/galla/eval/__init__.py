"""Metrics, answer parsing and significance helpers."""
