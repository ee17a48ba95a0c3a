"""Training plans, loops and the end-to-end pipeline."""
