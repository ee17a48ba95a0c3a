"""Adapters mapping node states H to LM-space graph tokens X_g.

Both variants take a batch of graphs (flattened node rows plus per-graph node
counts) and return flattened graph tokens plus per-graph token counts, so the
splice code is identical for either.
"""
from __future__ import annotations

import math

import numpy as np

from ..tensor import Module, Tensor, concat, gelu, matmul, parameter, softmax, take_rows, xavier_uniform
from ..tensor.core import add, mul, reshape, transpose
from .layers import Linear


class EmptyGraph(ValueError):
    pass


def _check_counts(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=np.int64)
    if counts.size == 0 or (counts <= 0).any():
        raise EmptyGraph("adapter input has a graph with no nodes")
    return counts


class CrossAttnAdapter(Module):
    """X_g = softmax(Q W_q (H W_k)^T / sqrt(d)) H W_v W_o with n_g learnable queries Q."""

    kind = "cross_attn"

    def __init__(self, rng: np.random.Generator, d_gnn: int = 128, d_lm: int = 128, n_g: int = 16,
                 d_attn: int | None = None):
        d = d_attn or d_lm
        self.n_g = n_g
        self.queries = parameter(rng.normal(0.0, 1.0, size=(n_g, d_lm)))
        self.w_q = parameter(xavier_uniform(rng, (d_lm, d)))
        self.w_k = parameter(xavier_uniform(rng, (d_gnn, d)))
        self.w_v = parameter(xavier_uniform(rng, (d_gnn, d)))
        self.w_o = parameter(xavier_uniform(rng, (d, d_lm)))

    def __call__(self, h: Tensor, counts) -> tuple[Tensor, np.ndarray]:
        counts = _check_counts(counts)
        b, n_max = len(counts), int(counts.max())
        d = self.w_q.shape[1]
        # Pad node rows per graph; padded keys get a large negative score.
        starts = np.concatenate([[0], np.cumsum(counts)[:-1]])
        slot = np.arange(n_max)[None, :]
        valid = slot < counts[:, None]
        index = np.where(valid, starts[:, None] + slot, h.shape[0])
        padded = take_rows(concat([h, Tensor(np.zeros((1, h.shape[1])), dtype=h.dtype)]), index)
        k = matmul(padded, self.w_k)  # (b, n_max, d)
        v = matmul(padded, self.w_v)
        q = matmul(self.queries, self.w_q)  # (n_g, d)
        scores = mul(matmul(q, transpose(k, (0, 2, 1))), 1.0 / math.sqrt(d))  # (b, n_g, n_max)
        bias = np.where(valid, 0.0, -1e9).astype(h.dtype)[:, None, :]
        attn = softmax(add(scores, Tensor(bias, dtype=h.dtype)), axis=-1)
        out = matmul(matmul(attn, v), self.w_o)  # (b, n_g, d_lm)
        return reshape(out, (b * self.n_g, out.shape[-1])), np.full(b, self.n_g, dtype=np.int64)


class MlpAdapter(Module):
    """Three linear layers with gelu, applied to each node row independently."""

    kind = "mlp"

    def __init__(self, rng: np.random.Generator, d_gnn: int = 128, d_lm: int = 128, hidden: int = 160):
        self.l1 = Linear(rng, d_gnn, hidden)
        self.l2 = Linear(rng, hidden, hidden)
        self.l3 = Linear(rng, hidden, d_lm)

    def __call__(self, h: Tensor, counts) -> tuple[Tensor, np.ndarray]:
        counts = _check_counts(counts)
        return self.l3(gelu(self.l2(gelu(self.l1(h))))), counts


def make_adapter(kind: str, rng: np.random.Generator, d_gnn: int = 128, d_lm: int = 128, n_g: int = 16):
    if kind == "cross_attn":
        return CrossAttnAdapter(rng, d_gnn, d_lm, n_g)
    if kind == "mlp":
        return MlpAdapter(rng, d_gnn, d_lm)
    raise ValueError(f"unknown adapter {kind!r}")
