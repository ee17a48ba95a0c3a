from __future__ import annotations

import numpy as np

from ..tensor import Module, Tensor, layer_norm, matmul, ones_param, parameter, xavier_uniform, zeros_param
from ..tensor.core import add


class Linear(Module):
    def __init__(self, rng: np.random.Generator, d_in: int, d_out: int, bias: bool = True):
        self.w = parameter(xavier_uniform(rng, (d_in, d_out)))
        self.b = zeros_param((d_out,)) if bias else None

    def __call__(self, x: Tensor) -> Tensor:
        y = matmul(x, self.w)
        return y if self.b is None else add(y, self.b)


class LayerNorm(Module):
    def __init__(self, d: int, eps: float = 1e-5):
        self.gamma = ones_param((d,))
        self.beta = zeros_param((d,))
        self.eps = eps

    def __call__(self, x: Tensor) -> Tensor:
        return layer_norm(x, self.gamma, self.beta, self.eps)


def embedding_table(rng: np.random.Generator, n: int, d: int, scale: float = 0.02) -> Tensor:
    return parameter(rng.normal(0.0, scale, size=(n, d)))
