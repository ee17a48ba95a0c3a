"""AdamW with decoupled weight decay and a linear warmup schedule."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .core import Tensor


def warmup_lr(base_lr: float, step: int, warmup_steps: int) -> float:
    """Linear warmup to ``base_lr`` over ``warmup_steps`` steps, then constant."""
    if warmup_steps <= 0:
        return base_lr
    return base_lr * min(1.0, step / warmup_steps)


@dataclass
class OptimizerState:
    learning_rate: float = 1e-4
    weight_decay: float = 0.1
    warmup_steps: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    step: int = 0
    m: list = field(default_factory=list)
    v: list = field(default_factory=list)


def init_state(params: Sequence[Tensor], **settings) -> OptimizerState:
    state = OptimizerState(**settings)
    state.m = [np.zeros_like(p.data) for p in params]
    state.v = [np.zeros_like(p.data) for p in params]
    return state


def adamw_step(params: Sequence[Tensor], grads: Sequence[np.ndarray | None], state: OptimizerState) -> float:
    """Update ``params`` in place; parameters whose gradient is None are left untouched.

    Returns the learning rate used for this step.
    """
    state.step += 1
    t = state.step
    lr = warmup_lr(state.learning_rate, t, state.warmup_steps)
    b1, b2 = state.beta1, state.beta2
    c1 = 1.0 - b1**t
    c2 = 1.0 - b2**t
    for i, (p, g) in enumerate(zip(params, grads)):
        if g is None:
            continue
        dt = p.data.dtype.type
        if state.weight_decay:
            p.data *= dt(1.0 - lr * state.weight_decay)
        m = state.m[i]
        v = state.v[i]
        m *= dt(b1)
        m += dt(1.0 - b1) * g
        v *= dt(b2)
        v += dt(1.0 - b2) * (g * g)
        p.data -= dt(lr) * (m / dt(c1)) / (np.sqrt(v / dt(c2)) + dt(state.eps))
    return lr


class AdamW:
    """Stateful wrapper around :func:`adamw_step` for a fixed parameter list."""

    def __init__(self, params: Sequence[Tensor], lr: float = 1e-4, weight_decay: float = 0.1,
                 warmup_steps: int = 0, betas=(0.9, 0.999), eps: float = 1e-8):
        self.params = [p for p in params if p.requires_grad]
        self.state = init_state(self.params, learning_rate=lr, weight_decay=weight_decay,
                                warmup_steps=warmup_steps, beta1=betas[0], beta2=betas[1], eps=eps)

    def zero_grad(self) -> None:
        for p in self.params:
            p.grad = None

    def step(self) -> float:
        return adamw_step(self.params, [p.grad for p in self.params], self.state)
