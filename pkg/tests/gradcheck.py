"""Central finite-difference oracle for analytic gradients."""
from __future__ import annotations

import numpy as np


def numeric_grad(f, arr: np.ndarray, h: float = 1e-3, coords=None) -> np.ndarray:
    """d f / d arr by central differences; ``f`` reads ``arr`` in place."""
    out = np.zeros_like(arr)
    flat = arr.reshape(-1)
    gflat = out.reshape(-1)
    for i in range(flat.size) if coords is None else coords:
        old = flat[i]
        flat[i] = old + h
        fp = f()
        flat[i] = old - h
        fm = f()
        flat[i] = old
        gflat[i] = (fp - fm) / (2 * h)
    return out


def relative_error(analytic: np.ndarray, numeric: np.ndarray) -> float:
    diff = np.linalg.norm(analytic - numeric)
    scale = max(np.linalg.norm(analytic), np.linalg.norm(numeric), 1e-12)
    return float(diff / scale)


def check(loss_fn, tensors, h: float = 1e-3, max_coords: int | None = None, rng=None) -> float:
    """Worst relative error over ``tensors`` between backward() and finite differences.

    ``loss_fn()`` builds a fresh scalar Tensor from the current tensor values.
    """
    for t in tensors:
        t.grad = None
    loss_fn().backward()
    analytic = [np.zeros_like(t.data) if t.grad is None else t.grad.copy() for t in tensors]
    worst = 0.0
    for t, a in zip(tensors, analytic):
        coords = None
        if max_coords is not None and t.data.size > max_coords:
            # Half uniform, half from the analytic support: uniform draws on a mostly
            # unused embedding table would compare zeros, or a single tiny entry.
            rng = rng or np.random.default_rng(0)
            support = np.flatnonzero(a.reshape(-1))
            k = min(max_coords // 2, support.size)
            picked = rng.choice(support, size=k, replace=False) if k else np.empty(0, dtype=np.int64)
            rest = np.setdiff1d(np.arange(t.data.size), picked)
            coords = np.concatenate([picked, rng.choice(rest, size=max_coords - k, replace=False)])
        num = numeric_grad(lambda: float(loss_fn().data), t.data, h, coords)
        if coords is not None:
            a = a.reshape(-1)[coords]
            num = num.reshape(-1)[coords]
        worst = max(worst, relative_error(a, num))
    return worst
