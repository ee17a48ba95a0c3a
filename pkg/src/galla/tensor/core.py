"""Dense arrays with reverse-mode automatic differentiation.

A :class:`Tensor` wraps a numpy array. Operations on tensors that require
gradients record a backward closure; :meth:`Tensor.backward` walks the
recorded graph in reverse topological order and accumulates exact analytic
gradients into ``.grad``.
"""
from __future__ import annotations

import contextlib
import math
from typing import Iterable, Sequence

import numpy as np

from .kernels import scatter_add_rows

_DEFAULT_DTYPE = np.float32
_GRAD_ENABLED = True


class ShapeMismatch(ValueError):
    def __init__(self, op: str, a, b):
        super().__init__(f"{op}: incompatible shapes {tuple(a)} and {tuple(b)}")
        self.shapes = (tuple(a), tuple(b))


class MaskEmpty(ValueError):
    pass


def get_default_dtype():
    return _DEFAULT_DTYPE


@contextlib.contextmanager
def default_dtype(dtype):
    """Temporarily create tensors with ``dtype`` (float64 is used for gradient checks)."""
    global _DEFAULT_DTYPE
    prev = _DEFAULT_DTYPE
    _DEFAULT_DTYPE = np.dtype(dtype).type
    try:
        yield
    finally:
        _DEFAULT_DTYPE = prev


@contextlib.contextmanager
def no_grad():
    global _GRAD_ENABLED
    prev = _GRAD_ENABLED
    _GRAD_ENABLED = False
    try:
        yield
    finally:
        _GRAD_ENABLED = prev


class Tensor:
    __slots__ = ("data", "grad", "requires_grad", "is_param", "_parents", "_backward")

    def __init__(self, data, requires_grad: bool = False, dtype=None):
        if isinstance(data, Tensor):
            data = data.data
        self.data = np.asarray(data, dtype=dtype or _DEFAULT_DTYPE)
        self.grad: np.ndarray | None = None
        self.requires_grad = requires_grad
        self.is_param = False
        self._parents: tuple[Tensor, ...] = ()
        self._backward = None

    # -- basics --------------------------------------------------------
    @property
    def shape(self) -> tuple[int, ...]:
        return self.data.shape

    @property
    def ndim(self) -> int:
        return self.data.ndim

    @property
    def dtype(self):
        return self.data.dtype

    def numpy(self) -> np.ndarray:
        return self.data

    def item(self) -> float:
        return float(self.data)

    def __repr__(self) -> str:
        return f"Tensor(shape={self.shape}, requires_grad={self.requires_grad})"

    def zero_grad(self) -> None:
        self.grad = None

    def detach(self) -> "Tensor":
        return Tensor(self.data, dtype=self.data.dtype)

    def backward(self, grad: np.ndarray | None = None) -> None:
        if grad is None:
            if self.data.size != 1:
                raise ValueError("backward() without a gradient needs a scalar output")
            grad = np.ones_like(self.data)
        order: list[Tensor] = []
        seen: set[int] = set()
        stack: list[tuple[Tensor, bool]] = [(self, False)]
        while stack:
            node, expanded = stack.pop()
            if expanded:
                order.append(node)
                continue
            if id(node) in seen:
                continue
            seen.add(id(node))
            stack.append((node, True))
            for p in node._parents:
                if p.requires_grad and id(p) not in seen:
                    stack.append((p, False))
        self._accumulate(np.asarray(grad, dtype=self.data.dtype))
        for node in reversed(order):
            if node._backward is not None and node.grad is not None:
                node._backward(node.grad)
                if not node.is_param:
                    # Intermediate gradients are not needed once propagated.
                    node._backward = None
                    node._parents = ()

    def _accumulate(self, g: np.ndarray) -> None:
        if not self.requires_grad:
            return
        if g.shape != self.data.shape:
            raise ShapeMismatch("grad", g.shape, self.data.shape)
        self.grad = g if self.grad is None else self.grad + g

    # -- operator sugar --------------------------------------------------
    def __add__(self, other):
        return add(self, other)

    def __radd__(self, other):
        return add(other, self)

    def __sub__(self, other):
        return sub(self, other)

    def __rsub__(self, other):
        return sub(other, self)

    def __mul__(self, other):
        return mul(self, other)

    def __rmul__(self, other):
        return mul(other, self)

    def __neg__(self):
        return mul(self, -1.0)

    def __truediv__(self, other):
        if isinstance(other, (int, float)):
            return mul(self, 1.0 / other)
        return NotImplemented

    def __matmul__(self, other):
        return matmul(self, other)

    def __getitem__(self, idx):
        return getitem(self, idx)

    def reshape(self, *shape):
        if len(shape) == 1 and isinstance(shape[0], (tuple, list)):
            shape = tuple(shape[0])
        return reshape(self, shape)

    def transpose(self, *axes):
        return transpose(self, axes)

    def sum(self, axis=None, keepdims=False):
        return tsum(self, axis, keepdims)

    def mean(self, axis=None, keepdims=False):
        return tmean(self, axis, keepdims)


def tensor(data, requires_grad: bool = False, dtype=None) -> Tensor:
    return Tensor(data, requires_grad=requires_grad, dtype=dtype)


def _wrap(x) -> Tensor:
    if isinstance(x, Tensor):
        return x
    return Tensor(np.asarray(x), dtype=np.asarray(x).dtype if isinstance(x, np.ndarray) else None)


def _result(data: np.ndarray, parents: Sequence[Tensor], backward) -> Tensor:
    out = Tensor.__new__(Tensor)
    out.data = data
    out.grad = None
    out.is_param = False
    needs = _GRAD_ENABLED and any(p.requires_grad for p in parents)
    out.requires_grad = needs
    if needs:
        out._parents = tuple(parents)
        out._backward = backward
    else:
        out._parents = ()
        out._backward = None
    return out


def _unbroadcast(g: np.ndarray, shape: tuple[int, ...]) -> np.ndarray:
    if g.shape == shape:
        return g
    extra = g.ndim - len(shape)
    if extra > 0:
        g = g.sum(axis=tuple(range(extra)))
    axes = tuple(i for i, s in enumerate(shape) if s == 1 and g.shape[i] != 1)
    if axes:
        g = g.sum(axis=axes, keepdims=True)
    return g


def _check_broadcast(op, a, b):
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeMismatch(op, a.shape, b.shape) from None


# -- elementwise ------------------------------------------------------------

def add(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("add", a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(g, b.shape))

    return _result(a.data + b.data, (a, b), backward)


def sub(a, b) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("sub", a, b)

    def backward(g):
        a._accumulate(_unbroadcast(g, a.shape))
        b._accumulate(_unbroadcast(-g, b.shape))

    return _result(a.data - b.data, (a, b), backward)


def mul(a, b) -> Tensor:
    if isinstance(b, (int, float)):
        a = _wrap(a)
        c = float(b)

        def backward_scalar(g):
            a._accumulate(g * a.data.dtype.type(c))

        return _result(a.data * a.data.dtype.type(c), (a,), backward_scalar)
    if isinstance(a, (int, float)):
        return mul(b, a)
    a, b = _wrap(a), _wrap(b)
    _check_broadcast("mul", a, b)

    def backward(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(g * b.data, a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(g * a.data, b.shape))

    return _result(a.data * b.data, (a, b), backward)


_GELU_C = math.sqrt(2.0 / math.pi)


def gelu(x: Tensor) -> Tensor:
    """GELU with the tanh approximation."""
    xd = x.data
    f = xd.dtype.type
    x2 = xd * xd
    t = x2 * f(0.044715)
    t += f(1.0)
    t *= xd
    t *= f(_GELU_C)
    np.tanh(t, out=t)
    out = t + f(1.0)
    out *= xd
    out *= f(0.5)

    def backward(g):
        # d/dx = 0.5(1 + t) + 0.5 x (1 - t^2) c (1 + 3k x^2)
        d = x2 * f(3 * 0.044715)
        d += f(1.0)
        d *= f(_GELU_C)
        d *= xd
        d *= f(1.0) - t * t
        d += f(1.0) + t
        d *= f(0.5)
        d *= g
        x._accumulate(d)

    return _result(out, (x,), backward)


# -- shape ------------------------------------------------------------------

def reshape(x: Tensor, shape) -> Tensor:
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeMismatch("reshape", x.shape, shape) from None

    def backward(g):
        x._accumulate(g.reshape(x.shape))

    return _result(out, (x,), backward)


def transpose(x: Tensor, axes=()) -> Tensor:
    axes = tuple(axes) if axes else tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))

    def backward(g):
        x._accumulate(np.ascontiguousarray(np.transpose(g, inv)))

    # Contiguous copies keep the following matmuls on the fast BLAS path.
    return _result(np.ascontiguousarray(np.transpose(x.data, axes)), (x,), backward)


def getitem(x: Tensor, idx) -> Tensor:
    out = x.data[idx]

    def backward(g):
        full = np.zeros_like(x.data)
        np.add.at(full, idx, g)
        x._accumulate(full)

    return _result(np.array(out), (x,), backward)


def concat(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    """Concatenate along ``axis`` (rows by default)."""
    tensors = [_wrap(t) for t in tensors]
    ref = tensors[0].shape
    ax = axis % len(ref)
    for t in tensors[1:]:
        if t.ndim != len(ref) or any(s != r for i, (s, r) in enumerate(zip(t.shape, ref)) if i != ax):
            raise ShapeMismatch("concat", ref, t.shape)
    sizes = [t.shape[ax] for t in tensors]
    splits = np.cumsum(sizes)[:-1]

    def backward(g):
        for t, part in zip(tensors, np.split(g, splits, axis=ax)):
            t._accumulate(np.ascontiguousarray(part))

    return _result(np.concatenate([t.data for t in tensors], axis=ax), tensors, backward)


# -- reductions -----------------------------------------------------------------

def tsum(x: Tensor, axis=None, keepdims=False) -> Tensor:
    out = x.data.sum(axis=axis, keepdims=keepdims)

    def backward(g):
        if axis is not None and not keepdims:
            g = np.expand_dims(g, axis)
        x._accumulate(np.broadcast_to(g, x.shape).copy())

    return _result(np.asarray(out), (x,), backward)


def tmean(x: Tensor, axis=None, keepdims=False) -> Tensor:
    n = x.data.size if axis is None else np.prod([x.shape[a] for a in np.atleast_1d(axis)])
    return mul(tsum(x, axis, keepdims), 1.0 / float(n))


# -- linear algebra --------------------------------------------------------------

def matmul(a: Tensor, b: Tensor) -> Tensor:
    a, b = _wrap(a), _wrap(b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeMismatch("matmul", a.shape, b.shape)
    if b.ndim == 2:
        # Weight shared across leading dims: one GEMM over the flattened rows.
        a2 = a.data.reshape(-1, a.shape[-1])
        out = (a2 @ b.data).reshape(a.shape[:-1] + (b.shape[1],))

        def backward(g):
            g2 = g.reshape(-1, g.shape[-1])
            if a.requires_grad:
                a._accumulate((g2 @ b.data.T).reshape(a.shape))
            if b.requires_grad:
                b._accumulate(a2.T @ g2)

        return _result(out, (a, b), backward)
    try:
        out = np.matmul(a.data, b.data)
    except ValueError:
        raise ShapeMismatch("matmul", a.shape, b.shape) from None

    def backward_batched(g):
        if a.requires_grad:
            a._accumulate(_unbroadcast(np.matmul(g, np.swapaxes(b.data, -1, -2)), a.shape))
        if b.requires_grad:
            b._accumulate(_unbroadcast(np.matmul(np.swapaxes(a.data, -1, -2), g), b.shape))

    return _result(out, (a, b), backward_batched)


def linear(x: Tensor, w: Tensor, b: Tensor | None = None) -> Tensor:
    y = matmul(x, w)
    return y if b is None else add(y, b)


# -- normalization / activation -------------------------------------------------

def softmax(x: Tensor, axis: int = -1) -> Tensor:
    z = x.data - x.data.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        x._accumulate(s * (g - (g * s).sum(axis=axis, keepdims=True)))

    return _result(s, (x,), backward)


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalize over the last axis, then scale and shift."""
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeMismatch("layer_norm", x.shape, gamma.shape)
    xd = x.data
    mu = xd.mean(axis=-1, keepdims=True)
    xc = xd - mu
    var = (xc * xc).mean(axis=-1, keepdims=True)
    rstd = 1.0 / np.sqrt(var + xd.dtype.type(eps))
    xhat = xc * rstd
    out = xhat * gamma.data + beta.data

    def backward(g):
        if gamma.requires_grad:
            gamma._accumulate((g * xhat).reshape(-1, xd.shape[-1]).sum(axis=0))
        if beta.requires_grad:
            beta._accumulate(g.reshape(-1, xd.shape[-1]).sum(axis=0))
        if x.requires_grad:
            gx = g * gamma.data
            n = xd.shape[-1]
            dx = rstd / n * (n * gx - gx.sum(axis=-1, keepdims=True) - xhat * (gx * xhat).sum(axis=-1, keepdims=True))
            x._accumulate(dx.astype(xd.dtype, copy=False))

    return _result(out.astype(xd.dtype, copy=False), (x, gamma, beta), backward)


# -- indexing ------------------------------------------------------------------

def take_rows(table: Tensor, index) -> Tensor:
    """Gather rows of a 2-D tensor; output shape is ``index.shape + (d,)``."""
    index = np.asarray(index, dtype=np.int64)
    if table.ndim != 2:
        raise ShapeMismatch("take_rows", table.shape, index.shape)
    if index.size and (index.min() < 0 or index.max() >= table.shape[0]):
        raise IndexError(f"take_rows: index out of range for {table.shape[0]} rows")
    out = table.data[index]

    def backward(g):
        full = np.zeros_like(table.data)
        scatter_add_rows(full, index.reshape(-1), g.reshape(-1, table.shape[1]))
        table._accumulate(full)

    return _result(out, (table,), backward)


def embedding_lookup(table: Tensor, ids) -> Tensor:
    return take_rows(table, ids)


def segment_mean(src: Tensor, segments, n_segments: int) -> Tensor:
    """out[s] = mean of the rows of ``src`` whose segment id is s; zero for empty segments."""
    segments = np.asarray(segments, dtype=np.int64)
    if src.ndim != 2 or segments.shape != (src.shape[0],):
        raise ShapeMismatch("segment_mean", src.shape, segments.shape)
    counts = np.bincount(segments, minlength=n_segments).astype(src.dtype)
    scale = (1.0 / np.maximum(counts, 1)).astype(src.dtype)[:, None]
    out = np.zeros((n_segments, src.shape[1]), dtype=src.dtype)
    scatter_add_rows(out, segments, src.data)
    out *= scale

    def backward(g):
        src._accumulate((g * scale)[segments])

    return _result(out, (src,), backward)


# -- losses ----------------------------------------------------------------------

def cross_entropy(logits: Tensor, targets, mask=None) -> Tensor:
    """Mean token cross-entropy over positions where ``mask`` is 1.

    ``logits`` has shape ``(..., V)``; ``targets`` and ``mask`` have the leading shape.
    """
    targets = np.asarray(targets, dtype=np.int64)
    if logits.shape[:-1] != targets.shape:
        raise ShapeMismatch("cross_entropy", logits.shape, targets.shape)
    m = np.ones(targets.shape, dtype=logits.dtype) if mask is None else np.asarray(mask, dtype=logits.dtype)
    if m.shape != targets.shape:
        raise ShapeMismatch("cross_entropy", targets.shape, m.shape)
    count = float(m.sum())
    if count == 0:
        raise MaskEmpty("cross_entropy: mask selects no positions")
    v = logits.shape[-1]
    flat = logits.data.reshape(-1, v)
    t = targets.reshape(-1)
    mf = m.reshape(-1)
    sel = mf > 0
    # Masked rows are skipped entirely so their targets cannot influence the value.
    rows = flat[sel]
    z = rows - rows.max(axis=1, keepdims=True)
    lse = np.log(np.exp(z).sum(axis=1))
    picked = z[np.arange(rows.shape[0]), t[sel]]
    w = mf[sel]
    loss = np.asarray(((lse - picked) * w).sum() / count, dtype=logits.dtype)

    def backward(g):
        p = np.exp(z - lse[:, None])
        p[np.arange(rows.shape[0]), t[sel]] -= 1
        p *= (w / count)[:, None] * g
        full = np.zeros_like(flat)
        full[sel] = p
        logits._accumulate(full.reshape(logits.shape))

    return _result(loss, (logits,), backward)


# -- initialization -----------------------------------------------------------------

def xavier_uniform(rng: np.random.Generator, shape: Sequence[int], dtype=None) -> np.ndarray:
    fan_in, fan_out = (shape[0], shape[-1]) if len(shape) >= 2 else (shape[0], shape[0])
    bound = math.sqrt(6.0 / (fan_in + fan_out))
    return rng.uniform(-bound, bound, size=tuple(shape)).astype(dtype or _DEFAULT_DTYPE)


def parameter(data, dtype=None) -> Tensor:
    t = Tensor(data, requires_grad=True, dtype=dtype)
    t.is_param = True
    return t


def zeros_param(shape, dtype=None) -> Tensor:
    return parameter(np.zeros(shape, dtype=dtype or _DEFAULT_DTYPE))


def ones_param(shape, dtype=None) -> Tensor:
    return parameter(np.ones(shape, dtype=dtype or _DEFAULT_DTYPE))


def iter_grads(params: Iterable[Tensor]):
    for p in params:
        yield p.grad
