"""Pre-LN causal transformer decoder."""
from __future__ import annotations

import math

import numpy as np

from ..tensor import Module, Tensor, gelu, matmul, no_grad, parameter, softmax, take_rows, xavier_uniform
from ..tensor.core import add, mul, reshape, transpose
from .layers import LayerNorm, Linear, embedding_table

_NEG = -1e9


def causal_bias(t: int, dtype=np.float32) -> np.ndarray:
    return np.triu(np.full((t, t), _NEG, dtype=dtype), k=1)


class Block(Module):
    def __init__(self, rng: np.random.Generator, d: int, n_heads: int):
        self.n_heads = n_heads
        self.ln1 = LayerNorm(d)
        self.wq = Linear(rng, d, d)
        self.wk = Linear(rng, d, d)
        self.wv = Linear(rng, d, d)
        self.wo = Linear(rng, d, d)
        self.ln2 = LayerNorm(d)
        self.fc1 = Linear(rng, d, 4 * d)
        self.fc2 = Linear(rng, 4 * d, d)

    def __call__(self, x: Tensor, bias: np.ndarray, cache: list | None = None) -> Tensor:
        b, t, d = x.shape
        nh, dh = self.n_heads, d // self.n_heads
        h = self.ln1(x)
        q = transpose(reshape(self.wq(h), (b, t, nh, dh)), (0, 2, 1, 3))
        k = transpose(reshape(self.wk(h), (b, t, nh, dh)), (0, 2, 3, 1))
        v = transpose(reshape(self.wv(h), (b, t, nh, dh)), (0, 2, 1, 3))
        if cache is not None:
            cache.append((k.data, v.data))
        scores = add(mul(matmul(q, k), 1.0 / math.sqrt(dh)), Tensor(bias, dtype=x.dtype))
        o = matmul(softmax(scores, axis=-1), v)
        o = reshape(transpose(o, (0, 2, 1, 3)), (b, t, d))
        x = add(x, self.wo(o))
        return add(x, self.fc2(gelu(self.fc1(self.ln2(x)))))


    def step(self, x: np.ndarray, keys: np.ndarray, values: np.ndarray, pos: np.ndarray) -> np.ndarray:
        """One new position per row; writes its key/value at ``pos`` and attends to positions <= pos.

        ``keys`` is (B, nh, dh, T) and ``values`` (B, nh, T, dh); both are updated in place.
        """
        b, d = x.shape
        nh, dh = self.n_heads, d // self.n_heads
        rows = np.arange(b)
        with no_grad():
            h = self.ln1(Tensor(x))
            q = self.wq(h).data.reshape(b, nh, 1, dh)
            keys[rows, :, :, pos] = self.wk(h).data.reshape(b, nh, dh)
            values[rows, :, pos, :] = self.wv(h).data.reshape(b, nh, dh)
            scores = (q @ keys) * x.dtype.type(1.0 / math.sqrt(dh))
            future = np.arange(keys.shape[-1])[None, :] > pos[:, None]
            scores += np.where(future, _NEG, 0.0).astype(x.dtype)[:, None, None, :]
            o = (softmax(Tensor(scores), axis=-1).data @ values).reshape(b, d)
            y = x + self.wo(Tensor(o)).data
            return y + self.fc2(gelu(self.fc1(self.ln2(Tensor(y))))).data


class DecoderLM(Module):
    def __init__(self, rng: np.random.Generator, vocab_size: int, d: int = 128, n_layers: int = 4,
                 n_heads: int = 4, context: int = 512):
        self.vocab_size = vocab_size
        self.d = d
        self.context = context
        self.tok_emb = embedding_table(rng, vocab_size, d)
        self.pos_emb = embedding_table(rng, context, d)
        self.blocks = [Block(rng, d, n_heads) for _ in range(n_layers)]
        self.ln_f = LayerNorm(d)
        self.head = parameter(xavier_uniform(rng, (d, vocab_size)))

    def embed_tokens(self, ids) -> Tensor:
        return take_rows(self.tok_emb, ids)

    def hidden(self, x: Tensor) -> Tensor:
        """Final hidden states for inputs X of shape (B, T, d), positions added here."""
        t = x.shape[1]
        if t > self.context:
            raise ValueError(f"sequence of {t} positions exceeds context {self.context}")
        x = add(x, take_rows(self.pos_emb, np.arange(t)))
        bias = causal_bias(t, x.dtype)
        for block in self.blocks:
            x = block(x, bias)
        return self.ln_f(x)

    def prefill(self, x: Tensor, room: int) -> tuple[np.ndarray, list[tuple[np.ndarray, np.ndarray]]]:
        """Hidden states for a padded batch plus per-block key/value caches with ``room`` free positions."""
        t = x.shape[1]
        if t > self.context:
            raise ValueError(f"sequence of {t} positions exceeds context {self.context}")
        room = min(room, self.context - t)
        cache: list = []
        with no_grad():
            h = add(x, take_rows(self.pos_emb, np.arange(t)))
            bias = causal_bias(t, x.dtype)
            for block in self.blocks:
                h = block(h, bias, cache)
            h = self.ln_f(h).data
        grown = []
        for k, v in cache:
            kk = np.zeros(k.shape[:3] + (t + room,), k.dtype)
            vv = np.zeros(v.shape[:2] + (t + room,) + v.shape[3:], v.dtype)
            kk[..., :t] = k
            vv[:, :, :t] = v
            grown.append((kk, vv))
        return h, grown

    def decode_step(self, ids: np.ndarray, pos: np.ndarray, cache) -> np.ndarray:
        """Logits for one new token per row at positions ``pos``, extending ``cache``."""
        x = self.tok_emb.data[ids] + self.pos_emb.data[pos]
        for block, (k, v) in zip(self.blocks, cache):
            x = block.step(x, k, v, pos)
        with no_grad():
            return self.logits(self.ln_f(Tensor(x))).data

    def logits(self, hidden: Tensor) -> Tensor:
        return matmul(hidden, self.head)

    def forward(self, x: Tensor) -> Tensor:
        """Logits Y of shape (B, T, vocab) for spliced inputs X."""
        if x.ndim == 2:
            x = reshape(x, (1,) + x.shape)
        return self.logits(self.hidden(x))
