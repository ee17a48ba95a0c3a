import os
import subprocess
import sys

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from galla.tensor import (
    AdamW,
    MaskEmpty,
    ShapeMismatch,
    Tensor,
    adamw_step,
    concat,
    cross_entropy,
    default_dtype,
    embedding_lookup,
    gelu,
    init_state,
    layer_norm,
    matmul,
    parameter,
    segment_mean,
    softmax,
    warmup_lr,
)
from galla.tensor import checkpoint, kernels
from galla.tensor import _kernels_py
from gradcheck import check

TOL = 1e-3


def p64(rng, *shape):
    return parameter(rng.standard_normal(shape), dtype=np.float64)


def test_matmul_identity():
    rng = np.random.default_rng(0)
    a = Tensor(rng.standard_normal((3, 5)))
    out = matmul(Tensor(np.eye(3)), a)
    np.testing.assert_array_equal(out.data, a.data)


def test_shape_mismatch_names_both_shapes():
    with pytest.raises(ShapeMismatch, match=r"\(2, 3\).*\(4, 5\)"):
        matmul(Tensor(np.ones((2, 3))), Tensor(np.ones((4, 5))))
    with pytest.raises(ShapeMismatch):
        Tensor(np.ones((2, 3))) + Tensor(np.ones((4, 3)))


def test_cross_entropy_empty_mask():
    logits = Tensor(np.zeros((4, 7)))
    with pytest.raises(MaskEmpty):
        cross_entropy(logits, np.zeros(4, dtype=int), np.zeros(4))


def test_cross_entropy_uniform_logits_is_log_vocab():
    logits = Tensor(np.zeros((5, 11)))
    loss = cross_entropy(logits, np.arange(5), np.ones(5))
    assert loss.item() == pytest.approx(np.log(11), rel=1e-6)


def test_cross_entropy_ignores_masked_targets_exactly():
    rng = np.random.default_rng(1)
    logits = Tensor(rng.standard_normal((6, 9)))
    mask = np.array([0, 1, 1, 0, 1, 0])
    t1 = rng.integers(0, 9, 6)
    t2 = t1.copy()
    t2[mask == 0] = rng.integers(0, 9, 3)
    assert cross_entropy(logits, t1, mask).data.tobytes() == cross_entropy(logits, t2, mask).data.tobytes()




def _cases(rng):
    """(loss builder, tensors) per core op, float64."""
    w1, w2 = rng.standard_normal((3, 5)), rng.standard_normal((3, 5))
    w3, w4, w5 = rng.standard_normal((4, 6)), rng.standard_normal((6, 3)), rng.standard_normal((4, 3))
    a, b = p64(rng, 3, 4), p64(rng, 4, 5)
    yield "matmul", (lambda: (matmul(a, b) * Tensor(w1)).sum()), [a, b]
    x, y = p64(rng, 2, 3, 4), p64(rng, 4)
    yield "add_broadcast", (lambda: ((x + y) * (x + y)).sum()), [x, y]
    u, v = p64(rng, 3, 4), p64(rng, 3, 4)
    yield "mul", (lambda: (u * v * u).sum()), [u, v]
    s = p64(rng, 3, 5)
    yield "softmax", (lambda: (softmax(s) * Tensor(w2)).sum()), [s]
    h, g, bb = p64(rng, 4, 6), p64(rng, 6), p64(rng, 6)
    yield "layer_norm", (lambda: (layer_norm(h, g, bb) * Tensor(w3)).sum()), [h, g, bb]
    z = p64(rng, 3, 4)
    yield "gelu", (lambda: (gelu(z) * Tensor(w1[:, :4])).sum()), [z]
    table = p64(rng, 7, 3)
    ids = rng.integers(0, 7, (2, 5))
    yield "embedding", (lambda: (embedding_lookup(table, ids) * embedding_lookup(table, ids)).sum()), [table]
    c1, c2 = p64(rng, 2, 3), p64(rng, 4, 3)
    yield "concat", (lambda: (concat([c1, c2]) * Tensor(w4)).sum()), [c1, c2]
    logits = p64(rng, 6, 8)
    tg = rng.integers(0, 8, 6)
    mk = np.array([1, 0, 1, 1, 0, 1])
    yield "cross_entropy", (lambda: cross_entropy(logits, tg, mk)), [logits]
    src = p64(rng, 6, 3)
    seg = np.array([0, 2, 2, 1, 0, 2])
    yield "segment_mean", (lambda: (segment_mean(src, seg, 4) * Tensor(w5)).sum()), [src]


@pytest.mark.parametrize("seed", range(10))
def test_core_op_gradients_match_finite_differences(seed):
    rng = np.random.default_rng(seed)
    with default_dtype(np.float64):
        for name, fn, tensors in _cases(rng):
            assert check(fn, tensors) <= TOL, name


def test_batched_matmul_with_shared_weight_gradient():
    rng = np.random.default_rng(3)
    with default_dtype(np.float64):
        x, w = p64(rng, 2, 3, 4), p64(rng, 4, 2)
        q, k = p64(rng, 2, 3, 4), p64(rng, 2, 4, 3)
        assert check(lambda: (matmul(x, w) * matmul(x, w)).sum(), [x, w]) <= TOL
        assert check(lambda: (matmul(q, k) * matmul(q, k)).sum(), [q, k]) <= TOL
        t = p64(rng, 2, 3, 4)
        flat = lambda: t.transpose(0, 2, 1).reshape(2, 12)  # noqa: E731
        assert check(lambda: (flat() * flat()).sum(), [t]) <= TOL


def test_float32_default():
    assert Tensor([1.0, 2.0]).dtype == np.float32
    with default_dtype(np.float64):
        assert Tensor([1.0]).dtype == np.float64
    assert Tensor([1.0]).dtype == np.float32


# -- optimizer ---------------------------------------------------------------

def test_adamw_zero_grad_zero_decay_leaves_params():
    p = parameter(np.array([1.5, -2.0, 0.25]))
    before = p.data.copy()
    state = init_state([p], learning_rate=1e-2, weight_decay=0.0)
    for _ in range(3):
        adamw_step([p], [np.zeros(3, dtype=np.float32)], state)
    np.testing.assert_array_equal(p.data, before)


def test_adamw_scalar_matches_hand_calculation():
    with default_dtype(np.float64):
        p = parameter(np.array(2.0))
    lr, wd, b1, b2, eps = 0.1, 0.01, 0.9, 0.999, 1e-8
    state = init_state([p], learning_rate=lr, weight_decay=wd, beta1=b1, beta2=b2, eps=eps)
    g1, g2 = 0.5, -1.0
    adamw_step([p], [np.array(g1)], state)
    # Step 1 by hand: m = 0.05, v = 0.00025; bias-corrected both give |g|.
    w = 2.0 * (1 - lr * wd)
    w -= lr * (0.05 / 0.1) / (np.sqrt(0.00025 / 0.001) + eps)
    assert p.data == pytest.approx(w, abs=1e-12)
    adamw_step([p], [np.array(g2)], state)
    m = 0.9 * 0.05 + 0.1 * g2
    v = 0.999 * 0.00025 + 0.001 * g2 * g2
    w = w * (1 - lr * wd) - lr * (m / (1 - 0.81)) / (np.sqrt(v / (1 - 0.999**2)) + eps)
    assert p.data == pytest.approx(w, abs=1e-12)


@pytest.mark.parametrize("k", [1, 7, 25, 49])
def test_warmup_schedule(k):
    assert warmup_lr(1e-4, k, 50) == pytest.approx(k / 50 * 1e-4)
    assert warmup_lr(1e-4, 50, 50) == 1e-4
    assert warmup_lr(1e-4, 500, 50) == 1e-4


def test_adamw_skips_params_without_grad():
    a, b = parameter(np.ones(2)), parameter(np.ones(2))
    opt = AdamW([a, b], lr=0.1, weight_decay=0.5)
    a.grad = np.ones(2, dtype=np.float32)
    opt.step()
    assert not np.array_equal(a.data, np.ones(2))
    np.testing.assert_array_equal(b.data, np.ones(2))


# -- checkpoint ----------------------------------------------------------------

def test_checkpoint_round_trip(tmp_path):
    rng = np.random.default_rng(0)
    arrays = {"w": rng.standard_normal((3, 4)).astype(np.float32), "b": np.zeros(4, np.float32),
              "s": np.array(3.5, np.float32), "né": np.arange(6, dtype=np.float32).reshape(1, 2, 3)}
    path = tmp_path / "m.ckpt"
    checkpoint.save(path, arrays, {"d": 4})
    back, meta = checkpoint.load(path)
    assert list(back) == list(arrays) and meta == {"d": 4}
    for k in arrays:
        assert back[k].shape == arrays[k].shape
        assert back[k].tobytes() == arrays[k].tobytes()
    assert checkpoint.checksum(back) == checkpoint.checksum(arrays)
    checkpoint.save(tmp_path / "again.ckpt", back, meta)
    assert (tmp_path / "again.ckpt").read_bytes() == path.read_bytes()


def test_checkpoint_rejects_foreign_file(tmp_path):
    (tmp_path / "x").write_bytes(b"not a checkpoint")
    with pytest.raises(checkpoint.CheckpointError):
        checkpoint.load(tmp_path / "x")


# -- kernels -------------------------------------------------------------------

@settings(max_examples=50, deadline=None)
@given(st.integers(1, 6), st.integers(1, 40), st.integers(1, 5), st.integers(0, 2**31))
def test_compiled_and_fallback_kernels_agree(n_out, n_src, d, seed):
    rng = np.random.default_rng(seed)
    idx = rng.integers(0, n_out, n_src)
    src = rng.standard_normal((n_src, d))
    a = np.zeros((n_out, d))
    b = np.zeros((n_out, d))
    kernels.scatter_add_rows(a, idx, src)
    _kernels_py.scatter_add_rows(b, idx, src)
    np.testing.assert_allclose(a, b, rtol=1e-12, atol=1e-12)


def test_kernel_rejects_bad_index():
    with pytest.raises(IndexError):
        kernels.scatter_add_rows(np.zeros((2, 2)), np.array([2]), np.ones((1, 2)))


def test_pure_python_switch_selects_fallback():
    code = "from galla.tensor import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, GALLA_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "numpy"
