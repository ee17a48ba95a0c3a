"""Reverse-mode autodiff over numpy arrays, plus AdamW and checkpoints."""
from .core import (
    MaskEmpty,
    ShapeMismatch,
    Tensor,
    add,
    concat,
    cross_entropy,
    default_dtype,
    embedding_lookup,
    gelu,
    get_default_dtype,
    layer_norm,
    linear,
    matmul,
    mul,
    no_grad,
    ones_param,
    parameter,
    reshape,
    segment_mean,
    softmax,
    sub,
    take_rows,
    tensor,
    transpose,
    xavier_uniform,
    zeros_param,
)
from .kernels import BACKEND
from .module import Module
from .optim import AdamW, OptimizerState, adamw_step, init_state, warmup_lr

__all__ = [
    "BACKEND", "AdamW", "MaskEmpty", "Module", "OptimizerState", "ShapeMismatch", "Tensor",
    "adamw_step", "add", "concat", "cross_entropy", "default_dtype", "embedding_lookup", "gelu",
    "get_default_dtype", "init_state", "layer_norm", "linear", "matmul", "mul", "no_grad",
    "ones_param", "parameter", "reshape", "segment_mean", "softmax", "sub", "take_rows",
    "tensor", "transpose", "warmup_lr", "xavier_uniform", "zeros_param",
]
