"""Minimal reverse-mode autodiff on numpy arrays, plus Adam."""
from .checkpoint import load_checkpoint, save_checkpoint
from .ops import (
    MASK_SENTINEL,
    add,
    binary_cross_entropy,
    causal_dilated_conv1d,
    concat,
    dropout,
    getitem,
    layer_norm,
    matmul,
    mean_pool,
    mul,
    relu,
    reshape,
    sigmoid,
    softmax_with_bias,
    stack,
    sub,
    sum_all,
    tanh,
    transpose,
)
from .optim import Adam, AdamState, adam_step
from .tensor import Tape, Tensor, as_tensor, backward, get_tape, no_grad, parameter

__all__ = [
    "MASK_SENTINEL", "Adam", "AdamState", "Tape", "Tensor", "adam_step", "add", "as_tensor",
    "backward", "binary_cross_entropy", "causal_dilated_conv1d", "concat", "dropout",
    "get_tape", "getitem", "layer_norm", "load_checkpoint", "matmul", "mean_pool", "mul",
    "no_grad", "parameter", "relu", "reshape", "save_checkpoint", "sigmoid",
    "softmax_with_bias", "stack", "sub", "sum_all", "tanh", "transpose",
]
