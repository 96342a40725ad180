"""Differentiable primitives.

Each function takes tensors (or array-likes, treated as constants), computes
the forward value with numpy and registers a closure returning the local
vector-Jacobian products.
"""
from __future__ import annotations

from typing import Optional, Sequence

import numpy as np
from scipy.special import expit

from ..errors import ShapeError
from .tensor import Tensor, as_tensor, make_node

MASK_SENTINEL = -1e9


def _pair(a, b):
    if isinstance(a, Tensor):
        return a, as_tensor(b, like=a)
    b = as_tensor(b)
    return as_tensor(a, like=b), b


def _broadcastable(op: str, a: Tensor, b: Tensor) -> None:
    try:
        np.broadcast_shapes(a.shape, b.shape)
    except ValueError:
        raise ShapeError(f"{op}: cannot broadcast {a.shape} with {b.shape}") from None


def add(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcastable("add", a, b)
    return make_node(a.data + b.data, (a, b), lambda g: (g, g), "add")


def sub(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcastable("sub", a, b)
    return make_node(a.data - b.data, (a, b), lambda g: (g, -g), "sub")


def mul(a, b) -> Tensor:
    a, b = _pair(a, b)
    _broadcastable("mul", a, b)
    ad, bd = a.data, b.data

    def backward(g):
        return (g * bd if a.requires_grad else None,
                g * ad if b.requires_grad else None)

    return make_node(ad * bd, (a, b), backward, "mul")


def matmul(a, b) -> Tensor:
    """Matrix product with numpy batch broadcasting; both operands ≥ 2-D."""
    a, b = _pair(a, b)
    if a.ndim < 2 or b.ndim < 2 or a.shape[-1] != b.shape[-2]:
        raise ShapeError(f"matmul: incompatible shapes {a.shape} @ {b.shape}")
    try:
        np.broadcast_shapes(a.shape[:-2], b.shape[:-2])
    except ValueError:
        raise ShapeError(f"matmul: batch dims {a.shape[:-2]} vs {b.shape[:-2]}") from None
    ad, bd = a.data, b.data

    def backward(g):
        ga = gb = None
        if a.requires_grad:
            ga = g @ np.swapaxes(bd, -1, -2)
        if b.requires_grad:
            if bd.ndim == 2:
                # fold batch dims instead of materialising per-sample outer products
                gb = ad.reshape(-1, ad.shape[-1]).T @ g.reshape(-1, g.shape[-1])
            else:
                gb = np.swapaxes(ad, -1, -2) @ g
        return ga, gb

    return make_node(ad @ bd, (a, b), backward, "matmul")


def sigmoid(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = expit(x.data)
    return make_node(out, (x,), lambda g: (g * out * (1.0 - out),), "sigmoid")


def tanh(x: Tensor) -> Tensor:
    x = as_tensor(x)
    out = np.tanh(x.data)
    return make_node(out, (x,), lambda g: (g * (1.0 - out * out),), "tanh")


def relu(x: Tensor) -> Tensor:
    x = as_tensor(x)
    pos = x.data > 0
    return make_node(np.where(pos, x.data, 0.0).astype(x.dtype), (x,), lambda g: (g * pos,), "relu")


def softmax_with_bias(logits: Tensor, bias=None, axis: int = -1) -> Tensor:
    """softmax(logits + bias) along ``axis``; ``bias`` may be a learned tensor
    or a constant mask (use :data:`MASK_SENTINEL` for forbidden slots)."""
    logits = as_tensor(logits)
    parents = [logits]
    z = logits.data
    if bias is not None:
        bias = as_tensor(bias, like=logits)
        _broadcastable("softmax_with_bias", logits, bias)
        z = z + bias.data
        parents.append(bias)
    z = z - z.max(axis=axis, keepdims=True)
    e = np.exp(z)
    s = e / e.sum(axis=axis, keepdims=True)

    def backward(g):
        gz = s * (g - (g * s).sum(axis=axis, keepdims=True))
        return (gz, gz) if bias is not None else (gz,)

    return make_node(s, parents, backward, "softmax_with_bias")


def dropout(x: Tensor, rate: float, training: bool, rng: Optional[np.random.Generator] = None) -> Tensor:
    """Inverted dropout; identity when not training or ``rate == 0``."""
    if not 0.0 <= rate < 1.0:
        raise ValueError(f"dropout rate must be in [0, 1), got {rate}")
    x = as_tensor(x)
    if not training or rate == 0.0:
        return x
    if rng is None:
        raise ValueError("dropout in training mode needs an rng")
    keep = (rng.random(x.shape) >= rate).astype(x.dtype) / (1.0 - rate)
    return make_node(x.data * keep, (x,), lambda g: (g * keep,), "dropout")


def causal_dilated_conv1d(x: Tensor, kernel: Tensor, dilation: int = 1) -> Tensor:
    """Causal dilated convolution over time.

    ``x`` is (batch, T, C_in) and ``kernel`` (K, C_in, C_out); tap ``k``
    multiplies the input ``k * dilation`` steps in the past, so
    ``out[:, t] = sum_k x[:, t - d*k] @ kernel[k]`` with zeros before t=0.
    """
    x, kernel = as_tensor(x), as_tensor(kernel)
    if dilation < 1:
        raise ValueError("dilation must be >= 1")
    if x.ndim != 3 or kernel.ndim != 3 or x.shape[2] != kernel.shape[1]:
        raise ShapeError(f"causal_dilated_conv1d: x {x.shape} vs kernel {kernel.shape}")
    xd, wd = x.data, kernel.data
    B, T, cin = xd.shape
    K, _, cout = wd.shape
    out = np.zeros((B, T, cout), dtype=np.result_type(xd, wd))
    for k in range(K):
        s = k * dilation
        if s >= T:
            break
        out[:, s:] += xd[:, : T - s] @ wd[k]

    def backward(g):
        gx = np.zeros_like(xd) if x.requires_grad else None
        gw = np.zeros_like(wd) if kernel.requires_grad else None
        for k in range(K):
            s = k * dilation
            if s >= T:
                break
            if gx is not None:
                gx[:, : T - s] += g[:, s:] @ wd[k].T
            if gw is not None:
                gw[k] = xd[:, : T - s].reshape(-1, cin).T @ g[:, s:].reshape(-1, cout)
        return gx, gw

    return make_node(out, (x, kernel), backward, "causal_dilated_conv1d")


def concat(tensors: Sequence[Tensor], axis: int = -1) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.concatenate([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"concat: {exc}") from None
    bounds = np.cumsum([t.shape[axis] for t in tensors])[:-1]

    def backward(g):
        return tuple(np.split(g, bounds, axis=axis))

    return make_node(out, tensors, backward, "concat")


def stack(tensors: Sequence[Tensor], axis: int = 0) -> Tensor:
    tensors = [as_tensor(t) for t in tensors]
    try:
        out = np.stack([t.data for t in tensors], axis=axis)
    except ValueError as exc:
        raise ShapeError(f"stack: {exc}") from None

    def backward(g):
        return tuple(np.moveaxis(g, axis, 0))

    return make_node(out, tensors, backward, "stack")


def mean_pool(x: Tensor, axis: int) -> Tensor:
    x = as_tensor(x)
    n = x.shape[axis]
    shape = x.shape

    def backward(g):
        return (np.broadcast_to(np.expand_dims(g, axis), shape) / n,)

    return make_node(x.data.mean(axis=axis), (x,), backward, "mean_pool")


def sum_all(x: Tensor) -> Tensor:
    x = as_tensor(x)
    shape = x.shape
    return make_node(np.asarray(x.data.sum()), (x,), lambda g: (np.broadcast_to(g, shape),), "sum")


def reshape(x: Tensor, shape) -> Tensor:
    x = as_tensor(x)
    try:
        out = x.data.reshape(shape)
    except ValueError:
        raise ShapeError(f"reshape: {x.shape} -> {shape}") from None
    src = x.shape
    return make_node(out, (x,), lambda g: (g.reshape(src),), "reshape")


def transpose(x: Tensor, axes=None) -> Tensor:
    x = as_tensor(x)
    axes = tuple(axes) if axes is not None else tuple(reversed(range(x.ndim)))
    inv = tuple(np.argsort(axes))
    return make_node(x.data.transpose(axes), (x,), lambda g: (g.transpose(inv),), "transpose")


def getitem(x: Tensor, idx) -> Tensor:
    """Basic (slice/int) indexing only, so no index is repeated."""
    x = as_tensor(x)
    out = x.data[idx]

    def backward(g):
        gx = np.zeros_like(x.data)
        gx[idx] = g
        return (gx,)

    return make_node(np.ascontiguousarray(out), (x,), backward, "getitem")


def layer_norm(x: Tensor, gamma: Tensor, beta: Tensor, eps: float = 1e-5) -> Tensor:
    """Normalise over the last axis, then scale and shift."""
    x, gamma, beta = as_tensor(x), as_tensor(gamma), as_tensor(beta)
    if gamma.shape != (x.shape[-1],) or beta.shape != (x.shape[-1],):
        raise ShapeError(f"layer_norm: x {x.shape}, gamma {gamma.shape}, beta {beta.shape}")
    mu = x.data.mean(axis=-1, keepdims=True)
    xc = x.data - mu
    inv = 1.0 / np.sqrt((xc * xc).mean(axis=-1, keepdims=True) + eps)
    xhat = xc * inv
    gd = gamma.data

    def backward(g):
        gxhat = g * gd
        gx = inv * (gxhat - gxhat.mean(axis=-1, keepdims=True)
                    - xhat * (gxhat * xhat).mean(axis=-1, keepdims=True))
        return gx, g * xhat, g

    return make_node(xhat * gd + beta.data, (x, gamma, beta), backward, "layer_norm")


def binary_cross_entropy(probs: Tensor, labels, eps: float = 1e-7) -> Tensor:
    """Mean negative log-likelihood of binary ``labels`` under ``probs``.

    Probabilities are clipped to ``[eps, 1 - eps]``; clipped entries pass no
    gradient.
    """
    probs = as_tensor(probs)
    y = np.asarray(labels, dtype=probs.dtype)
    if y.shape != probs.shape:
        raise ShapeError(f"binary_cross_entropy: probs {probs.shape} vs labels {y.shape}")
    p = np.clip(probs.data, eps, 1.0 - eps)
    n = p.size
    loss = -(y * np.log(p) + (1.0 - y) * np.log1p(-p)).mean()
    inside = (probs.data > eps) & (probs.data < 1.0 - eps)

    def backward(g):
        return (g * inside * (p - y) / (p * (1.0 - p)) / n,)

    return make_node(np.asarray(loss, dtype=probs.dtype), (probs,), backward, "binary_cross_entropy")
