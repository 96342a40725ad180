"""Parameter registry and layers shared by the four classifiers."""
from __future__ import annotations

import math
from typing import Optional

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from ..errors import ContractError, ShapeError
from .config import ModelConfig


class SequenceClassifier:
    """Maps a (batch, window, features) array to per-sample hypoxia probabilities.

    Subclasses register parameters in ``build`` and implement ``logits``.
    Weight matrices are initialised uniformly in +-1/sqrt(fan_in).
    """

    def __init__(self, cfg: ModelConfig, n_features: int, window: int, seed: int = 0):
        self.cfg = cfg
        self.n_features = n_features
        self.window = window
        self.seed = seed
        self.dtype = np.dtype(cfg.dtype)
        self.params: dict[str, Tensor] = {}
        self.training = False
        self._init_rng = np.random.default_rng(seed)
        self.build()

    # -- registry ---------------------------------------------------------
    def param(self, name: str, shape, fan_in: Optional[int] = None, fill: Optional[float] = None) -> Tensor:
        if name in self.params:
            raise KeyError(f"duplicate parameter {name}")
        if fill is not None:
            data = np.full(shape, fill, dtype=self.dtype)
        else:
            bound = 1.0 / math.sqrt(fan_in if fan_in else shape[0])
            data = self._init_rng.uniform(-bound, bound, size=shape).astype(self.dtype)
        p = ad.parameter(data, name=name)
        self.params[name] = p
        return p

    def linear_params(self, name: str, n_in: int, n_out: int) -> None:
        self.param(f"{name}.W", (n_in, n_out), fan_in=n_in)
        self.param(f"{name}.b", (n_out,), fan_in=n_in)

    def linear(self, name: str, x: Tensor) -> Tensor:
        return x @ self.params[f"{name}.W"] + self.params[f"{name}.b"]

    def n_parameters(self) -> int:
        return int(sum(p.size for p in self.params.values()))

    def state_dict(self) -> dict[str, np.ndarray]:
        return {k: p.data.copy() for k, p in self.params.items()}

    def load_state_dict(self, arrays) -> None:
        missing = set(self.params) - set(arrays)
        unexpected = set(arrays) - set(self.params)
        if missing or unexpected:
            raise ContractError(f"state mismatch: missing {sorted(missing)}, unexpected {sorted(unexpected)}")
        for k, p in self.params.items():
            a = np.asarray(arrays[k])
            if a.shape != p.shape:
                raise ShapeError(f"parameter {k}: expected {p.shape}, got {a.shape}")
            p.data = np.array(a, dtype=self.dtype)

    def train(self) -> "SequenceClassifier":
        self.training = True
        return self

    def eval(self) -> "SequenceClassifier":
        self.training = False
        return self

    # -- forward ----------------------------------------------------------
    def build(self) -> None:
        raise NotImplementedError

    def logits(self, x: Tensor, rng: Optional[np.random.Generator]) -> Tensor:
        raise NotImplementedError

    def check_input(self, x) -> Tensor:
        x = x if isinstance(x, Tensor) else Tensor(np.asarray(x, dtype=self.dtype))
        if x.ndim != 3 or x.shape[1] != self.window or x.shape[2] != self.n_features:
            raise ShapeError(
                f"{self.cfg.arch}: expected input (batch, {self.window}, {self.n_features}), got {x.shape}")
        if x.dtype != self.dtype:
            x = Tensor(x.data.astype(self.dtype))
        return x

    def forward(self, x, rng: Optional[np.random.Generator] = None) -> Tensor:
        """Probabilities of shape (batch,)."""
        x = self.check_input(x)
        z = self.logits(x, rng)
        return ad.sigmoid(ad.reshape(z, (x.shape[0],)))

    __call__ = forward

    def drop(self, x: Tensor, rng) -> Tensor:
        return ad.dropout(x, self.cfg.dropout, self.training, rng)


class TransformerBlocks:
    """Pre-norm encoder layers: x + attn(LN(x)); x + FFN(LN(x))."""

    def add_encoder_params(self: SequenceClassifier, prefix: str, width: int, ffn: int) -> None:
        self.param(f"{prefix}.ln1.g", (width,), fill=1.0)
        self.param(f"{prefix}.ln1.b", (width,), fill=0.0)
        self.linear_params(f"{prefix}.qkv", width, 3 * width)
        self.linear_params(f"{prefix}.out", width, width)
        self.param(f"{prefix}.ln2.g", (width,), fill=1.0)
        self.param(f"{prefix}.ln2.b", (width,), fill=0.0)
        self.linear_params(f"{prefix}.ff1", width, ffn)
        self.linear_params(f"{prefix}.ff2", ffn, width)

    def attention(self: SequenceClassifier, prefix: str, x: Tensor, heads: int, bias=None) -> Tensor:
        """Multi-head scaled dot-product attention, softmax(QK^T/sqrt(d_k) + bias) V."""
        B, N, D = x.shape
        dk = D // heads
        qkv = self.linear(f"{prefix}.qkv", x)

        def split(i):
            part = ad.getitem(qkv, (Ellipsis, slice(i * D, (i + 1) * D)))
            return ad.transpose(ad.reshape(part, (B, N, heads, dk)), (0, 2, 1, 3))

        q, k, v = split(0), split(1), split(2)
        scores = ad.mul(q @ ad.transpose(k, (0, 1, 3, 2)), 1.0 / math.sqrt(dk))
        probs = ad.softmax_with_bias(scores, bias)
        ctx = ad.reshape(ad.transpose(probs @ v, (0, 2, 1, 3)), (B, N, D))
        return self.linear(f"{prefix}.out", ctx)

    def encoder_layer(self: SequenceClassifier, prefix: str, x: Tensor, heads: int, rng, bias=None) -> Tensor:
        p = self.params
        h = ad.layer_norm(x, p[f"{prefix}.ln1.g"], p[f"{prefix}.ln1.b"])
        x = x + self.drop(self.attention(prefix, h, heads, bias), rng)
        h = ad.layer_norm(x, p[f"{prefix}.ln2.g"], p[f"{prefix}.ln2.b"])
        h = self.linear(f"{prefix}.ff2", ad.relu(self.linear(f"{prefix}.ff1", h)))
        return x + self.drop(h, rng)


def causal_mask(n: int, dtype=np.float64) -> np.ndarray:
    """Additive mask: 0 on and below the diagonal, sentinel above."""
    return np.triu(np.full((n, n), ad.MASK_SENTINEL, dtype=dtype), k=1)
