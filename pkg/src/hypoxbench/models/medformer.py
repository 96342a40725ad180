"""Multi-scale patch transformer (Medformer-style)."""
from __future__ import annotations

import math

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .base import SequenceClassifier, TransformerBlocks, causal_mask


class Medformer(SequenceClassifier, TransformerBlocks):
    """Two-stage attention over patch tokens at several temporal resolutions.

    Local stage: the window is cut into patches of each configured length
    (right-padded with zeros), embedded, and passed through a shared stack
    of masked self-attention layers; each scale is summarised by mean
    pooling.  Global stage: a learned softmax weighting over the scale
    summaries gives one vector for the sigmoid head.
    """

    def build(self):
        D, F, T = self.cfg.hidden, self.n_features, self.window
        for L in self.cfg.patch_lengths:
            n = math.ceil(T / L)
            self.linear_params(f"embed{L}", L * F, D)
            self.param(f"pos{L}", (n, D), fan_in=D)
        for layer in range(self.cfg.layers):
            self.add_encoder_params(f"enc{layer}", D, self.cfg.ffn)
        self.param("norm.g", (D,), fill=1.0)
        self.param("norm.b", (D,), fill=0.0)
        self.linear_params("gate", D, D)
        self.param("gate.v", (D, 1), fan_in=D)
        self.linear_params("head", D, 1)

    def patches(self, x: Tensor, L: int) -> Tensor:
        B, T, F = x.shape
        n = math.ceil(T / L)
        if n * L > T:
            x = ad.concat([x, Tensor(np.zeros((B, n * L - T, F), dtype=self.dtype))], axis=1)
        return ad.reshape(x, (B, n, L * F))

    def scale_tokens(self, x, rng=None) -> dict[int, Tensor]:
        """Encoded patch tokens per patch length, before pooling."""
        x = self.check_input(x)
        out = {}
        for L in self.cfg.patch_lengths:
            tok = self.linear(f"embed{L}", self.patches(x, L)) + self.params[f"pos{L}"]
            n = tok.shape[1]
            mask = causal_mask(n, self.dtype) if self.cfg.causal and n > 1 else None
            for layer in range(self.cfg.layers):
                tok = self.encoder_layer(f"enc{layer}", tok, self.cfg.heads, rng, bias=mask)
            out[L] = ad.layer_norm(tok, self.params["norm.g"], self.params["norm.b"])
        return out

    def logits(self, x, rng):
        tokens = self.scale_tokens(x, rng)
        summaries = ad.stack([ad.mean_pool(t, axis=1) for t in tokens.values()], axis=1)  # (B, S, D)
        B, S, _ = summaries.shape
        score = ad.tanh(self.linear("gate", summaries)) @ self.params["gate.v"]  # (B, S, 1)
        weights = ad.softmax_with_bias(ad.reshape(score, (B, 1, S)))
        pooled = ad.reshape(weights @ summaries, (B, -1))
        return self.linear("head", pooled)
