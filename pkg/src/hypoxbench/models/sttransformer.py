"""Spatio-temporal transformer with learned additive attention biases."""
from __future__ import annotations

from .. import autodiff as ad
from .base import SequenceClassifier, TransformerBlocks


class STTransformer(SequenceClassifier, TransformerBlocks):
    """Z0 = X W_e, then encoder layers with
    softmax(QK^T/sqrt(d_k) + A_spatial + A_temporal) V, mean-pooled over time.

    The variables of a sample are its spatial units.  Each layer learns an
    F x F coupling matrix ``A_s``; its contribution to the logit between time
    steps t and u is x_t^T A_s x_u, i.e. the feature-pair bias broadcast over
    every pair of time steps.  ``A_t`` is a learned T x T bias over time
    positions shared by all features.  Both start at zero, where a layer is
    plain multi-head attention.
    """

    def build(self):
        D, F, T = self.cfg.hidden, self.n_features, self.window
        self.linear_params("embed", F, D)
        for layer in range(self.cfg.layers):
            self.add_encoder_params(f"enc{layer}", D, self.cfg.ffn)
            self.param(f"enc{layer}.A_spatial", (F, F), fill=0.0)
            self.param(f"enc{layer}.A_temporal", (T, T), fill=0.0)
        self.param("norm.g", (D,), fill=1.0)
        self.param("norm.b", (D,), fill=0.0)
        self.linear_params("head", D, 1)

    def attention_bias(self, layer: int, x):
        B, T, _ = x.shape
        spatial = x @ self.params[f"enc{layer}.A_spatial"] @ ad.transpose(x, (0, 2, 1))
        return ad.reshape(spatial, (B, 1, T, T)) + self.params[f"enc{layer}.A_temporal"]

    def logits(self, x, rng):
        z = self.linear("embed", x)
        for layer in range(self.cfg.layers):
            z = self.encoder_layer(f"enc{layer}", z, self.cfg.heads, rng, bias=self.attention_bias(layer, x))
        z = ad.layer_norm(z, self.params["norm.g"], self.params["norm.b"])
        return self.linear("head", ad.mean_pool(z, axis=1))
