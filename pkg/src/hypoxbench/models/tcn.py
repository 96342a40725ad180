from __future__ import annotations

from .. import autodiff as ad
from .base import SequenceClassifier


class TCN(SequenceClassifier):
    """Stack of causal dilated convolutions, h_t = relu(sum_k W_k h_{t-d*k} + b),
    classified from the last time step."""

    def build(self):
        K, H = self.cfg.kernel_size, self.cfg.hidden
        n_in = self.n_features
        for layer in range(self.cfg.layers):
            self.param(f"conv{layer}.W", (K, n_in, H), fan_in=K * n_in)
            self.param(f"conv{layer}.b", (H,), fan_in=K * n_in)
            n_in = H
        self.linear_params("head", H, 1)

    def receptive_field(self) -> int:
        return 1 + (self.cfg.kernel_size - 1) * sum(self.cfg.dilations)

    def layer_outputs(self, x, rng=None):
        x = self.check_input(x)
        outs = []
        h = x
        for layer, d in enumerate(self.cfg.dilations):
            h = ad.causal_dilated_conv1d(h, self.params[f"conv{layer}.W"], d) + self.params[f"conv{layer}.b"]
            h = self.drop(ad.relu(h), rng)
            outs.append(h)
        return outs

    def logits(self, x, rng):
        h = self.layer_outputs(x, rng)[-1]
        return self.linear("head", ad.getitem(h, (slice(None), -1)))
