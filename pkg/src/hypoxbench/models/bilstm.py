"""Stacked bidirectional LSTM classifier."""
from __future__ import annotations

import numpy as np

from .. import autodiff as ad
from ..autodiff import Tensor
from .base import SequenceClassifier


class BiLSTM(SequenceClassifier):
    """Each layer runs a forward and a time-reversed LSTM over its input and
    concatenates the two hidden states per step.  The head reads the final
    forward state and the final (t = 0) backward state of the top layer."""

    def build(self):
        H = self.cfg.hidden
        n_in = self.n_features
        for layer in range(self.cfg.layers):
            for direction in ("fwd", "bwd"):
                name = f"l{layer}.{direction}"
                fan_in = n_in + H
                self.param(f"{name}.Wx", (n_in, 4 * H), fan_in=fan_in)
                self.param(f"{name}.Wh", (H, 4 * H), fan_in=fan_in)
                b = self.param(f"{name}.b", (4 * H,), fan_in=fan_in)
                # gate order i, f, g, o; forget gate starts open
                b.data[H:2 * H] = self.cfg.forget_bias
            n_in = 2 * H
        self.linear_params("head", 2 * H, 1)

    def run_direction(self, name: str, x: Tensor, reverse: bool) -> list[Tensor]:
        """Hidden states indexed by time (already re-aligned for ``reverse``)."""
        p = self.params
        H = self.cfg.hidden
        B, T, _ = x.shape
        xw = x @ p[f"{name}.Wx"] + p[f"{name}.b"]
        h = Tensor(np.zeros((B, H), dtype=self.dtype))
        c = Tensor(np.zeros((B, H), dtype=self.dtype))
        states: list = [None] * T
        steps = range(T - 1, -1, -1) if reverse else range(T)
        for t in steps:
            z = ad.getitem(xw, (slice(None), t)) + h @ p[f"{name}.Wh"]
            i = ad.sigmoid(ad.getitem(z, (slice(None), slice(0, H))))
            f = ad.sigmoid(ad.getitem(z, (slice(None), slice(H, 2 * H))))
            g = ad.tanh(ad.getitem(z, (slice(None), slice(2 * H, 3 * H))))
            o = ad.sigmoid(ad.getitem(z, (slice(None), slice(3 * H, 4 * H))))
            c = f * c + i * g
            h = o * ad.tanh(c)
            states[t] = h
        return states

    def logits(self, x, rng):
        seq = x
        last = self.cfg.layers - 1
        for layer in range(self.cfg.layers):
            fwd = self.run_direction(f"l{layer}.fwd", seq, reverse=False)
            bwd = self.run_direction(f"l{layer}.bwd", seq, reverse=True)
            if layer == last:
                final = ad.concat([fwd[-1], bwd[0]], axis=-1)
                break
            seq = ad.stack([ad.concat([f, b], axis=-1) for f, b in zip(fwd, bwd)], axis=1)
            seq = self.drop(seq, rng)
        return self.linear("head", final)
