"""Class-imbalance correction: SMOTE on the dataset, weighted sampling per batch."""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import ConfigError, ResampleError, WeightingError
from .preprocess import SequenceDataset


@dataclass(frozen=True)
class SmoteConfig:
    k_neighbors: int = 5
    target_ratio: float = 1.0
    rng_seed: int = 0

    def __post_init__(self):
        if self.k_neighbors < 1:
            raise ConfigError("k_neighbors must be >= 1")
        if not 0.0 < self.target_ratio <= 1.0:
            raise ConfigError("target_ratio must be in (0, 1]")


@dataclass(frozen=True)
class SmotePlan:
    """Which minority sample, which neighbour and which mixing weight make up
    each synthetic sample (indices are into the minority subset)."""

    minority_label: int
    minority_index: np.ndarray  # dataset rows of the minority class
    neighbors: np.ndarray  # (n_minority, k) neighbour positions within the minority subset
    base: np.ndarray
    partner: np.ndarray
    mu: np.ndarray


def k_nearest(points: np.ndarray, k: int, max_block: int = 20_000_000) -> np.ndarray:
    """Indices of the k nearest other rows (Euclidean), ties to the lower index.

    Distances are exact squared differences (no dot-product expansion), so
    equal distances compare equal.
    """
    n = len(points)
    chunk = max(1, max_block // max(1, n * points.shape[1]))
    out = np.empty((n, k), dtype=np.int64)
    for start in range(0, n, chunk):
        block = points[start:start + chunk]
        diff = block[:, None, :] - points[None, :, :]
        d2 = np.einsum("ijk,ijk->ij", diff, diff)
        rows = np.arange(len(block))
        d2[rows, start + rows] = np.inf
        out[start:start + chunk] = np.argsort(d2, axis=1, kind="stable")[:, :k]
    return out


def smote_plan(ds: SequenceDataset, cfg: SmoteConfig) -> Optional[SmotePlan]:
    """Draw the synthetic-sample recipe; ``None`` when already at the target ratio."""
    y = np.asarray(ds.y)
    counts = np.bincount(y, minlength=2)
    if counts.min() == 0:
        raise ResampleError("SMOTE needs both classes present")
    minority = int(np.argmin(counts)) if counts[0] != counts[1] else 1
    n_min, n_maj = int(counts[minority]), int(counts[1 - minority])
    n_new = math.ceil(cfg.target_ratio * n_maj) - n_min
    if n_new <= 0:
        return None
    if n_min <= cfg.k_neighbors:
        raise ResampleError(f"minority class has {n_min} samples; need more than k = {cfg.k_neighbors}")
    idx = np.flatnonzero(y == minority)
    flat = ds.x[idx].reshape(n_min, -1)
    nbrs = k_nearest(flat, cfg.k_neighbors)
    rng = np.random.default_rng(cfg.rng_seed)
    base = rng.integers(0, n_min, n_new)
    partner = nbrs[base, rng.integers(0, cfg.k_neighbors, n_new)]
    mu = rng.random(n_new)
    return SmotePlan(minority, idx, nbrs, base, partner, mu)


def interpolate(x: np.ndarray, x_nn: np.ndarray, mu) -> np.ndarray:
    """x + mu * (x_nn - x), broadcasting ``mu`` over trailing axes."""
    mu = np.asarray(mu, dtype=float)
    mu = mu.reshape(mu.shape + (1,) * (x.ndim - mu.ndim))
    return x + mu * (x_nn - x)


def smote(ds: SequenceDataset, cfg: SmoteConfig = SmoteConfig()) -> SequenceDataset:
    """Append synthetic minority windows until minority = ceil(ratio * majority).

    Interpolation happens on the flattened (window * features) vectors; the
    result is reshaped back.  Originals keep their order and come first.
    """
    plan = smote_plan(ds, cfg)
    if plan is None:
        return ds
    n = len(plan.base)
    flat = ds.x.reshape(len(ds.x), -1)
    src = flat[plan.minority_index]
    new = interpolate(src[plan.base], src[plan.partner], plan.mu).reshape((n,) + ds.x.shape[1:])
    base_rows = plan.minority_index[plan.base]
    meta = {}
    for k, v in ds.meta.items():
        extra = np.ones(n, dtype=bool) if k == "synthetic" else v[base_rows]
        meta[k] = np.concatenate([v, extra])
    return SequenceDataset(
        x=np.concatenate([ds.x, new]),
        y=np.concatenate([ds.y, np.full(n, plan.minority_label, dtype=ds.y.dtype)]),
        meta=meta, window=ds.window, lead=ds.lead, feature_names=ds.feature_names, skipped=ds.skipped,
    )


def batch_weights(y) -> np.ndarray:
    """1 / (size of the sample's class)."""
    y = np.asarray(y).astype(np.int64)
    counts = np.bincount(y, minlength=2)
    if len(counts) > 2 or counts.min() == 0:
        raise WeightingError("weighted sampling needs both classes (labels 0 and 1)")
    return 1.0 / counts[y]


def sample_batches(weights, batch_size: int, rng_seed=None, num_samples: Optional[int] = None,
                   rng: Optional[np.random.Generator] = None) -> Iterator[np.ndarray]:
    """Index batches drawn with replacement in proportion to ``weights``.

    One pass yields ``num_samples`` (default ``len(weights)``) indices; the
    final batch may be short.
    """
    w = np.asarray(weights, dtype=float)
    if batch_size < 1:
        raise ConfigError("batch_size must be >= 1")
    if rng is None:
        rng = np.random.default_rng(rng_seed)
    total = len(w) if num_samples is None else num_samples
    idx = rng.choice(len(w), size=total, replace=True, p=w / w.sum())
    for start in range(0, total, batch_size):
        yield idx[start:start + batch_size]
