"""Fixed-epoch training loop: resampling, binary cross-entropy, Adam."""
from __future__ import annotations

import csv
import logging
import math
import time
from dataclasses import dataclass, field
from pathlib import Path
from typing import Optional

import numpy as np

from . import autodiff as ad
from .errors import ConfigError, ContractError, NumericError, TrainingError
from .models import ModelConfig, SequenceClassifier, build_model
from .preprocess import SequenceDataset
from .resample import SmoteConfig, batch_weights, sample_batches, smote

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TrainConfig:
    epochs: int = 30
    batch_size: int = 1024
    lr: float = 0.001
    seed: int = 7
    use_smote: bool = False
    use_weighted_sampling: bool = True
    smote_k: int = 5
    smote_ratio: float = 1.0

    def __post_init__(self):
        if self.epochs < 1:
            raise ConfigError(f"epochs must be >= 1, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if not self.lr > 0:
            raise ConfigError(f"lr must be positive, got {self.lr}")


@dataclass
class EpochRecord:
    epoch: int
    loss: float
    batch_losses: list[float]
    samples: int
    positives: int
    seconds: float = field(default=0.0, compare=False)

    @property
    def positive_fraction(self) -> float:
        return self.positives / self.samples if self.samples else 0.0


@dataclass
class TrainLog:
    """One record per epoch.  Wall time is kept but ignored by equality so
    that two identical runs compare equal."""

    epochs: list[EpochRecord] = field(default_factory=list)
    train_samples: int = 0
    synthetic_samples: int = 0

    @property
    def losses(self) -> list[float]:
        return [e.loss for e in self.epochs]

    def write_csv(self, path) -> Path:
        path = Path(path)
        tmp = path.with_name(path.name + ".tmp")
        with open(tmp, "w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["epoch", "loss", "seconds"])
            for e in self.epochs:
                w.writerow([e.epoch, repr(e.loss), f"{e.seconds:.3f}"])
        tmp.replace(path)
        return path


def _streams(seed: int):
    sampling, dropout, smote_seq = np.random.SeedSequence(seed).spawn(3)
    return (np.random.default_rng(sampling), np.random.default_rng(dropout),
            int(smote_seq.generate_state(1)[0]))


def smote_seed(seed: int) -> int:
    """Seed of the SMOTE draw that ``train`` derives from the run seed."""
    return _streams(seed)[2]


def train(model_cfg: ModelConfig, ds_train: SequenceDataset, cfg: TrainConfig = TrainConfig(),
          model: Optional[SequenceClassifier] = None) -> tuple[SequenceClassifier, TrainLog]:
    """Train for exactly ``cfg.epochs`` epochs and return the final weights.

    Each epoch draws ``len(ds)`` samples: with replacement in proportion to
    inverse class frequency when weighted sampling is on, otherwise a
    shuffled pass.  The last short batch is kept.  SMOTE, when enabled, is
    applied once before the first epoch.
    """
    counts = np.bincount(np.asarray(ds_train.y, dtype=np.int64), minlength=2)
    if len(ds_train) == 0 or counts.min() == 0:
        raise TrainingError(f"training data needs both classes, got counts {counts.tolist()}")
    sample_rng, dropout_rng, smote_draw_seed = _streams(cfg.seed)
    n_orig = len(ds_train)
    if cfg.use_smote:
        ds_train = smote(ds_train, SmoteConfig(cfg.smote_k, cfg.smote_ratio, smote_draw_seed))
    if model is None:
        model = build_model(model_cfg, ds_train.n_features, ds_train.window, seed=cfg.seed)
    model.check_input(ds_train.x[:1])
    x = np.ascontiguousarray(ds_train.x, dtype=model.dtype)
    y = np.asarray(ds_train.y, dtype=model.dtype)
    weights = batch_weights(ds_train.y) if cfg.use_weighted_sampling else None

    opt = ad.Adam(model.params, lr=cfg.lr)
    tlog = TrainLog(train_samples=n_orig, synthetic_samples=len(ds_train) - n_orig)
    model.train()
    epoch = b = 0
    try:
        for epoch in range(1, cfg.epochs + 1):
            t0 = time.perf_counter()
            if weights is not None:
                batches = sample_batches(weights, cfg.batch_size, rng=sample_rng)
            else:
                order = sample_rng.permutation(len(y))
                batches = (order[i:i + cfg.batch_size] for i in range(0, len(order), cfg.batch_size))
            losses, drawn, pos = [], 0, 0
            for b, idx in enumerate(batches):
                opt.zero_grad()
                loss = ad.binary_cross_entropy(model(x[idx], dropout_rng), y[idx])
                value = float(loss.item())
                if not math.isfinite(value):
                    ad.get_tape().clear()
                    raise NumericError(f"non-finite loss at epoch {epoch}, batch {b}")
                ad.backward(loss)
                opt.step()
                losses.append(value)
                drawn += len(idx)
                pos += int(y[idx].sum())
            rec = EpochRecord(epoch, float(np.mean(losses)), losses, drawn, pos,
                              seconds=time.perf_counter() - t0)
            tlog.epochs.append(rec)
            log.info("%s epoch %d loss %.5f (%.1fs)", model_cfg.arch, epoch, rec.loss, rec.seconds)
    except NumericError as exc:
        ad.get_tape().clear()
        if "epoch" not in str(exc):
            raise NumericError(f"{exc} (epoch {epoch}, batch {b})") from exc
        raise
    finally:
        model.eval()
    return model, tlog


def predict_proba(model: SequenceClassifier, ds, batch_size: int = 4096) -> np.ndarray:
    """Probabilities in dataset order, dropout off, no graph recorded."""
    x = ds.x if isinstance(ds, SequenceDataset) else np.asarray(ds)
    if x.ndim != 3 or x.shape[2] != model.n_features or x.shape[1] != model.window:
        raise ContractError(
            f"model expects (n, {model.window}, {model.n_features}) inputs, got {x.shape}")
    was_training = model.training
    model.eval()
    out = np.empty(len(x), dtype=np.float64)
    try:
        with ad.no_grad():
            for start in range(0, len(x), batch_size):
                out[start:start + batch_size] = model(x[start:start + batch_size]).data
    finally:
        model.training = was_training
    return out
