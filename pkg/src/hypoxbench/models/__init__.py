"""The four sequence classifiers and their shared contract."""
from __future__ import annotations

from pathlib import Path

from ..autodiff import load_checkpoint, save_checkpoint
from ..errors import DataError
from .base import SequenceClassifier
from .bilstm import BiLSTM
from .config import ARCHITECTURES, ModelConfig
from .medformer import Medformer
from .sttransformer import STTransformer
from .tcn import TCN

_CLASSES = {"bilstm": BiLSTM, "tcn": TCN, "medformer": Medformer, "sttransformer": STTransformer}

DISPLAY_NAMES = {"bilstm": "BiLSTM", "tcn": "TCN", "medformer": "Medformer", "sttransformer": "ST-Transformer"}


def build_model(cfg: ModelConfig, n_features: int, window: int, seed: int = 0) -> SequenceClassifier:
    return _CLASSES[cfg.arch](cfg, n_features=n_features, window=window, seed=seed)


def save_model(model: SequenceClassifier, path, extra_meta=None) -> Path:
    meta = {"model": model.cfg.to_dict(), "n_features": model.n_features,
            "window": model.window, "seed": model.seed}
    meta.update(extra_meta or {})
    return save_checkpoint(path, model.state_dict(), meta)


def load_model(path) -> tuple[SequenceClassifier, dict]:
    arrays, meta = load_checkpoint(path)
    try:
        cfg = ModelConfig.from_dict(meta["model"])
        model = build_model(cfg, meta["n_features"], meta["window"], meta.get("seed", 0))
    except KeyError as exc:
        raise DataError(f"{path}: checkpoint metadata lacks {exc}") from None
    model.load_state_dict(arrays)
    return model, meta


__all__ = ["ARCHITECTURES", "DISPLAY_NAMES", "BiLSTM", "Medformer", "ModelConfig", "STTransformer",
           "SequenceClassifier", "TCN", "build_model", "load_model", "save_model"]
