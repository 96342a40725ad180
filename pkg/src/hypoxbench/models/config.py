from __future__ import annotations

import dataclasses
from dataclasses import dataclass, field
from typing import Any, Mapping

from ..errors import ConfigError

ARCHITECTURES = ("bilstm", "tcn", "medformer", "sttransformer")

# per-architecture defaults; the layer/unit/head counts follow the published setup,
# the remaining widths and dropout rates are our own choices
_DEFAULTS: dict[str, dict[str, Any]] = {
    "bilstm": dict(hidden=120, layers=2, dropout=0.30),
    "tcn": dict(hidden=64, layers=3, kernel_size=3, dilations=(1, 2, 4), dropout=0.10),
    "medformer": dict(hidden=64, layers=2, heads=4, ffn=128, dropout=0.10,
                      patch_lengths=(1, 7), causal=True),
    "sttransformer": dict(hidden=64, layers=3, heads=16, ffn=128, dropout=0.10),
}


@dataclass(frozen=True)
class ModelConfig:
    arch: str
    hidden: int = 64
    layers: int = 2
    heads: int = 1
    ffn: int = 128
    dropout: float = 0.1
    kernel_size: int = 3
    dilations: tuple[int, ...] = (1, 2, 4)
    patch_lengths: tuple[int, ...] = (1, 7)
    causal: bool = True
    forget_bias: float = 1.0
    dtype: str = "float32"
    extra: Mapping[str, Any] = field(default_factory=dict)

    def __post_init__(self):
        if self.arch not in ARCHITECTURES:
            raise ConfigError(f"unknown architecture {self.arch!r}; expected one of {ARCHITECTURES}")
        if self.hidden < 1 or self.layers < 1:
            raise ConfigError("hidden and layers must be positive")
        if not 0.0 <= self.dropout < 1.0:
            raise ConfigError(f"dropout must be in [0, 1), got {self.dropout}")
        if self.dtype not in ("float32", "float64"):
            raise ConfigError(f"dtype must be float32 or float64, got {self.dtype!r}")
        if self.arch in ("medformer", "sttransformer") and self.hidden % self.heads:
            raise ConfigError(f"{self.arch}: {self.heads} heads do not divide width {self.hidden}")
        if self.arch == "tcn":
            if len(self.dilations) != self.layers or any(d < 1 for d in self.dilations):
                raise ConfigError("tcn: need one dilation >= 1 per layer")
            if self.kernel_size < 1:
                raise ConfigError("tcn: kernel_size must be >= 1")
        if self.arch == "medformer" and (not self.patch_lengths or any(p < 1 for p in self.patch_lengths)):
            raise ConfigError("medformer: no valid patch lengths")

    @classmethod
    def default(cls, arch: str, **overrides) -> "ModelConfig":
        if arch not in _DEFAULTS:
            raise ConfigError(f"unknown architecture {arch!r}; expected one of {ARCHITECTURES}")
        kw = dict(_DEFAULTS[arch])
        kw.update(overrides)
        for key in ("dilations", "patch_lengths"):
            if key in kw:
                kw[key] = tuple(kw[key])
        valid = {f.name for f in dataclasses.fields(cls)}
        unknown = set(kw) - valid
        if unknown:
            raise ConfigError(f"{arch}: unknown model option(s) {sorted(unknown)}")
        return cls(arch=arch, **kw)

    def to_dict(self) -> dict[str, Any]:
        d = dataclasses.asdict(self)
        d["dilations"] = list(self.dilations)
        d["patch_lengths"] = list(self.patch_lengths)
        d["extra"] = dict(self.extra)
        return d

    @classmethod
    def from_dict(cls, d: Mapping[str, Any]) -> "ModelConfig":
        d = dict(d)
        arch = d.pop("arch")
        return cls.default(arch, **d)
