"""From hindcast records to (samples, timesteps, features) arrays.

Order of operations: split by date, fit the per-depth scaler on the
training part, featurize each part (binary labels, scaled drivers, cyclical
calendar encodings), then cut contiguous per-cell runs into windows.
"""
from __future__ import annotations

import datetime as dt
import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Sequence

import numpy as np
from numpy.lib.stride_tricks import sliding_window_view

from .autodiff.checkpoint import load_checkpoint, save_checkpoint
from .dataio import DRIVERS, HYPOXIA_THRESHOLD, HindcastSet
from .errors import ConfigError, DataError, DomainError, FitError, SplitError

log = logging.getLogger(__name__)

DRIVER_FEATURES = ("pea_n", "soc_n", "dcp_n")
CYCLICAL_FEATURES = ("doy_sin", "doy_cos", "month_sin", "month_cos")
HOUR_FEATURES = ("hour_sin", "hour_cos")


def binarize(do_bottom, threshold: float = HYPOXIA_THRESHOLD, inclusive: bool = False):
    """1 where bottom DO is hypoxic.  Strict ``<`` by default; ``inclusive``
    switches to ``<=``."""
    do = np.asarray(do_bottom, dtype=float)
    if np.any(do < 0):
        raise DomainError("do_bottom must be >= 0")
    hyp = do <= threshold if inclusive else do < threshold
    out = hyp.astype(np.int8)
    return int(out) if out.ndim == 0 else out


def encode_cyclical(day_of_year, year_length, month):
    """(doy_sin, doy_cos, month_sin, month_cos) for 0-based ``day_of_year``.

    Works on scalars or equally shaped arrays.
    """
    day = np.asarray(day_of_year, dtype=float)
    length = np.asarray(year_length, dtype=float)
    month = np.asarray(month)
    if np.any(day < 0) or np.any(day >= length):
        raise DomainError("day_of_year must satisfy 0 <= day < year_length")
    if np.any(month < 1) or np.any(month > 12):
        raise DomainError("month must be in 1..12")
    a = 2 * np.pi * day / length
    b = 2 * np.pi * (month - 1) / 12.0
    out = (np.sin(a), np.cos(a), np.sin(b), np.cos(b))
    if day.ndim == 0:
        return tuple(float(v) for v in out)
    return out


# --------------------------------------------------------------------------
# scaling

@dataclass(frozen=True)
class ScalerParams:
    """Per-depth-bin (min, max) of each driver, learned on training water records."""

    mins: Mapping[int, np.ndarray]
    maxs: Mapping[int, np.ndarray]
    features: tuple[str, ...] = DRIVERS

    def to_dict(self) -> dict:
        return {"features": list(self.features),
                "bins": {str(b): {"min": self.mins[b].tolist(), "max": self.maxs[b].tolist()}
                         for b in sorted(self.mins)}}

    @classmethod
    def from_dict(cls, d) -> "ScalerParams":
        bins = d["bins"]
        return cls({int(b): np.array(v["min"]) for b, v in bins.items()},
                   {int(b): np.array(v["max"]) for b, v in bins.items()},
                   tuple(d["features"]))


def fit_scaler(train: HindcastSet, depth_bins: Optional[Sequence[int]] = None) -> ScalerParams:
    """Fit min/max per depth bin on water records of ``train``.

    ``depth_bins`` lists bins that must be covered (e.g. every bin of the full
    dataset); a listed bin with no training records is an error.
    """
    f = train.frame
    f = f[~f["land"]]
    present = sorted(int(b) for b in f["depth_bin"].unique())
    wanted = sorted(set(int(b) for b in depth_bins)) if depth_bins is not None else present
    empty = [b for b in wanted if b not in present]
    if empty or not wanted:
        raise FitError(f"no training records for depth bin(s) {empty or 'any'}")
    mins, maxs = {}, {}
    for b, g in f.groupby("depth_bin"):
        v = g[list(DRIVERS)].to_numpy()
        mins[int(b)] = v.min(axis=0)
        maxs[int(b)] = v.max(axis=0)
    return ScalerParams(mins, maxs)


def scale_values(values: np.ndarray, lo, hi) -> np.ndarray:
    """(v - min) / (max - min); constant features map to 0; no clipping."""
    values = np.asarray(values, dtype=float)
    lo, hi = np.asarray(lo, dtype=float), np.asarray(hi, dtype=float)
    span = hi - lo
    safe = np.where(span > 0, span, 1.0)
    return np.where(span > 0, (values - lo) / safe, 0.0)


def apply_scaler(params: ScalerParams, hs: HindcastSet) -> np.ndarray:
    """Normalized drivers, shape (records, 3); land records are zero."""
    f = hs.frame
    raw = f[list(params.features)].to_numpy()
    bins = f["depth_bin"].to_numpy()
    land = f["land"].to_numpy()
    out = np.zeros_like(raw)
    for b in np.unique(bins[~land]):
        if int(b) not in params.mins:
            raise FitError(f"depth bin {b} was not seen when fitting the scaler")
        m = (bins == b) & ~land
        out[m] = scale_values(raw[m], params.mins[int(b)], params.maxs[int(b)])
    return out


# --------------------------------------------------------------------------
# splitting

Period = tuple[dt.date, dt.date]


def _as_date(v) -> dt.date:
    if isinstance(v, dt.datetime):
        return v.date()
    if isinstance(v, dt.date):
        return v
    return dt.date.fromisoformat(str(v))


def normalize_periods(periods) -> list[Period]:
    out = sorted((_as_date(a), _as_date(b)) for a, b in periods)
    for a, b in out:
        if b < a:
            raise SplitError(f"test period {a}..{b} ends before it starts")
    for (a0, b0), (a1, b1) in zip(out, out[1:]):
        if a1 <= b0:
            raise SplitError(f"test periods {a0}..{b0} and {a1}..{b1} overlap")
    return out


def in_periods(dates, periods: Sequence[Period]) -> np.ndarray:
    d = np.asarray(dates).astype("datetime64[D]")
    mask = np.zeros(d.shape, dtype=bool)
    for a, b in periods:
        mask |= (d >= np.datetime64(a)) & (d <= np.datetime64(b))
    return mask


def temporal_split(hs: HindcastSet, test_periods) -> tuple[HindcastSet, HindcastSet]:
    """Records dated inside any (inclusive) test period go to test, the rest to train."""
    periods = normalize_periods(test_periods)
    mask = in_periods(hs.column("date"), periods)
    train, test = hs.select(~mask), hs.select(mask)
    if len(train) == 0:
        raise SplitError("temporal split leaves the training set empty")
    if len(test) == 0:
        raise SplitError("temporal split leaves the test set empty")
    return train, test


# --------------------------------------------------------------------------
# features and sequences

@dataclass(frozen=True, eq=False)
class FeatureTable:
    """Per-record model inputs, sorted by (cell_id, date)."""

    features: np.ndarray
    labels: np.ndarray
    date: np.ndarray
    cell_id: np.ndarray
    depth_bin: np.ndarray
    land: np.ndarray
    feature_names: tuple[str, ...]


def featurize(hs: HindcastSet, scaler: ScalerParams, threshold: float = HYPOXIA_THRESHOLD,
              inclusive: bool = False, hour_encoding: bool = False) -> FeatureTable:
    f = hs.frame
    dates = f["date"]
    drivers = apply_scaler(scaler, hs)
    day = (dates.dt.dayofyear - 1).to_numpy()
    year_len = np.where(dates.dt.is_leap_year.to_numpy(), 366, 365)
    cyc = encode_cyclical(day, year_len, dates.dt.month.to_numpy()) if len(f) else [np.zeros(0)] * 4
    cols = [drivers, np.column_stack(cyc)]
    names = DRIVER_FEATURES + CYCLICAL_FEATURES
    if hour_encoding:
        # daily records sit at 00:00
        cols.append(np.column_stack([np.zeros(len(f)), np.ones(len(f))]))
        names += HOUR_FEATURES
    land = f["land"].to_numpy()
    do = np.where(land, np.inf, f["do_bottom"].to_numpy())
    return FeatureTable(
        features=np.concatenate(cols, axis=1) if len(f) else np.zeros((0, len(names))),
        labels=binarize(do, threshold, inclusive) if len(f) else np.zeros(0, np.int8),
        date=dates.to_numpy().astype("datetime64[D]"),
        cell_id=f["cell_id"].to_numpy(),
        depth_bin=f["depth_bin"].to_numpy(),
        land=land,
        feature_names=names,
    )


@dataclass(frozen=True, eq=False)
class SequenceDataset:
    """Windows of shape (window, features) with the label ``lead`` days after
    the last input day.

    ``meta`` holds per-sample arrays: ``date`` (target day), ``start_date``
    (first input day), ``cell_id``, ``depth_bin`` and ``synthetic``.
    """

    x: np.ndarray
    y: np.ndarray
    meta: Mapping[str, np.ndarray]
    window: int
    lead: int
    feature_names: tuple[str, ...] = ()
    skipped: int = 0

    def __len__(self) -> int:
        return len(self.y)

    @property
    def n_features(self) -> int:
        return self.x.shape[2]

    def class_counts(self) -> tuple[int, int]:
        pos = int(self.y.sum())
        return len(self.y) - pos, pos

    def equals(self, other: "SequenceDataset") -> bool:
        return (self.window == other.window and self.lead == other.lead
                and np.array_equal(self.x, other.x) and np.array_equal(self.y, other.y)
                and self.meta.keys() == other.meta.keys()
                and all(np.array_equal(self.meta[k], other.meta[k]) for k in self.meta))


def expected_count(days: int, window: int, lead: int) -> int:
    return max(0, days - window - lead + 1)


def contiguous_runs(dates: np.ndarray) -> list[slice]:
    """Slices of consecutive days in a sorted date array."""
    if len(dates) == 0:
        return []
    gaps = np.flatnonzero(np.diff(dates.astype("datetime64[D]").astype(np.int64)) != 1) + 1
    edges = [0, *gaps.tolist(), len(dates)]
    return [slice(a, b) for a, b in zip(edges[:-1], edges[1:])]


def build_sequences(table: FeatureTable, window: int = 7, lead: int = 1) -> SequenceDataset:
    """Sliding windows over each water cell's contiguous runs.

    A sample ending on day t uses days t-window+1..t and is labelled with
    day t+lead.  Runs shorter than ``window + lead`` are skipped and counted
    in ``skipped``.
    """
    if window < 1 or lead < 0:
        raise DomainError("window must be >= 1 and lead >= 0")
    F = table.features.shape[1]
    xs, ys = [], []
    meta = {k: [] for k in ("date", "start_date", "cell_id", "depth_bin")}
    skipped = 0
    water = ~table.land
    cells = np.unique(table.cell_id[water])
    for cell in cells:
        idx = np.flatnonzero((table.cell_id == cell) & water)
        for run in contiguous_runs(table.date[idx]):
            rows = idx[run]
            n = expected_count(len(rows), window, lead)
            if n == 0:
                skipped += 1
                continue
            feats = table.features[rows]
            win = sliding_window_view(feats, window, axis=0)[:n]  # (n, F, window)
            xs.append(np.transpose(win, (0, 2, 1)))
            tgt = rows[window - 1 + lead: window - 1 + lead + n]
            ys.append(table.labels[tgt])
            meta["date"].append(table.date[tgt])
            meta["start_date"].append(table.date[rows[:n]])
            meta["cell_id"].append(table.cell_id[tgt])
            meta["depth_bin"].append(table.depth_bin[tgt])
    if skipped:
        log.warning("build_sequences: skipped %d run(s) shorter than window + lead = %d", skipped, window + lead)
    if xs:
        x = np.ascontiguousarray(np.concatenate(xs))
        y = np.concatenate(ys).astype(np.int8)
        m = {k: np.concatenate(v) for k, v in meta.items()}
    else:
        x = np.zeros((0, window, F))
        y = np.zeros(0, np.int8)
        m = {"date": np.zeros(0, "datetime64[D]"), "start_date": np.zeros(0, "datetime64[D]"),
             "cell_id": np.zeros(0, np.int64), "depth_bin": np.zeros(0, np.int64)}
    m["synthetic"] = np.zeros(len(y), dtype=bool)
    return SequenceDataset(x, y, m, window, lead, table.feature_names, skipped)


# --------------------------------------------------------------------------
# end-to-end preparation

@dataclass(frozen=True)
class PrepConfig:
    threshold: float = HYPOXIA_THRESHOLD
    inclusive: bool = False
    window: int = 7
    lead: int = 1
    hour_encoding: bool = False

    def __post_init__(self):
        def is_int(v):
            return isinstance(v, (int, np.integer)) and not isinstance(v, bool)

        if not is_int(self.window) or self.window < 1:
            raise ConfigError(f"window must be an integer >= 1, got {self.window!r}")
        if not is_int(self.lead) or self.lead < 0:
            raise ConfigError(f"lead must be an integer >= 0, got {self.lead!r}")
        if isinstance(self.threshold, bool) or not isinstance(self.threshold, (int, float)) \
                or not self.threshold > 0:
            raise ConfigError(f"threshold must be a positive number, got {self.threshold!r}")


@dataclass
class Prepared:
    train: SequenceDataset
    tests: dict[str, SequenceDataset]
    scaler: ScalerParams
    periods: dict[str, Period] = field(default_factory=dict)


def period_name(period: Period) -> str:
    a, b = period
    return f"{a.isoformat()}_{b.isoformat()}"


def prepare(hs: HindcastSet, test_periods, cfg: PrepConfig = PrepConfig()) -> Prepared:
    """Split, scale on train only, featurize and window; one test set per period."""
    periods = normalize_periods(test_periods)
    train_hs, test_hs = temporal_split(hs, periods)
    all_bins = np.unique(hs.column("depth_bin")[~hs.column("land")])
    scaler = fit_scaler(train_hs, all_bins)
    kw = dict(threshold=cfg.threshold, inclusive=cfg.inclusive, hour_encoding=cfg.hour_encoding)
    train = build_sequences(featurize(train_hs, scaler, **kw), cfg.window, cfg.lead)
    tests, names = {}, {}
    for p in periods:
        part = test_hs.select(in_periods(test_hs.column("date"), [p]))
        if len(part) == 0:
            raise SplitError(f"test period {p[0]}..{p[1]} contains no records")
        name = period_name(p)
        tests[name] = build_sequences(featurize(part, scaler, **kw), cfg.window, cfg.lead)
        names[name] = p
    return Prepared(train, tests, scaler, names)


# --------------------------------------------------------------------------
# persistence (same container as model checkpoints)

def save_dataset(ds: SequenceDataset, path, extra_meta=None):
    arrays = {"x": ds.x, "y": ds.y}
    for k, v in ds.meta.items():
        if np.issubdtype(v.dtype, np.datetime64):
            v = v.astype("datetime64[D]").astype(np.int64)
        arrays[f"meta.{k}"] = v
    meta = {"kind": "sequence-dataset", "window": ds.window, "lead": ds.lead,
            "feature_names": list(ds.feature_names), "skipped": ds.skipped}
    meta.update(extra_meta or {})
    return save_checkpoint(path, arrays, meta)


def load_dataset(path) -> SequenceDataset:
    arrays, meta = load_checkpoint(path)
    if meta.get("kind") != "sequence-dataset":
        raise DataError(f"{path}: not a sequence dataset")
    m = {}
    for k, v in arrays.items():
        if k.startswith("meta."):
            key = k[5:]
            m[key] = v.astype("datetime64[D]") if key in ("date", "start_date") else v
    return SequenceDataset(arrays["x"], arrays["y"], m, meta["window"], meta["lead"],
                           tuple(meta["feature_names"]), meta.get("skipped", 0))
