"""Hindcast records: synthetic generation and CSV ingestion.

CSV layout (UTF-8, comma separated, header required)::

    date,cell_id,depth_bin,lon,lat,pea,soc,dcp_temp,do_bottom,land

``date`` is ISO ``YYYY-MM-DD`` and ``land`` is ``0`` or ``1``.  Floats are
written with ``repr`` so a write/read round trip is exact.

Synthetic generator
-------------------
Random numbers come from numpy's PCG64 bit generator.  A
``SeedSequence(rng_seed)`` is spawned into one child stream for the shared
regional forcing plus one independent child stream per cell, so a cell's
random draws do not depend on how many other cells are generated or in
which order (its depth bin, and so its PEA scale, follows the grid
layout).  For every cell and season three latent driver processes are
simulated (cell offset + seasonal cycle + AR(1) anomaly + daily white
noise); the physical drivers are scaled softplus transforms of them, with a
depth-dependent scale for PEA.  Oxygen drawdown on day t is an
exponentially weighted mean of a fixed combination of the latent drivers
over the ``memory_days`` preceding days, plus Gaussian noise.  Bottom DO is
a decreasing exponential of drawdown, calibrated so that the fraction of
water records below 2.0 mg/L equals ``hypoxia_base_rate``.
"""
from __future__ import annotations

import calendar
import csv
import datetime as dt
import math
import os
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator, Sequence

import numpy as np
import pandas as pd

from .errors import ConfigError, DomainError, IntegrityError, ParseError, SchemaError

COLUMNS = ("date", "cell_id", "depth_bin", "lon", "lat", "pea", "soc", "dcp_temp", "do_bottom", "land")
DRIVERS = ("pea", "soc", "dcp_temp")
HYPOXIA_THRESHOLD = 2.0


@dataclass(frozen=True)
class HindcastRecord:
    date: dt.date
    cell_id: int
    depth_bin: int
    lon: float
    lat: float
    pea: float
    soc: float
    dcp_temp: float
    do_bottom: float
    land: bool


class HindcastSet:
    """Daily gridded records, one per (date, cell_id), sorted by cell then date.

    Treat as immutable: operations return new sets.
    """

    def __init__(self, frame: pd.DataFrame, validate: bool = True):
        frame = frame.loc[:, list(COLUMNS)].copy()
        frame["date"] = pd.to_datetime(frame["date"]).astype("datetime64[ns]")
        frame["cell_id"] = frame["cell_id"].astype(np.int64)
        frame["depth_bin"] = frame["depth_bin"].astype(np.int64)
        for c in ("lon", "lat", *DRIVERS, "do_bottom"):
            frame[c] = frame[c].astype(np.float64)
        frame["land"] = frame["land"].astype(bool)
        frame = frame.sort_values(["cell_id", "date"], kind="mergesort").reset_index(drop=True)
        self._frame = frame
        if validate:
            self._validate()

    def _validate(self) -> None:
        f = self._frame
        dup = f.duplicated(["date", "cell_id"])
        if dup.any():
            row = f[dup].iloc[0]
            raise IntegrityError(f"duplicate record for ({row['date'].date()}, cell {row['cell_id']})")
        bins = f.groupby("cell_id")["depth_bin"].nunique()
        if (bins > 1).any():
            raise IntegrityError(f"cell {bins[bins > 1].index[0]} changes depth_bin across dates")
        for c in DRIVERS:
            if (f[c] < 0).any():
                raise DomainError(f"{c} must be >= 0")
        water = ~f["land"]
        if (f.loc[water, "do_bottom"] < 0).any():
            raise DomainError("do_bottom must be >= 0 for water cells")
        if (f.loc[~water, list(DRIVERS)] != 0).any(axis=None):
            raise DomainError("land cells must carry all-zero drivers")

    @property
    def frame(self) -> pd.DataFrame:
        """A copy of the underlying table."""
        return self._frame.copy()

    def column(self, name: str) -> np.ndarray:
        return self._frame[name].to_numpy()

    @property
    def cells(self) -> int:
        return int(self._frame["cell_id"].nunique())

    @property
    def days(self) -> int:
        return int(self._frame["date"].nunique())

    @property
    def depth_bins(self) -> int:
        return int(self._frame["depth_bin"].nunique())

    def records(self) -> Iterator[HindcastRecord]:
        for row in self._frame.itertuples(index=False):
            yield HindcastRecord(row.date.date(), int(row.cell_id), int(row.depth_bin), row.lon, row.lat,
                                 row.pea, row.soc, row.dcp_temp, row.do_bottom, bool(row.land))

    def select(self, mask) -> "HindcastSet":
        return HindcastSet(self._frame[np.asarray(mask, dtype=bool)], validate=False)

    def __len__(self) -> int:
        return len(self._frame)

    def __eq__(self, other) -> bool:
        return isinstance(other, HindcastSet) and self._frame.equals(other._frame)

    def __repr__(self) -> str:
        return f"HindcastSet(records={len(self)}, cells={self.cells}, days={self.days})"


# --------------------------------------------------------------------------
# synthetic data

@dataclass(frozen=True)
class SynthConfig:
    n_cells: int = 200
    n_days: int = 120
    seasons: tuple[tuple[int, int, int], ...] = ((2019, 7, 8), (2020, 7, 8))
    hypoxia_base_rate: float = 0.1
    rng_seed: int = 7
    noise_scale: float = 0.3
    drawdown_gain: float = 1.0
    n_depth_bins: int = 3
    land_fraction: float = 0.05
    memory_days: int = 7
    memory_decay: float = 0.8
    window: int = 7

    def __post_init__(self):
        object.__setattr__(self, "seasons", tuple(tuple(int(v) for v in s) for s in self.seasons))
        self.validate()

    def validate(self) -> None:
        if self.n_cells < 1:
            raise ConfigError("n_cells must be >= 1")
        if not self.seasons:
            raise ConfigError("at least one season is required")
        if not 0.0 < self.hypoxia_base_rate < 0.5:
            raise ConfigError("hypoxia_base_rate must be in (0, 0.5)")
        if self.noise_scale < 0 or self.drawdown_gain < 0:
            raise ConfigError("noise_scale and drawdown_gain must be >= 0")
        if not 0.0 <= self.land_fraction < 1.0:
            raise ConfigError("land_fraction must be in [0, 1)")
        if self.n_depth_bins < 1 or self.memory_days < 1 or not 0 < self.memory_decay <= 1:
            raise ConfigError("n_depth_bins and memory_days must be >= 1, memory_decay in (0, 1]")
        prev_end = None
        for i, (year, m0, m1) in enumerate(self.seasons):
            if not (1 <= m0 <= m1 <= 12):
                raise ConfigError(f"season {year}: bad month range {m0}..{m1}")
            n = self.season_lengths()[i]
            if n < self.window + 1:
                raise ConfigError(f"season {year}: {n} days < window + 1 ({self.window + 1})")
            start = dt.date(year, m0, 1)
            if start + dt.timedelta(days=n - 1) > dt.date(year, m1, calendar.monthrange(year, m1)[1]):
                raise ConfigError(f"season {year}: {n} days do not fit in months {m0}..{m1}")
            if prev_end is not None and start <= prev_end:
                raise ConfigError("seasons must be in chronological order and not overlap")
            prev_end = start + dt.timedelta(days=n - 1)

    def season_lengths(self) -> list[int]:
        """``n_days`` spread over the seasons, earlier seasons taking the remainder."""
        base, rem = divmod(self.n_days, len(self.seasons))
        return [base + (i < rem) for i in range(len(self.seasons))]

    def season_dates(self) -> list[list[dt.date]]:
        out = []
        for (year, m0, _), n in zip(self.seasons, self.season_lengths()):
            start = dt.date(year, m0, 1)
            out.append([start + dt.timedelta(days=i) for i in range(n)])
        return out


def _softplus(x):
    return np.logaddexp(0.0, x)


def _ar1(rng: np.random.Generator, n: int, phi: float, sigma: float) -> np.ndarray:
    e = rng.normal(0.0, sigma, n)
    out = np.empty(n)
    out[0] = e[0] / math.sqrt(1 - phi * phi)
    for i in range(1, n):
        out[i] = phi * out[i - 1] + e[i]
    return out


def _grid(n_cells: int, n_depth_bins: int, land_fraction: float):
    nx = max(1, math.ceil(math.sqrt(2 * n_cells)))
    ny = math.ceil(n_cells / nx)
    idx = np.arange(n_cells)
    ix, iy = idx % nx, idx // nx
    lon = -94.0 + 5.0 * (ix + 0.5) / nx
    lat = 28.5 + 1.5 * (iy + 0.5) / ny
    # the northern (coastal) rows are shallow
    offshore = 1.0 - (iy + 0.5) / ny
    depth_bin = np.minimum((offshore * n_depth_bins).astype(int), n_depth_bins - 1)
    n_land = int(round(land_fraction * n_cells))
    land = np.zeros(n_cells, dtype=bool)
    land[np.lexsort((idx, -lat))[:n_land]] = True
    return lon, lat, depth_bin, land


def _drawdown_history(r: np.ndarray, memory: int, decay: float) -> np.ndarray:
    """Exponentially weighted mean of r over the ``memory`` days before each day."""
    n = len(r)
    s = np.empty(n)
    w = decay ** np.arange(memory)
    for t in range(n):
        past = r[max(0, t - memory):t][::-1]
        s[t] = r[t] if len(past) == 0 else np.dot(w[:len(past)], past) / w[:len(past)].sum()
    return s


def generate_synthetic(config: SynthConfig) -> HindcastSet:
    config.validate()
    seasons = config.season_dates()
    streams = np.random.SeedSequence(config.rng_seed).spawn(config.n_cells + 1)
    regional = np.random.Generator(np.random.PCG64(streams[0]))
    # wind-driven mixing shared by all cells; high mixing weakens stratification
    mixing = [_ar1(regional, len(days), 0.8, 0.6) for days in seasons]

    lon, lat, depth_bin, land = _grid(config.n_cells, config.n_depth_bins, config.land_fraction)
    pea_scale = 20.0 * (1.0 + np.arange(config.n_depth_bins))

    cols = {c: [] for c in COLUMNS}
    latent = []
    for cell in range(config.n_cells):
        rng = np.random.Generator(np.random.PCG64(streams[cell + 1]))
        mu = rng.normal(0.0, 0.5, 3)
        coupling = rng.uniform(0.5, 1.0)
        for days, mix in zip(seasons, mixing):
            n = len(days)
            doy = np.array([d.timetuple().tm_yday for d in days], dtype=float)
            seasonal = 0.4 * np.sin(2 * np.pi * (doy - 130.0) / 365.0)
            a = mu[0] + seasonal - coupling * mix + _ar1(rng, n, 0.7, 0.4) + rng.normal(0, 0.5, n)
            b = mu[1] + _ar1(rng, n, 0.7, 0.4) + rng.normal(0, 0.5, n)
            c = mu[2] + 0.5 * seasonal + _ar1(rng, n, 0.7, 0.4) + rng.normal(0, 0.5, n)
            eta = rng.normal(0.0, 1.0, n)
            if land[cell]:
                pea = soc = dcp = np.zeros(n)
                z = np.full(n, np.nan)
            else:
                pea = pea_scale[depth_bin[cell]] * _softplus(a)
                soc = 10.0 * _softplus(b)
                dcp = 0.05 * _softplus(c)
                r = 1.0 * a + 0.8 * b + 0.6 * c
                s = _drawdown_history(r, config.memory_days, config.memory_decay)
                z = config.drawdown_gain * s + config.noise_scale * eta
            cols["date"].extend(days)
            cols["cell_id"].extend([cell] * n)
            cols["depth_bin"].extend([int(depth_bin[cell])] * n)
            cols["lon"].extend([float(lon[cell])] * n)
            cols["lat"].extend([float(lat[cell])] * n)
            cols["pea"].append(pea)
            cols["soc"].append(soc)
            cols["dcp_temp"].append(dcp)
            cols["land"].extend([bool(land[cell])] * n)
            latent.append(z)

    z = np.concatenate(latent)
    water = ~np.isnan(z)
    do = np.zeros_like(z)
    zw = z[water]
    spread = zw.std() if zw.size else 0.0
    if spread > 0:
        q = np.quantile(zw, 1.0 - config.hypoxia_base_rate)
        do[water] = HYPOXIA_THRESHOLD * np.exp(-0.5 * (zw - q) / spread)
    else:
        do[water] = 6.0
    frame = pd.DataFrame({
        "date": pd.to_datetime(cols["date"]),
        "cell_id": cols["cell_id"],
        "depth_bin": cols["depth_bin"],
        "lon": cols["lon"],
        "lat": cols["lat"],
        "pea": np.concatenate(cols["pea"]),
        "soc": np.concatenate(cols["soc"]),
        "dcp_temp": np.concatenate(cols["dcp_temp"]),
        "do_bottom": do,
        "land": cols["land"],
    })
    return HindcastSet(frame)


# --------------------------------------------------------------------------
# CSV

def write_hindcast(hs: HindcastSet, path) -> Path:
    """Write ``hs`` atomically (temp file then rename)."""
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    f = hs.frame
    dates = f["date"].dt.strftime("%Y-%m-%d").tolist()
    with open(tmp, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(COLUMNS)
        for i, row in enumerate(f.itertuples(index=False)):
            w.writerow([dates[i], row.cell_id, row.depth_bin, repr(row.lon), repr(row.lat),
                        repr(row.pea), repr(row.soc), repr(row.dcp_temp), repr(row.do_bottom),
                        int(row.land)])
    os.replace(tmp, path)
    return path


def load_hindcast(path) -> HindcastSet:
    path = Path(path)
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path}: empty file, header required") from None
        missing = [c for c in COLUMNS if c not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s): {', '.join(missing)}")
        pos = {c: header.index(c) for c in COLUMNS}
        cols = {c: [] for c in COLUMNS}
        seen: dict[tuple, int] = {}
        for line, row in enumerate(reader, start=2):
            if not row:
                continue
            if len(row) != len(header):
                raise ParseError(f"{path}: line {line}: expected {len(header)} fields, got {len(row)}")
            rec = _parse_row(row, pos, path, line)
            key = (rec[0], rec[1])
            if key in seen:
                raise IntegrityError(
                    f"{path}: line {line}: duplicate (date, cell_id) = ({rec[0]}, {rec[1]}), "
                    f"first seen on line {seen[key]}")
            seen[key] = line
            for c, v in zip(COLUMNS, rec):
                cols[c].append(v)
    frame = pd.DataFrame(cols)
    if frame.empty:
        frame = pd.DataFrame({c: pd.Series(dtype=object) for c in COLUMNS})
    return HindcastSet(frame)


def _parse_row(row: Sequence[str], pos: dict, path, line: int) -> tuple:
    def get(col):
        return row[pos[col]].strip()

    try:
        date = dt.date.fromisoformat(get("date"))
    except ValueError:
        raise ParseError(f"{path}: line {line}: bad date {get('date')!r}") from None
    out = [date]
    for col in ("cell_id", "depth_bin"):
        try:
            out.append(int(get(col)))
        except ValueError:
            raise ParseError(f"{path}: line {line}: non-integer {col} {get(col)!r}") from None
    for col in ("lon", "lat", "pea", "soc", "dcp_temp", "do_bottom"):
        try:
            v = float(get(col))
        except ValueError:
            raise ParseError(f"{path}: line {line}: non-numeric {col} {get(col)!r}") from None
        if not math.isfinite(v):
            raise ParseError(f"{path}: line {line}: non-finite {col}")
        out.append(v)
    land = get("land")
    if land not in ("0", "1"):
        raise ParseError(f"{path}: line {line}: land must be 0 or 1, got {land!r}")
    out.append(land == "1")
    return tuple(out)
