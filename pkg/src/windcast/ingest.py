"""SCADA CSV ingestion, min-max normalization and supervised windowing."""

from __future__ import annotations

import csv
import logging
import math
from dataclasses import dataclass, field
from datetime import datetime, timezone
from enum import Enum
from pathlib import Path
from typing import Dict, Iterable, Optional

import numpy as np

from .errors import (DegenerateFeatureError, EmptyDataError, InsufficientDataError,
                     SchemaError)

log = logging.getLogger(__name__)

FEATURES = (
    "wind_speed",
    "wind_direction",
    "power",
    "ambient_temp",
    "nacelle_temp",
    "hydraulic_oil_temp",
    "hydraulic_oil_pressure",
)
COLUMNS = ("timestamp",) + FEATURES
DEFAULT_CADENCE = 600.0


@dataclass(frozen=True)
class ScadaRecord:
    timestamp: float
    wind_speed: float
    wind_direction: float
    power: float  # kW, may be negative while a stationary rotor spins up
    ambient_temp: float
    nacelle_temp: float
    hydraulic_oil_temp: float
    hydraulic_oil_pressure: float


@dataclass
class ScadaSeries:
    """Column-oriented single-turbine telemetry.

    Gaps in the timestamp grid are kept as-is; :attr:`gaps` lists them.
    ``skipped`` and ``resorted`` carry parse diagnostics.
    """

    timestamp: np.ndarray
    columns: Dict[str, np.ndarray]
    cadence: float = DEFAULT_CADENCE
    skipped: int = 0
    resorted: bool = False
    extra: Dict[str, np.ndarray] = field(default_factory=dict)

    def __post_init__(self):
        self.timestamp = np.asarray(self.timestamp, dtype=np.float64)
        self.columns = {k: np.asarray(self.columns[k], dtype=np.float64) for k in FEATURES}
        n = len(self.timestamp)
        for name, col in list(self.columns.items()) + list(self.extra.items()):
            if len(col) != n:
                raise ValueError(f"column {name!r} has {len(col)} rows, expected {n}")
        if n > 1 and np.any(np.diff(self.timestamp) <= 0):
            raise ValueError("timestamps must be strictly increasing")

    def __len__(self) -> int:
        return len(self.timestamp)

    def __getitem__(self, name: str) -> np.ndarray:
        if name == "timestamp":
            return self.timestamp
        if name in self.columns:
            return self.columns[name]
        return self.extra[name]

    @property
    def records(self):
        cols = [self.timestamp] + [self.columns[k] for k in FEATURES]
        return [ScadaRecord(*map(float, row)) for row in zip(*cols)]

    @classmethod
    def from_records(cls, records: Iterable[ScadaRecord], cadence: float = DEFAULT_CADENCE):
        records = list(records)
        return cls(
            np.array([r.timestamp for r in records]),
            {k: np.array([getattr(r, k) for r in records]) for k in FEATURES},
            cadence=cadence,
        )

    @property
    def breaks(self) -> np.ndarray:
        """Boolean per consecutive pair: True where the step differs from the cadence."""
        return ~np.isclose(np.diff(self.timestamp), self.cadence, rtol=0.0, atol=1e-6)

    @property
    def gaps(self) -> np.ndarray:
        """Indices ``k`` such that records ``k`` and ``k+1`` are not one cadence apart."""
        return np.flatnonzero(self.breaks)

    def take(self, indices) -> "ScadaSeries":
        idx = np.sort(np.asarray(indices, dtype=np.int64))
        return ScadaSeries(
            self.timestamp[idx],
            {k: v[idx] for k, v in self.columns.items()},
            cadence=self.cadence,
            extra={k: v[idx] for k, v in self.extra.items()},
        )


def _parse_timestamp(text: str) -> float:
    text = text.strip()
    try:
        return float(text)
    except ValueError:
        pass
    if text.endswith("Z"):
        text = text[:-1] + "+00:00"
    dt = datetime.fromisoformat(text)
    if dt.tzinfo is None:
        dt = dt.replace(tzinfo=timezone.utc)
    return dt.timestamp()


def parse_csv(path, schema: Optional[Dict[str, str]] = None,
              cadence: Optional[float] = None, required=None) -> ScadaSeries:
    """Read a SCADA export.

    ``schema`` maps canonical column names to the headers used in the file.
    Rows with unparsable or out-of-domain fields are skipped and counted in
    ``series.skipped``; rows out of time order are re-sorted and
    ``series.resorted`` is set.  ``required`` limits which feature columns
    must be present (default: all); absent optional columns read as NaN.
    """
    names = {c: (schema or {}).get(c, c) for c in COLUMNS}
    need = ("timestamp",) + tuple(FEATURES if required is None else
                                  [c for c in FEATURES if c in required])
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.DictReader(fh)
        header = reader.fieldnames or []
        missing = [names[c] for c in need if names[c] not in header]
        if missing:
            raise SchemaError(f"{path}: missing column(s) {', '.join(missing)}")
        present = [c for c in FEATURES if names[c] in header]
        rows, skipped = [], 0
        for line in reader:
            try:
                ts = _parse_timestamp(line[names["timestamp"]])
                vals = [float(line[names[c]]) if c in present else math.nan for c in FEATURES]
            except (TypeError, ValueError):
                skipped += 1
                continue
            if not all(math.isfinite(v) for c, v in zip(COLUMNS, [ts] + vals) if c in need):
                skipped += 1
                continue
            ws, wd = vals[0], vals[1]
            if ws < 0 or wd < 0 or wd > 360:
                skipped += 1
                continue
            vals[1] = wd % 360.0
            rows.append([ts] + vals)
    if not rows:
        raise EmptyDataError(f"{path}: no valid rows ({skipped} skipped)")

    arr = np.array(rows, dtype=np.float64)
    resorted = bool(np.any(np.diff(arr[:, 0]) < 0))
    order = np.argsort(arr[:, 0], kind="stable")
    arr = arr[order]
    dup = np.concatenate([[False], np.diff(arr[:, 0]) == 0])
    if dup.any():
        skipped += int(dup.sum())
        arr = arr[~dup]
    if skipped:
        log.warning("%s: skipped %d malformed or duplicate row(s)", path, skipped)
    if cadence is None:
        cadence = float(np.median(np.diff(arr[:, 0]))) if len(arr) > 1 else DEFAULT_CADENCE
    return ScadaSeries(
        arr[:, 0],
        {k: arr[:, j + 1] for j, k in enumerate(FEATURES)},
        cadence=cadence,
        skipped=skipped,
        resorted=resorted,
    )


def _fmt(v: float) -> str:
    return str(int(v)) if float(v).is_integer() and abs(v) < 2 ** 53 else repr(float(v))


def write_csv(series: ScadaSeries, path, extra_columns: Optional[Dict[str, np.ndarray]] = None):
    extra = dict(series.extra)
    extra.update(extra_columns or {})
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(list(COLUMNS) + list(extra))
        cols = [series.timestamp] + [series.columns[k] for k in FEATURES] + list(extra.values())
        for row in zip(*cols):
            w.writerow([_fmt(v) for v in row])


# -- normalization ----------------------------------------------------------

def normalize(values, z_min: float, z_max: float) -> np.ndarray:
    if not z_max > z_min:
        raise DegenerateFeatureError(f"z_max ({z_max}) must exceed z_min ({z_min})")
    return (np.asarray(values, dtype=np.float64) - z_min) / (z_max - z_min)


def inverse_normalize(values, z_min: float, z_max: float) -> np.ndarray:
    if not z_max > z_min:
        raise DegenerateFeatureError(f"z_max ({z_max}) must exceed z_min ({z_min})")
    return np.asarray(values, dtype=np.float64) * (z_max - z_min) + z_min


@dataclass(frozen=True)
class NormStats:
    z_min: Dict[str, float]
    z_max: Dict[str, float]

    def __post_init__(self):
        for k in self.z_min:
            if not self.z_max[k] > self.z_min[k]:
                raise DegenerateFeatureError(
                    f"feature {k!r} is constant ({self.z_min[k]}); cannot normalize")

    @classmethod
    def fit(cls, columns: Dict[str, np.ndarray]) -> "NormStats":
        return cls({k: float(np.min(v)) for k, v in columns.items()},
                   {k: float(np.max(v)) for k, v in columns.items()})

    def normalize(self, feature: str, values) -> np.ndarray:
        return normalize(values, self.z_min[feature], self.z_max[feature])

    def inverse(self, feature: str, values) -> np.ndarray:
        return inverse_normalize(values, self.z_min[feature], self.z_max[feature])

    def span(self, feature: str) -> float:
        return self.z_max[feature] - self.z_min[feature]

    def to_dict(self) -> dict:
        return {k: [self.z_min[k], self.z_max[k]] for k in self.z_min}

    @classmethod
    def from_dict(cls, d: dict) -> "NormStats":
        return cls({k: float(v[0]) for k, v in d.items()}, {k: float(v[1]) for k, v in d.items()})


# -- supervised windows -----------------------------------------------------

class ModelVariant(Enum):
    M1 = ("wind_speed",)
    M2 = ("wind_speed", "wind_direction")
    M3 = ("wind_speed", "power")
    M4 = ("wind_speed", "wind_direction", "power")

    @property
    def features(self):
        return self.value

    @property
    def input_dim(self) -> int:
        return len(self.value)

    @classmethod
    def parse(cls, v) -> "ModelVariant":
        if isinstance(v, cls):
            return v
        return cls[str(v).upper()]


@dataclass
class SupervisedSet:
    inputs: np.ndarray  # (n, lookback, input_dim)
    targets: np.ndarray  # (n,)
    variant: ModelVariant
    lookback: int
    horizon: int
    train_idx: np.ndarray
    val_idx: np.ndarray
    test_idx: np.ndarray
    norm_stats: NormStats
    target_time: Optional[np.ndarray] = None
    last_power: Optional[np.ndarray] = None  # normalized power at the final input step
    clamped: int = 0

    def __len__(self) -> int:
        return len(self.targets)

    def split(self, name: str):
        idx = {"train": self.train_idx, "validation": self.val_idx, "val": self.val_idx,
               "test": self.test_idx}[name]
        return self.inputs[idx], self.targets[idx]


def valid_starts(series: ScadaSeries, lookback: int, horizon: int) -> np.ndarray:
    """Start indices ``i`` whose records ``i .. i+L+H-1`` lie on one unbroken cadence run."""
    span = lookback + horizon  # records touched by one sample
    n = len(series)
    if n < span:
        return np.empty(0, dtype=np.int64)
    brk = np.concatenate([[0], np.cumsum(series.breaks.astype(np.int64))])
    starts = np.arange(n - span + 1)
    return starts[brk[starts + span - 1] - brk[starts] == 0]


def window_features(series: ScadaSeries, variant: ModelVariant, lookback: int, horizon: int,
                    stats: NormStats, starts: Optional[np.ndarray] = None):
    """Normalized ``(X, y, target_time, last_power, clamped)`` for the given window starts.

    Values outside the stats' range are clamped to [0, 1] and counted.
    """
    if starts is None:
        starts = valid_starts(series, lookback, horizon)
    feats = np.column_stack([stats.normalize(f, series[f]) for f in variant.features])
    power = stats.normalize("power", series["power"])
    windows = np.lib.stride_tricks.sliding_window_view(feats, lookback, axis=0)
    X = windows[starts].transpose(0, 2, 1)
    target_pos = starts + lookback + horizon - 1
    y = power[target_pos]
    last = np.clip(power[starts + lookback - 1], 0.0, 1.0)
    clamped = int(np.sum((X < 0) | (X > 1)) + np.sum((y < 0) | (y > 1)))
    return (np.clip(X, 0.0, 1.0), np.clip(y, 0.0, 1.0), series.timestamp[target_pos], last,
            clamped)


def split_indices(n: int, seed: int = 0, mode: str = "random"):
    """Sorted ``(train, validation, test)`` sample indices: floor(n/10) each for
    validation and test, the rest for training."""
    n_val = n_test = n // 10
    n_train = n - n_val - n_test
    if mode == "random":
        order = np.random.default_rng(seed).permutation(n)
    elif mode == "chronological":
        order = np.arange(n)
    else:
        raise ValueError(f"unknown split mode {mode!r}")
    return (np.sort(order[:n_train]), np.sort(order[n_train:n_train + n_val]),
            np.sort(order[n_train + n_val:]))


def build_supervised(series: ScadaSeries, variant, lookback: int = 6, horizon: int = 1,
                     seed: int = 0, split: str = "random") -> SupervisedSet:
    """Window the series and split samples 80/10/10.

    Normalization ranges come from the records touched by training samples
    only.  ``split`` is ``"random"`` (seeded permutation) or ``"chronological"``.
    """
    variant = ModelVariant.parse(variant)
    if lookback < 1 or horizon < 1:
        raise ValueError("lookback and horizon must be >= 1")
    starts = valid_starts(series, lookback, horizon)
    n = len(starts)
    if n < 11:
        raise InsufficientDataError(
            f"{n} usable windows; need at least {lookback + horizon + 10} contiguous records")

    train_idx, val_idx, test_idx = split_indices(n, seed, split)

    # records used by training windows: inputs [s, s+L) and the target row
    cover = np.zeros(len(series) + 1, dtype=np.int64)
    tr = starts[train_idx]
    np.add.at(cover, tr, 1)
    np.add.at(cover, tr + lookback, -1)
    used = np.cumsum(cover[:-1]) > 0
    used[tr + lookback + horizon - 1] = True
    needed = dict.fromkeys(variant.features + ("power",))
    stats = NormStats.fit({f: series[f][used] for f in needed})

    X, y, t, last, clamped = window_features(series, variant, lookback, horizon, stats, starts)
    if clamped:
        log.info("clamped %d out-of-range value(s) outside the training range", clamped)
    return SupervisedSet(X, y, variant, lookback, horizon, train_idx, val_idx, test_idx,
                         stats, target_time=t, last_power=last, clamped=clamped)


# -- exploratory statistics -------------------------------------------------

@dataclass
class CorrelationResult:
    names: tuple
    matrix: np.ndarray  # NaN marks undefined entries
    undefined: list

    def to_dict(self) -> dict:
        m = [[None if not np.isfinite(v) else float(v) for v in row] for row in self.matrix]
        return {"features": list(self.names), "matrix": m, "undefined": list(self.undefined)}


def correlation_matrix(series: ScadaSeries, features=FEATURES) -> CorrelationResult:
    if len(series) < 2:
        raise InsufficientDataError("correlation needs at least two records")
    data = np.column_stack([series[f] for f in features])
    std = data.std(axis=0)
    ok = std > 0
    k = len(features)
    mat = np.full((k, k), np.nan)
    if ok.any():
        z = (data[:, ok] - data[:, ok].mean(axis=0)) / std[ok]
        sub = np.clip(z.T @ z / len(z), -1.0, 1.0)
        sub = (sub + sub.T) / 2.0
        np.fill_diagonal(sub, 1.0)
        mat[np.ix_(ok, ok)] = sub
    undefined = [f for f, good in zip(features, ok) if not good]
    if undefined:
        log.warning("zero-variance feature(s) excluded from correlation: %s", undefined)
    return CorrelationResult(tuple(features), mat, undefined)
