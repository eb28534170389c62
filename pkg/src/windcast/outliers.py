"""Outlier removal: K-means banding of (wind speed, power), then a small
autoencoder per band whose reconstruction error flags anomalous rows."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import List, Optional

import numpy as np
from scipy.special import expit

from .errors import InfeasibleKError, WindcastError
from .ingest import NormStats, ScadaSeries
from .nn import Optimizer

MIN_CLUSTER_ROWS = 10
# errors are in normalized units; differences below this are rounding, not signal
TIE_TOL = 1e-9
MAX_REMOVED_FRACTION = 0.5


class DegenerateFilterError(WindcastError):
    """Per-band thresholding flagged more than half of a band."""


@dataclass
class ClusterModel:
    k: int
    centroids: np.ndarray
    assignments: np.ndarray
    inertia: float
    inertia_history: List[float] = field(default_factory=list)
    n_iter: int = 0

    def predict(self, points) -> np.ndarray:
        return _nearest(np.asarray(points, dtype=np.float64), self.centroids)[0]


def _sq_dists(points, centers):
    return ((points[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)


def _nearest(points, centers):
    d = _sq_dists(points, centers)
    a = np.argmin(d, axis=1)
    return a, d[np.arange(len(points)), a]


def _kmeans_pp(points, k, rng):
    n = len(points)
    centers = [points[rng.integers(n)]]
    d2 = ((points - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(n)
        else:
            idx = rng.choice(n, p=d2 / total)
        centers.append(points[idx])
        d2 = np.minimum(d2, ((points - points[idx]) ** 2).sum(axis=1))
    return np.array(centers)


def kmeans_fit(points, k: int = 10, seed: int = 0, max_iters: int = 300) -> ClusterModel:
    """Lloyd's algorithm with k-means++ seeding.

    Stops when assignments no longer change or after ``max_iters`` updates.
    A cluster that empties is re-seeded at the point farthest from its centroid.
    """
    points = np.asarray(points, dtype=np.float64)
    if points.ndim != 2:
        raise ValueError("points must be a 2-D array")
    if k < 1:
        raise InfeasibleKError("k must be at least 1")
    if len(np.unique(points, axis=0)) < k:
        raise InfeasibleKError(f"fewer than {k} distinct points")
    rng = np.random.default_rng(seed)
    centers = _kmeans_pp(points, k, rng)
    assign, d2 = _nearest(points, centers)
    history = [float(d2.sum())]
    it = 0
    for it in range(1, max_iters + 1):
        new = centers.copy()
        counts = np.bincount(assign, minlength=k)
        for j in range(k):
            if counts[j]:
                new[j] = points[assign == j].mean(axis=0)
        empty = np.flatnonzero(counts == 0)
        if len(empty):
            far = np.argsort(-d2, kind="stable")
            for j, idx in zip(empty, far):
                new[j] = points[idx]
        new_assign, d2 = _nearest(points, new)
        centers = new
        history.append(float(d2.sum()))
        if np.array_equal(new_assign, assign):
            break
        assign = new_assign
    return ClusterModel(k, centers, assign, float(d2.sum()), history, it)


@dataclass
class AutoencoderModel:
    """Input -> sigmoid bottleneck -> sigmoid reconstruction.

    Rows are affinely rescaled (``offset``, ``scale``) before encoding and
    mapped back after decoding, so reconstruction errors stay in the caller's
    units while the sigmoids see a well-spread input.
    """

    W1: np.ndarray  # (hidden, input)
    b1: np.ndarray
    W2: np.ndarray  # (input, hidden)
    b2: np.ndarray
    offset: np.ndarray
    scale: np.ndarray
    loss_history: List[float] = field(default_factory=list)

    @property
    def input_dim(self) -> int:
        return self.W1.shape[1]

    @property
    def hidden_dim(self) -> int:
        return self.W1.shape[0]

    def _scaled(self, rows):
        return (np.asarray(rows, dtype=np.float64) - self.offset) / self.scale + 0.5

    def encode(self, rows):
        return expit(self._scaled(rows) @ self.W1.T + self.b1)

    def reconstruct(self, rows) -> np.ndarray:
        out = expit(self.encode(rows) @ self.W2.T + self.b2)
        return (out - 0.5) * self.scale + self.offset

    def rmse(self, rows) -> np.ndarray:
        """Per-row reconstruction RMSE in the input's units."""
        rows = np.asarray(rows, dtype=np.float64)
        return np.sqrt(np.mean((self.reconstruct(rows) - rows) ** 2, axis=1))


@dataclass(frozen=True)
class AutoencoderConfig:
    hidden_dim: int = 1
    epochs: int = 500
    lr: float = 0.05


def autoencoder_fit(rows, hidden_dim: int = 1, epochs: int = 500, lr: float = 0.05,
                    seed: int = 0) -> AutoencoderModel:
    """Full-batch training on mean squared reconstruction error (Adam updates).

    Returns the parameters with the lowest recorded loss, so the final loss
    never exceeds the initial one.
    """
    X = np.asarray(rows, dtype=np.float64)
    if len(X) < MIN_CLUSTER_ROWS:
        raise ValueError(f"need at least {MIN_CLUSTER_ROWS} rows, got {len(X)}")
    if hidden_dim < 1:
        raise ValueError("hidden_dim must be >= 1")
    rng = np.random.default_rng(seed)
    d = X.shape[1]
    offset = X.mean(axis=0)
    spread = X.std(axis=0)
    # 4 std devs map onto the unit interval; constant columns keep unit scale
    scale = np.where(spread > 0, 4.0 * spread, 1.0)
    Z = (X - offset) / scale + 0.5

    lim = np.sqrt(6.0 / (d + hidden_dim))
    p = {
        "W1": rng.uniform(-lim, lim, (hidden_dim, d)),
        "b1": np.zeros(hidden_dim),
        "W2": rng.uniform(-lim, lim, (d, hidden_dim)),
        "b2": np.zeros(d),
    }
    opt = Optimizer("adam", lr)
    best, best_loss, history = None, np.inf, []
    for epoch in range(epochs + 1):
        h = expit(Z @ p["W1"].T + p["b1"])
        out = expit(h @ p["W2"].T + p["b2"])
        err = out - Z
        loss = float(np.mean(err ** 2))
        history.append(loss)
        if loss < best_loss:
            best_loss, best = loss, {k: v.copy() for k, v in p.items()}
        if epoch == epochs:
            break
        dz2 = 2.0 * err / err.size * out * (1.0 - out)
        dz1 = (dz2 @ p["W2"]) * h * (1.0 - h)
        grads = {"W2": dz2.T @ h, "b2": dz2.sum(0), "W1": dz1.T @ Z, "b1": dz1.sum(0)}
        opt.step(p, grads)
    return AutoencoderModel(best["W1"], best["b1"], best["W2"], best["b2"], offset, scale,
                            history)


@dataclass
class FilterReport:
    clusters: List[dict]
    kept: np.ndarray
    removed: np.ndarray
    threshold_mode: str
    n_input: int

    def to_dict(self) -> dict:
        return {
            "threshold_mode": self.threshold_mode,
            "n_input": self.n_input,
            "n_kept": int(len(self.kept)),
            "n_removed": int(len(self.removed)),
            "clusters": self.clusters,
            "removed": [int(i) for i in self.removed],
        }


def filter_outliers(series: ScadaSeries, k: int = 10, seed: int = 0,
                    ae: Optional[AutoencoderConfig] = None, threshold: str = "global",
                    features=("wind_speed", "power")):
    """Drop rows whose reconstruction RMSE strictly exceeds the mean RMSE.

    ``threshold="global"`` compares every row against the mean over all
    filtered rows; ``"cluster"`` uses each band's own mean and fails with
    :class:`DegenerateFilterError` if a band would lose more than half its rows.
    Returns ``(kept_series, report)``; the kept series carries ``cluster_id``.
    """
    if len(series) == 0:
        raise ValueError("empty series")
    if threshold not in ("cluster", "global"):
        raise ValueError(f"threshold must be 'cluster' or 'global', got {threshold!r}")
    ae = ae or AutoencoderConfig()
    stats = NormStats.fit({f: series[f] for f in features})
    pts = np.column_stack([stats.normalize(f, series[f]) for f in features])
    km = kmeans_fit(pts, k, seed)

    errors = np.zeros(len(pts))
    trained = np.zeros(len(pts), dtype=bool)
    info = []
    for c in range(k):
        idx = np.flatnonzero(km.assignments == c)
        entry = {"cluster": c, "count": int(len(idx))}
        if len(idx) < MIN_CLUSTER_ROWS:
            entry.update(filtered=False, note="too few rows; passed through")
        else:
            model = autoencoder_fit(pts[idx], ae.hidden_dim, ae.epochs, ae.lr, seed * 1000 + c)
            errors[idx] = model.rmse(pts[idx])
            trained[idx] = True
            entry.update(filtered=True, mean_rmse=float(errors[idx].mean()))
        info.append(entry)

    global_thr = float(errors[trained].mean()) if trained.any() else np.inf
    remove = np.zeros(len(pts), dtype=bool)
    for entry in info:
        if not entry["filtered"]:
            entry.update(threshold=None, removed=0)
            continue
        idx = np.flatnonzero(km.assignments == entry["cluster"])
        thr = entry["mean_rmse"] if threshold == "cluster" else global_thr
        out = errors[idx] > thr + TIE_TOL
        remove[idx] = out
        frac = float(out.mean())
        entry.update(threshold=float(thr), removed=int(out.sum()), removed_fraction=frac)
        if frac > MAX_REMOVED_FRACTION:
            if threshold == "cluster":
                raise DegenerateFilterError(
                    f"cluster {entry['cluster']}: {int(out.sum())} of {len(idx)} rows flagged")
            entry["majority_removed"] = True

    kept = np.flatnonzero(~remove)
    removed = np.flatnonzero(remove)
    report = FilterReport(info, kept, removed, threshold, len(series))
    out_series = series.take(kept)
    out_series.extra["cluster_id"] = km.assignments[kept].astype(np.float64)
    return out_series, report
