"""Friedman rank test for comparing several models over shared configurations."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Sequence

import numpy as np
from scipy.stats import chi2, rankdata

log = logging.getLogger(__name__)


@dataclass
class FriedmanResult:
    mean_ranks: np.ndarray
    statistic: float
    p_value: float
    n_rows: int
    excluded_rows: List[int]
    models: Sequence[str] = ()

    def to_dict(self) -> dict:
        names = list(self.models) or [str(k) for k in range(len(self.mean_ranks))]
        return {
            "mean_ranks": {m: float(r) for m, r in zip(names, self.mean_ranks)},
            "chi2": float(self.statistic),
            "p_value": float(self.p_value),
            "n_rows": self.n_rows,
            "excluded_rows": list(self.excluded_rows),
        }


def friedman_ranks(scores, models: Sequence[str] = ()) -> FriedmanResult:
    """Rank models within each row (lowest score gets rank 1, ties averaged).

    Rows containing NaN are dropped and listed in ``excluded_rows``.
    """
    S = np.asarray(scores, dtype=np.float64)
    if S.ndim != 2 or S.shape[1] < 2:
        raise ValueError("need a 2-D matrix with at least two model columns")
    bad = np.isnan(S).any(axis=1)
    excluded = np.flatnonzero(bad).tolist()
    if excluded:
        log.warning("Friedman test: excluding rows with NaN scores: %s", excluded)
    S = S[~bad]
    n, k = S.shape
    if n < 2:
        raise ValueError("need at least two complete configuration rows")
    ranks = np.vstack([rankdata(row, method="average") for row in S])
    R = ranks.mean(axis=0)
    stat = 12.0 * n / (k * (k + 1)) * (np.sum(R ** 2) - k * (k + 1) ** 2 / 4.0)
    stat = max(float(stat), 0.0)
    return FriedmanResult(R, stat, float(chi2.sf(stat, k - 1)), n, excluded, tuple(models))
