"""Local refinement of an incumbent: coordinate probing or finite-difference L-BFGS-B."""

from __future__ import annotations

import numpy as np
from scipy.optimize import minimize

from .trace import Candidate, Evaluator

LOCAL_METHODS = ("coordinate", "bfgs")


def coordinate_search(ev: Evaluator, best: Candidate, step: np.ndarray) -> Candidate:
    """Probe ``x +/- step`` per continuous dimension, then try the parabola vertex.

    Three evaluations per dimension; stops early when the budget runs out.
    """
    mask = ev.space.continuous_mask
    for j in np.flatnonzero(mask):
        if ev.remaining < 3:
            break
        x, f0, d = best.genome, best.fitness, step[j]
        plus, minus = x.copy(), x.copy()
        plus[j] += d
        minus[j] -= d
        cp, cm = ev.evaluate([plus, minus])
        fp, fm = cp.fitness, cm.fitness
        curv = fp - 2.0 * f0 + fm
        if np.isfinite(curv) and curv > 0:
            t = float(np.clip(0.5 * d * (fm - fp) / curv, -2.0 * d, 2.0 * d))
        else:
            t = 2.0 * d if fp < fm else -2.0 * d
        vertex = x.copy()
        vertex[j] += t
        (cv,) = ev.evaluate([vertex])
        for c in (cp, cm, cv):
            if c.fitness < best.fitness:
                best = c
    return best


class _Exhausted(Exception):
    pass


def bfgs_search(ev: Evaluator, best: Candidate, max_evals: int) -> Candidate:
    """Quasi-Newton refinement with finite-difference gradients (continuous spaces only)."""
    if not ev.space.continuous_mask.all():
        raise ValueError("bfgs local search needs an all-continuous space")
    found = [best]
    limit = min(max_evals, ev.remaining)
    start = ev.used

    def f(x):
        if ev.used - start >= limit:
            raise _Exhausted
        (c,) = ev.evaluate([x])
        if c.fitness < found[0].fitness:
            found[0] = c
        return c.fitness if np.isfinite(c.fitness) else 1e300

    try:
        minimize(f, best.genome, method="L-BFGS-B",
                 bounds=list(zip(ev.space.lower, ev.space.upper)),
                 options={"maxfun": int(limit), "eps": 1e-7})
    except _Exhausted:
        pass
    return found[0]
