"""Grey wolf optimizer."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .space import SearchSpace
from .trace import Evaluator, SearchTrace


def gwo_step(X: np.ndarray, leaders: np.ndarray, a: float, rng: np.random.Generator) -> np.ndarray:
    """Move every wolf toward the alpha, beta and delta positions in ``leaders``.

    With ``a = 0`` each wolf lands on the mean of the three leader points.
    """
    n, d = X.shape
    moved = np.zeros_like(X)
    for lead in leaders:
        A = a * (2.0 * rng.random((n, d)) - 1.0)
        C = 2.0 * rng.random((n, d))
        moved += lead - A * np.abs(C * lead - X)
    return moved / len(leaders)


def gwo_optimize(space: SearchSpace, fitness_fn: Callable, pack_size: int = 20,
                 max_iters: int = 100, budget: Optional[int] = None, seed: int = 0, *,
                 eval_seed: Optional[int] = None, jobs: int = 1):
    """Leaders are the three best positions seen so far, so the incumbent never worsens."""
    if pack_size < 3:
        raise ValueError("GWO needs a pack of at least 3")
    if budget is not None and budget < pack_size:
        raise ValueError("budget must cover the initial pack")
    rng = np.random.default_rng(seed)
    ev = Evaluator(fitness_fn, space, budget, jobs=jobs, eval_seed=eval_seed)
    trace = SearchTrace("gwo", settings=dict(pack_size=pack_size, max_iters=max_iters,
                                             budget=budget, seed=seed, eval_seed=eval_seed))
    pack = ev.initial(space.sample(rng, pack_size))
    elite = sorted(pack, key=lambda c: c.fitness)[:3]

    for t in range(max_iters):
        if ev.remaining <= 0:
            break
        a = 2.0 * (1.0 - t / (max_iters - 1)) if max_iters > 1 else 0.0
        X = np.array([c.genome for c in pack])
        leaders = np.array([c.genome for c in elite])
        moved = ev.evaluate(gwo_step(X, leaders, a, rng))
        pack[:len(moved)] = moved
        elite = sorted(elite + moved, key=lambda c: c.fitness)[:3]
        trace.record(t, [c.fitness for c in pack], elite[0], ev.used, a=a)

    trace.candidates = ev.history
    return elite[0], trace
