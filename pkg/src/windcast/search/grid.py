"""Exhaustive grid search and uniform random search baselines."""

from __future__ import annotations

import itertools
import math
from typing import Callable, Optional, Sequence

import numpy as np

from .space import SearchSpace
from .trace import Candidate, Evaluator, SearchTrace, run_calls

DEFAULT_BS_GRID = (128, 256, 512, 1024, 2048)
DEFAULT_LR_GRID = (1e-5, 1e-4, 1e-3, 1e-2, 1e-1)


def grid_search(bs_grid: Sequence[int], lr_grid: Sequence[float], fitness_fn: Callable,
                fixed: Optional[dict] = None, *, eval_seed: Optional[int] = None,
                jobs: int = 1):
    """Evaluate every (batch size, learning rate) pair.

    ``fitness_fn`` receives ``fixed`` merged with the pair.  Returns
    ``(ranked, trace)`` where ``ranked`` lists ``(params, fitness)`` ascending;
    ties keep grid order.
    """
    if not bs_grid or not lr_grid:
        raise ValueError("grids must be non-empty")
    fixed = dict(fixed or {})
    combos = [dict(fixed, batch_size=int(b), learning_rate=float(lr))
              for b, lr in itertools.product(bs_grid, lr_grid)]
    trace = SearchTrace("grid", settings=dict(bs_grid=list(bs_grid), lr_grid=list(lr_grid),
                                              fixed=fixed, eval_seed=eval_seed))
    best = None
    for k, (params, (fit, info)) in enumerate(zip(combos, run_calls(fitness_fn, combos, jobs))):
        c = Candidate(np.array([params["batch_size"], params["learning_rate"]], dtype=float),
                      params, fit, not np.isfinite(fit), eval_seed, info)
        trace.candidates.append(c)
        best = c if best is None or c.fitness < best.fitness else best
        trace.record(k, [c.fitness], best, k + 1)
    ranked = sorted(((c.params, c.fitness) for c in trace.candidates), key=lambda t: t[1])
    return ranked, trace


def grid_levels(budget: int, max_bs: int = 5):
    """Batch-size and log-spaced learning-rate levels whose product fits ``budget``.

    40 gives 5 x 8, 25 gives 5 x 5, 8 gives 2 x 4.
    """
    if budget < 1:
        raise ValueError("budget must be positive")
    n_bs = max(1, min(max_bs, math.isqrt(budget)))
    n_lr = budget // n_bs
    bs = np.round(np.geomspace(128, 2048, n_bs)).astype(int).tolist() if n_bs > 1 else [512]
    lr = np.geomspace(1e-5, 1e-1, n_lr).tolist() if n_lr > 1 else [1e-3]
    return bs, lr


def random_search(space: SearchSpace, fitness_fn: Callable, budget: int, seed: int = 0, *,
                  eval_seed: Optional[int] = None, jobs: int = 1):
    rng = np.random.default_rng(seed)
    ev = Evaluator(fitness_fn, space, budget, jobs=jobs, eval_seed=eval_seed)
    cands = ev.evaluate(space.sample(rng, budget))
    trace = SearchTrace("random", settings=dict(budget=budget, seed=seed, eval_seed=eval_seed))
    best = None
    for k, c in enumerate(cands):
        best = c if best is None or c.fitness < best.fitness else best
        trace.record(k, [c.fitness], best, k + 1)
    trace.candidates = cands
    return best, trace
