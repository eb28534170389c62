"""Canonical DE/rand/1/bin with fixed control parameters."""

from __future__ import annotations

from typing import Callable, Optional

import numpy as np

from .sade import binomial_crossover
from .space import SearchSpace
from .trace import Evaluator, SearchTrace, best_of


def de_optimize(space: SearchSpace, fitness_fn: Callable, pop_size: int = 20, F: float = 0.5,
                CR: float = 0.9, max_gens: int = 100, budget: Optional[int] = None,
                seed: int = 0, *, init_population=None, eval_seed: Optional[int] = None,
                jobs: int = 1):
    if pop_size < 4:
        raise ValueError("DE/rand/1 needs a population of at least 4")
    if budget is not None and budget < pop_size:
        raise ValueError("budget must cover the initial population")
    rng = np.random.default_rng(seed)
    ev = Evaluator(fitness_fn, space, budget, jobs=jobs, eval_seed=eval_seed)
    trace = SearchTrace("de", settings=dict(pop_size=pop_size, F=F, CR=CR, max_gens=max_gens,
                                            budget=budget, seed=seed, eval_seed=eval_seed))
    init = space.sample(rng, pop_size) if init_population is None else np.asarray(
        init_population, dtype=np.float64)
    pop = ev.initial(init)
    best = best_of(pop)

    for g in range(max_gens):
        if ev.remaining <= 0:
            break
        X = np.array([c.genome for c in pop])
        trials = np.empty_like(X)
        for i in range(pop_size):
            others = np.delete(np.arange(pop_size), i)
            r1, r2, r3 = rng.choice(others, size=3, replace=False)
            trials[i] = binomial_crossover(rng, X[i], X[r1] + F * (X[r2] - X[r3]), CR)
        for i, child in enumerate(ev.evaluate(trials)):
            if child.fitness < pop[i].fitness:
                pop[i] = child
        best = min(best, best_of(pop), key=lambda c: c.fitness)
        trace.record(g, [c.fitness for c in pop], best, ev.used)

    trace.candidates = ev.history
    return best, trace
