"""Self-adaptive differential evolution.

Two mutation strategies, DE/rand/1 and DE/current-to-best/1, compete; the
probability of picking the first is re-estimated from success counts after
every learning period.  Crossover rates are drawn around a mean ``CRm`` that
tracks recently successful values.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable, List, Optional

import numpy as np

from .local import LOCAL_METHODS, bfgs_search, coordinate_search
from .space import SearchSpace
from .trace import Candidate, Evaluator, SearchTrace, best_of

log = logging.getLogger(__name__)

P1_FLOOR = 0.05
F_MEAN, F_STD = 0.5, 0.3
CR_STD = 0.1


def sample_f(rng: np.random.Generator, n: int) -> np.ndarray:
    """Draw ``n`` scale factors from Normal(0.5, 0.3), redrawing any outside (0, 2]."""
    out = rng.normal(F_MEAN, F_STD, n)
    bad = (out <= 0.0) | (out > 2.0)
    while bad.any():
        out[bad] = rng.normal(F_MEAN, F_STD, int(bad.sum()))
        bad = (out <= 0.0) | (out > 2.0)
    return out


def sample_cr(rng: np.random.Generator, crm: float, n: int) -> np.ndarray:
    return np.clip(rng.normal(crm, CR_STD, n), 0.0, 1.0)


def update_p1(ns1: int, nf1: int, ns2: int, nf2: int, p1: float) -> float:
    """Success-rate ratio for strategy 1, floored into [0.05, 0.95].

    A 0/0 ratio (no successes at all) leaves ``p1`` unchanged.
    """
    num = ns1 * (ns2 + nf2)
    den = ns2 * (ns1 + nf1) + num
    if den == 0:
        return p1
    return float(min(max(num / den, P1_FLOOR), 1.0 - P1_FLOOR))


def _distinct(rng, n, exclude, k):
    pool = np.delete(np.arange(n), exclude)
    return rng.choice(pool, size=k, replace=False)


def binomial_crossover(rng, target, mutant, cr):
    d = len(target)
    take = rng.random(d) < cr
    take[rng.integers(d)] = True
    return np.where(take, mutant, target)


@dataclass
class SaDeState:
    p1: float = 0.5
    ns1: int = 0
    nf1: int = 0
    ns2: int = 0
    nf2: int = 0
    crm: float = 0.5
    cr_memory: List[float] = field(default_factory=list)
    generation: int = 0


def sade_optimize(space: SearchSpace, fitness_fn: Callable, pop_size: int = 20,
                  max_gens: int = 100, budget: Optional[int] = None, seed: int = 0, *,
                  learning_period: int = 50, cr_hold: int = 5, crm_period: int = 25,
                  local_search: Optional[str] = None, local_period: int = 20,
                  local_step: float = 0.05, local_evals: Optional[int] = None,
                  init_population=None, eval_seed: Optional[int] = None, jobs: int = 1):
    """Minimise ``fitness_fn`` over ``space``; returns ``(best Candidate, SearchTrace)``.

    Generations are numbered from 0.  CR values are redrawn per individual
    every ``cr_hold`` generations; CRm is refreshed at the start of every
    generation ``g > 0`` divisible by ``crm_period``.  ``local_search`` may be
    ``"coordinate"`` or ``"bfgs"`` and runs on the incumbent every
    ``local_period`` generations.
    """
    if pop_size < 5:
        raise ValueError("SaDE needs a population of at least 5")
    if budget is not None and budget < pop_size:
        raise ValueError("budget must cover the initial population")
    if local_search is not None and local_search not in LOCAL_METHODS:
        raise ValueError(f"local_search must be one of {LOCAL_METHODS} or None")
    rng = np.random.default_rng(seed)
    ev = Evaluator(fitness_fn, space, budget, jobs=jobs, eval_seed=eval_seed)
    trace = SearchTrace("sade", settings=dict(
        pop_size=pop_size, max_gens=max_gens, budget=budget, seed=seed,
        learning_period=learning_period, cr_hold=cr_hold, crm_period=crm_period,
        local_search=local_search, local_period=local_period, eval_seed=eval_seed))

    init = space.sample(rng, pop_size) if init_population is None else np.asarray(
        init_population, dtype=np.float64)
    pop = ev.initial(init)
    best = best_of(pop)
    st = SaDeState()
    cr = np.empty(pop_size)
    step = local_step * (space.upper - space.lower)
    d = len(space)

    for g in range(max_gens):
        if ev.remaining <= 0:
            break
        st.generation = g
        refreshed = False
        if g > 0 and g % crm_period == 0:
            if st.cr_memory:
                st.crm = float(np.mean(st.cr_memory))
            st.cr_memory.clear()
            refreshed = True
        if g % cr_hold == 0:
            cr = sample_cr(rng, st.crm, pop_size)

        F = sample_f(rng, pop_size)
        use_rand = rng.random(pop_size) < st.p1
        X = np.array([c.genome for c in pop])
        xb = best.genome
        trials = np.empty_like(X)
        for i in range(pop_size):
            if use_rand[i]:
                r1, r2, r3 = _distinct(rng, pop_size, i, 3)
                v = X[r1] + F[i] * (X[r2] - X[r3])
            else:
                r1, r2 = _distinct(rng, pop_size, i, 2)
                v = X[i] + F[i] * (xb - X[i]) + F[i] * (X[r1] - X[r2])
            trials[i] = binomial_crossover(rng, X[i], v, cr[i])

        offspring = ev.evaluate(trials)
        for i, child in enumerate(offspring):
            won = child.fitness < pop[i].fitness
            if won:
                pop[i] = child
                st.cr_memory.append(float(cr[i]))
            if use_rand[i]:
                st.ns1 += won
                st.nf1 += not won
            else:
                st.ns2 += won
                st.nf2 += not won
        best = min(best, best_of(pop), key=lambda c: c.fitness)

        if (g + 1) % learning_period == 0:
            st.p1 = update_p1(st.ns1, st.nf1, st.ns2, st.nf2, st.p1)
            st.ns1 = st.nf1 = st.ns2 = st.nf2 = 0

        if local_search and (g + 1) % local_period == 0 and ev.remaining > 0:
            if local_search == "bfgs":
                refined = bfgs_search(ev, best, local_evals or 5 * (d + 1))
            else:
                refined = coordinate_search(ev, best, step)
            if refined.fitness < best.fitness:
                k = int(np.argmin([c.fitness for c in pop]))
                pop[k] = refined
                best = refined
            else:
                step = step * 0.5

        trace.record(g, [c.fitness for c in pop], best, ev.used, p1=st.p1, crm=st.crm,
                     crm_refreshed=refreshed)

    trace.candidates = ev.history
    return best, trace
