"""Budgeted fitness evaluation and per-generation search traces."""

from __future__ import annotations

import csv
import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path
from typing import Callable, List, Optional

import numpy as np

from ..errors import InitializationError
from .space import SearchSpace

log = logging.getLogger(__name__)

TRACE_COLUMNS = ("generation", "best", "mean", "p1", "crm", "evals")


@dataclass
class Candidate:
    genome: np.ndarray
    params: dict
    fitness: float = math.inf
    failed: bool = False
    eval_seed: Optional[int] = None
    info: dict = field(default_factory=dict)

    def to_dict(self) -> dict:
        return {
            "genome": [float(g) for g in self.genome],
            "params": self.params,
            "fitness": _num(self.fitness),
            "failed": self.failed,
            "eval_seed": self.eval_seed,
            "info": {k: _num(v) if isinstance(v, float) else v for k, v in self.info.items()},
        }


def _num(v):
    return float(v) if v is not None and math.isfinite(v) else None


def _call(fn, params):
    """Run one fitness evaluation; failures and non-finite values become +inf."""
    try:
        out = fn(params)
    except Exception as exc:  # a broken candidate must not end the search
        return math.inf, {"error": f"{type(exc).__name__}: {exc}"}
    info = {}
    if isinstance(out, tuple):
        out, info = out
    out = float(out)
    if not math.isfinite(out):
        return math.inf, dict(info, error="non-finite fitness")
    return out, info


def run_calls(fn, params: list, jobs: int = 1) -> list:
    """``[(fitness, info), ...]`` in input order, optionally on worker processes."""
    if jobs > 1 and len(params) > 1:
        with ProcessPoolExecutor(max_workers=min(jobs, len(params))) as pool:
            return list(pool.map(_call, [fn] * len(params), params))
    return [_call(fn, p) for p in params]


class Evaluator:
    """Counts every fitness call and refuses to exceed ``budget``.

    With ``jobs > 1`` a batch is spread over worker processes; results come
    back in submission order, so runs stay deterministic.
    """

    def __init__(self, fn: Callable, space: SearchSpace, budget: Optional[int] = None,
                 jobs: int = 1, eval_seed: Optional[int] = None):
        self.fn = fn
        self.space = space
        self.budget = math.inf if budget is None else int(budget)
        self.jobs = max(1, int(jobs))
        self.eval_seed = eval_seed
        self.used = 0
        self.history: List[Candidate] = []

    @property
    def remaining(self) -> float:
        return self.budget - self.used

    def evaluate(self, genomes) -> List[Candidate]:
        """Evaluate as many of ``genomes`` as the budget allows, in order."""
        genomes = np.atleast_2d(np.asarray(genomes, dtype=np.float64))
        n = int(min(len(genomes), max(self.remaining, 0)))
        cands = []
        for g in genomes[:n]:
            g = self.space.reflect(g)
            cands.append(Candidate(g, self.space.decode(g), eval_seed=self.eval_seed))
        if not cands:
            return []
        results = run_calls(self.fn, [c.params for c in cands], self.jobs)
        for c, (fit, info) in zip(cands, results):
            c.fitness, c.info = fit, info
            c.failed = not math.isfinite(fit)
            if "error" in info:
                log.warning("fitness evaluation failed for %s: %s", c.params, info["error"])
        self.used += len(cands)
        self.history.extend(cands)
        return cands

    def initial(self, genomes) -> List[Candidate]:
        cands = self.evaluate(genomes)
        if len(cands) < len(genomes):
            raise InitializationError(
                f"budget {self.budget} cannot cover an initial population of {len(genomes)}")
        if all(c.failed for c in cands):
            raise InitializationError("every candidate of the initial population failed")
        return cands


@dataclass
class SearchTrace:
    algorithm: str
    generations: List[dict] = field(default_factory=list)
    best: Optional[Candidate] = None
    evaluations: int = 0
    candidates: List[Candidate] = field(default_factory=list)
    settings: dict = field(default_factory=dict)

    def record(self, generation: int, population_fitness, best: Candidate, evals: int,
               p1=None, crm=None, **extra):
        fit = np.asarray(population_fitness, dtype=np.float64)
        finite = fit[np.isfinite(fit)]
        row = {
            "generation": int(generation),
            "best": float(best.fitness),
            "mean": float(finite.mean()) if len(finite) else math.inf,
            "p1": p1,
            "crm": crm,
            "evals": int(evals),
        }
        row.update(extra)
        self.generations.append(row)
        self.best = best
        self.evaluations = int(evals)

    @property
    def best_history(self) -> np.ndarray:
        return np.array([g["best"] for g in self.generations])

    def column(self, name: str) -> list:
        return [g.get(name) for g in self.generations]

    def to_dict(self, include_candidates: bool = True) -> dict:
        out = {
            "algorithm": self.algorithm,
            "settings": self.settings,
            "evaluations": self.evaluations,
            "best": self.best.to_dict() if self.best else None,
            "generations": [{k: (_num(v) if isinstance(v, float) else v) for k, v in g.items()}
                            for g in self.generations],
        }
        if include_candidates:
            out["candidates"] = [c.to_dict() for c in self.candidates]
        return out

    def write_json(self, path) -> Path:
        path = Path(path)
        path.write_text(json.dumps(self.to_dict(), indent=1, sort_keys=True))
        return path

    def write_csv(self, path) -> Path:
        path = Path(path)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(TRACE_COLUMNS)
            for g in self.generations:
                w.writerow(["" if g.get(c) is None else repr(g[c]) if isinstance(g[c], float)
                            else g[c] for c in TRACE_COLUMNS])
        return path


def best_of(cands: List[Candidate]) -> Candidate:
    """Lowest fitness; ties go to the earliest candidate."""
    return min(cands, key=lambda c: c.fitness)
