"""Hyperparameter tuning of the LSTM forecaster with any of the search methods."""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

from . import metrics
from .errors import ConfigError
from .forecaster import ForecasterConfig, predict, train
from .ingest import SupervisedSet
from .search import (SearchSpace, de_optimize, grid_levels, grid_search, gwo_optimize,
                     random_search, sade_optimize)
from .search.space import to_forecaster_fields

METHODS = ("sade", "de", "gwo", "grid", "random")
# the grid baseline holds these fixed and tunes batch size and learning rate only
GRID_FIXED = {"num_layers": 1, "hidden1": 100, "hidden2": 100, "optimizer": "adam"}


class LstmFitness:
    """Validation RMSE of the best epoch for a decoded hyperparameter set.

    Every candidate trains with the same ``eval_seed`` so that candidates
    differ only in their hyperparameters.
    """

    def __init__(self, data: SupervisedSet, base: ForecasterConfig, eval_seed: int = 0):
        self.data = data
        self.base = base
        self.eval_seed = eval_seed

    def config(self, params: dict) -> ForecasterConfig:
        return self.base.with_(seed=self.eval_seed, **to_forecaster_fields(params))

    def __call__(self, params: dict):
        model = train(self.config(params), self.data)
        X, y = self.data.split("validation")
        pred = predict(model, X)
        return model.best_val_rmse, {
            "val_mse": model.best_val_rmse ** 2,
            "val_r": metrics.pearson_r(pred, y),
            "best_epoch": model.best_epoch,
        }


@dataclass(frozen=True)
class TuneSettings:
    method: str = "sade"
    budget: int = 40
    pop_size: Optional[int] = None
    local_search: Optional[str] = None
    local_period: int = 20
    bs_grid: Optional[tuple] = None
    lr_grid: Optional[tuple] = None

    def __post_init__(self):
        if self.method not in METHODS:
            raise ValueError(f"method must be one of {METHODS}")
        if self.budget < 1:
            raise ValueError("budget must be positive")


def population_size(budget: int, pop_size: Optional[int] = None, minimum: int = 5) -> int:
    """A population that leaves room for several generations inside ``budget``."""
    if pop_size:
        return pop_size
    return max(minimum, min(20, budget // 5))


def tune(fitness: LstmFitness, settings: TuneSettings, seed: int = 0, jobs: int = 1,
         space: Optional[SearchSpace] = None):
    """Run one search; returns ``(best Candidate, SearchTrace)``."""
    try:
        return _tune(fitness, settings, seed, jobs, space)
    except ValueError as exc:  # settings the optimizer cannot run with
        raise ConfigError(str(exc)) from exc


def _tune(fitness, settings, seed, jobs, space):
    space = space or SearchSpace.lstm()
    s = settings
    kw = dict(eval_seed=fitness.eval_seed, jobs=jobs)
    big = 10 ** 6  # generations are bounded by the budget
    if s.method == "sade":
        return sade_optimize(space, fitness, population_size(s.budget, s.pop_size), big, s.budget,
                             seed, local_search=s.local_search, local_period=s.local_period, **kw)
    if s.method == "de":
        return de_optimize(space, fitness, population_size(s.budget, s.pop_size, 4), 0.5, 0.9,
                           big, s.budget, seed, **kw)
    if s.method == "gwo":
        n = population_size(s.budget, s.pop_size, 3)
        iters = max(1, (s.budget - n) // n)
        return gwo_optimize(space, fitness, n, iters, s.budget, seed, **kw)
    if s.method == "random":
        return random_search(space, fitness, s.budget, seed, **kw)
    bs, lr = grid_levels(s.budget)
    bs = list(s.bs_grid or bs)
    lr = list(s.lr_grid or lr)
    if len(bs) * len(lr) > s.budget:
        raise ValueError(f"grid of {len(bs)}x{len(lr)} exceeds the budget of {s.budget}")
    ranked, trace = grid_search(bs, lr, fitness, GRID_FIXED, **kw)
    return trace.best, trace
