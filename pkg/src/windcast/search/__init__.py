"""Black-box hyperparameter search: SaDE, DE, GWO, grid and random search."""

from .benchmarks import BENCHMARKS, benchmark_problem, rastrigin, rosenbrock, sphere
from .de import de_optimize
from .friedman import FriedmanResult, friedman_ranks
from .grid import grid_levels, grid_search, random_search
from .gwo import gwo_optimize, gwo_step
from .sade import SaDeState, sade_optimize, sample_cr, sample_f, update_p1
from .space import Dimension, SearchSpace, decode, decode_config, reflect
from .trace import Candidate, Evaluator, SearchTrace

__all__ = [
    "BENCHMARKS", "Candidate", "Dimension", "Evaluator", "FriedmanResult", "SaDeState",
    "SearchSpace", "SearchTrace", "benchmark_problem", "de_optimize", "decode",
    "decode_config", "friedman_ranks", "grid_levels", "grid_search", "gwo_optimize",
    "gwo_step", "random_search", "rastrigin", "reflect", "rosenbrock", "sade_optimize",
    "sample_cr", "sample_f", "sphere", "update_p1",
]
