"""Standard test functions for checking the optimizers."""

import numpy as np

from .space import SearchSpace


def sphere(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(x * x))


def rosenbrock(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(np.sum(100.0 * (x[1:] - x[:-1] ** 2) ** 2 + (1.0 - x[:-1]) ** 2))


def rastrigin(x) -> float:
    x = np.asarray(x, dtype=np.float64)
    return float(10.0 * len(x) + np.sum(x * x - 10.0 * np.cos(2.0 * np.pi * x)))


BENCHMARKS = {
    "sphere": (sphere, (-5.12, 5.12)),
    "rosenbrock": (rosenbrock, (-2.048, 2.048)),
    "rastrigin": (rastrigin, (-5.12, 5.12)),
}


class BenchmarkObjective:
    """Picklable adapter from decoded parameters to a benchmark function."""

    def __init__(self, name: str):
        if name not in BENCHMARKS:
            raise ValueError(f"unknown benchmark {name!r}; choose from {sorted(BENCHMARKS)}")
        self.name = name
        self.fn = BENCHMARKS[name][0]

    def __call__(self, params: dict) -> float:
        return self.fn(np.fromiter(params.values(), dtype=np.float64))


def benchmark_problem(name: str, dim: int = 5):
    """``(space, objective)`` for a named benchmark on its usual box."""
    obj = BenchmarkObjective(name)
    lo, hi = BENCHMARKS[name][1]
    return SearchSpace.box(dim, lo, hi), obj
