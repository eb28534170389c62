"""Mixed continuous/integer/categorical search spaces over a real-valued genome."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Dict, Sequence, Tuple

import numpy as np

KINDS = ("continuous", "integer", "categorical")
OPTIMIZER_CODES = {1: "sgdm", 2: "adam", 3: "rmsprop"}


@dataclass(frozen=True)
class Dimension:
    name: str
    kind: str
    lower: float
    upper: float
    scale: str = "linear"

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"{self.name}: kind must be one of {KINDS}")
        if not self.lower < self.upper:
            raise ValueError(f"{self.name}: lower bound must be below upper bound")
        if self.scale not in ("linear", "log"):
            raise ValueError(f"{self.name}: scale must be 'linear' or 'log'")
        if self.scale == "log" and self.lower <= 0:
            raise ValueError(f"{self.name}: log scale needs a strictly positive range")

    @property
    def gene_bounds(self) -> Tuple[float, float]:
        if self.scale == "log":
            return math.log10(self.lower), math.log10(self.upper)
        return float(self.lower), float(self.upper)

    def value(self, gene: float):
        """Decode one in-bounds gene."""
        if self.scale == "log":
            v = 10.0 ** gene
            return float(min(max(v, self.lower), self.upper))
        if self.kind == "continuous":
            return float(gene)
        v = int(math.floor(gene + 0.5))
        return int(min(max(v, int(self.lower)), int(self.upper)))


def reflect(x: np.ndarray, lower: np.ndarray, upper: np.ndarray) -> np.ndarray:
    """Fold values back into ``[lower, upper]`` by mirror reflection at the bounds."""
    x = np.asarray(x, dtype=np.float64)
    width = upper - lower
    y = np.mod(x - lower, 2.0 * width)
    y = np.where(y > width, 2.0 * width - y, y)
    return np.where((x >= lower) & (x <= upper), x, lower + y)


class SearchSpace:
    def __init__(self, dims: Sequence[Dimension]):
        if not dims:
            raise ValueError("a search space needs at least one dimension")
        names = [d.name for d in dims]
        if len(set(names)) != len(names):
            raise ValueError("dimension names must be unique")
        self.dims = tuple(dims)
        b = np.array([d.gene_bounds for d in self.dims])
        self.lower, self.upper = b[:, 0], b[:, 1]

    def __len__(self) -> int:
        return len(self.dims)

    @property
    def names(self):
        return [d.name for d in self.dims]

    @property
    def continuous_mask(self) -> np.ndarray:
        return np.array([d.kind == "continuous" for d in self.dims])

    def reflect(self, genome) -> np.ndarray:
        g = np.asarray(genome, dtype=np.float64)
        if g.shape[-1] != len(self):
            raise ValueError(f"genome length {g.shape[-1]} != {len(self)} dimensions")
        return reflect(g, self.lower, self.upper)

    def sample(self, rng: np.random.Generator, n: int) -> np.ndarray:
        return rng.uniform(self.lower, self.upper, size=(n, len(self)))

    def decode(self, genome) -> Dict[str, object]:
        g = self.reflect(genome)
        return {d.name: d.value(x) for d, x in zip(self.dims, g)}

    def vector(self, genome) -> np.ndarray:
        """Decoded values as a float vector (convenient for benchmark functions)."""
        return np.array(list(self.decode(genome).values()), dtype=np.float64)

    def to_dict(self) -> list:
        return [dict(name=d.name, kind=d.kind, lower=d.lower, upper=d.upper, scale=d.scale)
                for d in self.dims]

    @classmethod
    def box(cls, dim: int, lower: float, upper: float, prefix: str = "x") -> "SearchSpace":
        return cls([Dimension(f"{prefix}{k}", "continuous", lower, upper) for k in range(dim)])

    @classmethod
    def lstm(cls, hidden=(10, 256), batch=(128, 2048), lr=(1e-5, 1e-1)) -> "SearchSpace":
        return cls([
            Dimension("num_layers", "integer", 1, 2),
            Dimension("hidden1", "integer", *hidden),
            Dimension("hidden2", "integer", *hidden),
            Dimension("batch_size", "integer", *batch),
            Dimension("learning_rate", "continuous", *lr, scale="log"),
            Dimension("optimizer", "categorical", 1, 3),
        ])


def decode(genome, space: SearchSpace) -> Dict[str, object]:
    return space.decode(genome)


def to_forecaster_fields(params: Dict[str, object]) -> Dict[str, object]:
    """Map decoded LSTM-space values onto ForecasterConfig field names."""
    out = dict(params)
    if "optimizer" in out and not isinstance(out["optimizer"], str):
        out["optimizer"] = OPTIMIZER_CODES[int(out["optimizer"])]
    return out


def decode_config(genome, space: SearchSpace, base):
    """Decode a genome into a ForecasterConfig, taking unset fields from ``base``."""
    return base.with_(**to_forecaster_fields(space.decode(genome)))
