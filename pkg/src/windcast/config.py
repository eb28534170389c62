"""Run configuration: one JSON file per run, environment overrides, run directories.

Precedence, lowest first: built-in defaults, the ``--config`` file,
``WINDCAST_*`` environment variables, explicit command-line flags.

Environment variables:

``WINDCAST_SEED``, ``WINDCAST_JOBS``, ``WINDCAST_OUT``, ``WINDCAST_RUN_ID``
    top-level settings.
``WINDCAST_<SECTION>__<KEY>``
    any section field, e.g. ``WINDCAST_SEARCH__BUDGET=20``.  Values are read
    as JSON when possible, otherwise as plain strings.
"""

from __future__ import annotations

import copy
import hashlib
import json
import os
from dataclasses import asdict, dataclass, field, fields
from pathlib import Path
from typing import Any, Dict, List, Optional

from .errors import ConfigError
from .forecaster import ForecasterConfig
from .outliers import AutoencoderConfig
from .synth import SynthConfig, TurbineSpec
from .tuning import TuneSettings

ENV_PREFIX = "WINDCAST_"
SECTIONS = ("data", "synth", "ingest", "filter", "forecaster", "search", "experiment")


@dataclass
class DataSection:
    path: Optional[str] = None  # SCADA CSV; synthetic data is generated when unset
    schema: Optional[Dict[str, str]] = None
    cadence: Optional[float] = None


@dataclass
class SynthSection:
    n_records: int = 20_000
    outlier_rate: float = 0.05
    outlier_kind: str = "random"
    noise_frac: float = 0.01
    noise_autocorr: float = 0.0
    seed: Optional[int] = None  # defaults to the run seed
    turbine: Dict[str, float] = field(default_factory=dict)

    def build(self, run_seed: int):
        spec = TurbineSpec(**self.turbine)
        cfg = SynthConfig(n_records=self.n_records, outlier_rate=self.outlier_rate,
                          outlier_kind=self.outlier_kind, noise_frac=self.noise_frac,
                          noise_autocorr=self.noise_autocorr,
                          seed=run_seed if self.seed is None else self.seed)
        return spec, cfg


@dataclass
class IngestSection:
    lookback: int = 6
    horizon: int = 1
    split: str = "random"


@dataclass
class FilterSection:
    enabled: bool = True
    k: int = 10
    threshold: str = "global"
    hidden_dim: int = 1
    epochs: int = 500
    lr: float = 0.05

    @property
    def autoencoder(self) -> AutoencoderConfig:
        return AutoencoderConfig(self.hidden_dim, self.epochs, self.lr)


@dataclass
class SearchSection:
    method: str = "sade"
    budget: int = 40
    pop_size: Optional[int] = None
    max_epochs: int = 30
    local_search: Optional[str] = None
    local_period: int = 20

    def settings(self, method: Optional[str] = None, bs_grid=None, lr_grid=None):
        return TuneSettings(method or self.method, self.budget, self.pop_size, self.local_search,
                            self.local_period, tuple(bs_grid) if bs_grid else None,
                            tuple(lr_grid) if lr_grid else None)


@dataclass
class ExperimentSection:
    kind: str = "model-comparison"
    variants: List[str] = field(default_factory=lambda: ["M1", "M2", "M3", "M4"])
    horizons: List[int] = field(default_factory=lambda: [1, 6])
    bs_grid: List[int] = field(default_factory=lambda: [128, 256, 512, 1024, 2048])
    lr_grid: List[float] = field(default_factory=lambda: [1e-5, 1e-4, 1e-3, 1e-2, 1e-1])
    optimizers: List[str] = field(default_factory=lambda: ["grid", "de", "gwo", "sade"])
    repeats: List[int] = field(default_factory=lambda: [0, 1, 2])


_SECTION_TYPES = {
    "data": DataSection,
    "synth": SynthSection,
    "ingest": IngestSection,
    "filter": FilterSection,
    "search": SearchSection,
    "experiment": ExperimentSection,
}


@dataclass
class RunConfig:
    seed: int = 0
    jobs: int = 1
    out: str = "runs"
    run_id: Optional[str] = None
    data: DataSection = field(default_factory=DataSection)
    synth: SynthSection = field(default_factory=SynthSection)
    ingest: IngestSection = field(default_factory=IngestSection)
    filter: FilterSection = field(default_factory=FilterSection)
    forecaster: Dict[str, Any] = field(default_factory=dict)  # ForecasterConfig overrides
    search: SearchSection = field(default_factory=SearchSection)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def forecaster_config(self, **changes) -> ForecasterConfig:
        base = dict(self.forecaster)
        base.setdefault("lookback", self.ingest.lookback)
        base.setdefault("horizon", self.ingest.horizon)
        base.setdefault("seed", self.seed)
        base.update(changes)
        return ForecasterConfig.from_dict(base)

    def to_dict(self) -> dict:
        return asdict(self)

    def canonical_json(self, exclude=("run_id", "out", "jobs")) -> str:
        d = {k: v for k, v in self.to_dict().items() if k not in exclude}
        return json.dumps(d, sort_keys=True, separators=(",", ":"))

    def digest(self) -> str:
        return hashlib.sha256(self.canonical_json().encode()).hexdigest()[:12]

    def resolved_run_id(self, prefix: str) -> str:
        return self.run_id or f"{prefix}-{self.digest()}"

    def validate(self):
        self.forecaster_config()
        self.search.settings()
        if self.filter.threshold not in ("global", "cluster"):
            raise ConfigError("filter.threshold must be 'global' or 'cluster'")
        if self.ingest.split not in ("random", "chronological"):
            raise ConfigError("ingest.split must be 'random' or 'chronological'")
        self.synth.build(self.seed)
        return self


def _build(cls, values: dict, where: str):
    if not isinstance(values, dict):
        raise ConfigError(f"{where}: expected an object")
    known = {f.name for f in fields(cls)}
    unknown = sorted(set(values) - known)
    if unknown:
        raise ConfigError(f"{where}: unknown option(s) {unknown}")
    return cls(**values)


def from_dict(raw: dict) -> RunConfig:
    raw = copy.deepcopy(raw)
    unknown = sorted(set(raw) - {f.name for f in fields(RunConfig)})
    if unknown:
        raise ConfigError(f"unknown top-level option(s) {unknown}")
    kw = {}
    for name, cls in _SECTION_TYPES.items():
        if name in raw:
            kw[name] = _build(cls, raw.pop(name), name)
    if "forecaster" in raw:
        fc = raw.pop("forecaster")
        if not isinstance(fc, dict):
            raise ConfigError("forecaster: expected an object")
        kw["forecaster"] = fc
    kw.update(raw)
    try:
        cfg = RunConfig(**kw)
        return cfg.validate()
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


def _env_value(text: str):
    try:
        return json.loads(text)
    except json.JSONDecodeError:
        return text


def env_overrides(environ=None) -> dict:
    """Nested override dict built from ``WINDCAST_*`` variables."""
    environ = os.environ if environ is None else environ
    out: Dict[str, Any] = {}
    for key, text in sorted(environ.items()):
        if not key.startswith(ENV_PREFIX):
            continue
        name = key[len(ENV_PREFIX):].lower()
        if "__" in name:
            section, opt = name.split("__", 1)
            if section not in SECTIONS:
                raise ConfigError(f"{key}: unknown section {section!r}")
            out.setdefault(section, {})[opt] = _env_value(text)
        elif name in ("seed", "jobs", "out", "run_id"):
            out[name] = _env_value(text) if name in ("seed", "jobs") else text
        else:
            raise ConfigError(f"{key}: unknown setting")
    return out


def merge(base: dict, over: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in over.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = merge(out[k], v)
        else:
            out[k] = v
    return out


def load(path=None, overrides: Optional[dict] = None, environ=None) -> RunConfig:
    raw: dict = {}
    if path is not None:
        try:
            raw = json.loads(Path(path).read_text())
        except FileNotFoundError as exc:
            raise ConfigError(f"config file not found: {path}") from exc
        except json.JSONDecodeError as exc:
            raise ConfigError(f"{path}: invalid JSON ({exc})") from exc
        if not isinstance(raw, dict):
            raise ConfigError(f"{path}: top level must be an object")
    raw = merge(raw, env_overrides(environ))
    raw = merge(raw, overrides or {})
    return from_dict(raw)


def run_dir(cfg: RunConfig, prefix: str) -> Path:
    d = Path(cfg.out) / cfg.resolved_run_id(prefix)
    d.mkdir(parents=True, exist_ok=True)
    return d


def write_json(path, payload) -> Path:
    """Deterministic JSON: sorted keys, fixed indentation, trailing newline."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, indent=1, sort_keys=True, allow_nan=False) + "\n")
    return path
