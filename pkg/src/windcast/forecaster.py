"""LSTM power forecaster: configuration, training with early stopping,
prediction, scoring and versioned JSON checkpoints."""

from __future__ import annotations

import hashlib
import json
import logging
from dataclasses import asdict, dataclass, field, fields, replace
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import metrics
from .errors import (ConfigError, DimensionError, DivergedTrainingError, IntegrityError,
                     NumericError, UnsupportedVersionError)
from .ingest import ModelVariant, NormStats, SupervisedSet
from .nn import OPTIMIZERS, LstmNetwork, Optimizer, clip_global_norm, mse_loss

log = logging.getLogger(__name__)

FORMAT_VERSION = 1
BATCH_RANGE = (128, 2048)
LR_RANGE = (1e-5, 1e-1)


@dataclass(frozen=True)
class ForecasterConfig:
    variant: ModelVariant = ModelVariant.M3
    horizon: int = 1
    lookback: int = 6
    num_layers: int = 1
    hidden1: int = 100
    hidden2: int = 100
    batch_size: int = 512
    learning_rate: float = 1e-3
    optimizer: str = "adam"
    max_epochs: int = 100
    early_stop_patience: int = 5
    dropout_rate: float = 0.2
    clip_norm: float = 1.0
    seed: int = 0

    def __post_init__(self):
        object.__setattr__(self, "variant", ModelVariant.parse(self.variant))
        problems = []
        if self.num_layers not in (1, 2):
            problems.append(f"num_layers={self.num_layers} (must be 1 or 2)")
        if self.hidden1 < 1 or (self.num_layers == 2 and self.hidden2 < 1):
            problems.append("hidden sizes must be >= 1")
        if not BATCH_RANGE[0] <= self.batch_size <= BATCH_RANGE[1]:
            problems.append(f"batch_size={self.batch_size} outside {BATCH_RANGE}")
        if not LR_RANGE[0] <= self.learning_rate <= LR_RANGE[1]:
            problems.append(f"learning_rate={self.learning_rate} outside {LR_RANGE}")
        if self.optimizer not in OPTIMIZERS:
            problems.append(f"optimizer={self.optimizer!r} not in {OPTIMIZERS}")
        if self.horizon < 1 or self.lookback < 1:
            problems.append("horizon and lookback must be >= 1")
        if self.max_epochs < 1 or self.early_stop_patience < 1:
            problems.append("max_epochs and early_stop_patience must be >= 1")
        if not 0.0 <= self.dropout_rate < 1.0:
            problems.append(f"dropout_rate={self.dropout_rate} outside [0, 1)")
        if problems:
            raise ConfigError("invalid forecaster config: " + "; ".join(problems))

    @property
    def hidden_sizes(self) -> List[int]:
        return [self.hidden1] if self.num_layers == 1 else [self.hidden1, self.hidden2]

    def to_dict(self) -> dict:
        d = asdict(self)
        d["variant"] = self.variant.name
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "ForecasterConfig":
        known = {f.name for f in fields(cls)}
        unknown = set(d) - known
        if unknown:
            raise ConfigError(f"unknown forecaster option(s): {sorted(unknown)}")
        return cls(**d)

    def with_(self, **changes) -> "ForecasterConfig":
        return replace(self, **changes)


@dataclass
class TrainedForecaster:
    config: ForecasterConfig
    network: LstmNetwork
    norm_stats: NormStats
    history: List[dict] = field(default_factory=list)
    best_epoch: int = -1

    @property
    def best_val_rmse(self) -> float:
        return self.history[self.best_epoch]["val_rmse"]

    def denormalize(self, values) -> np.ndarray:
        return self.norm_stats.inverse("power", values)


def train(config: ForecasterConfig, data: SupervisedSet) -> TrainedForecaster:
    """Mini-batch training on MSE with early stopping on validation RMSE.

    The returned network holds the weights of the best validation epoch.
    """
    if data.variant is not config.variant:
        raise ConfigError(f"config variant {config.variant.name} but data built for "
                          f"{data.variant.name}")
    X_tr, y_tr = data.split("train")
    X_va, y_va = data.split("validation")
    if len(y_tr) == 0 or len(y_va) == 0 or len(data.test_idx) == 0:
        raise ConfigError("every split must be non-empty")

    rng = np.random.default_rng(config.seed)
    net = LstmNetwork.init(config.variant.input_dim, config.hidden_sizes, rng,
                           dropout_rate=config.dropout_rate)
    opt = Optimizer(config.optimizer, config.learning_rate)
    n, bs = len(y_tr), config.batch_size
    history, best, best_rmse, best_epoch, wait = [], None, np.inf, -1, 0

    for epoch in range(config.max_epochs):
        order = rng.permutation(n)
        total = 0.0
        try:
            for s in range(0, n, bs):
                b = order[s:s + bs]
                pred, cache = net.forward(X_tr[b], training=True, rng=rng)
                loss, dpred = mse_loss(pred, y_tr[b])
                if not np.isfinite(loss):
                    raise DivergedTrainingError(epoch)
                grads, _ = clip_global_norm(net.backward(cache, dpred), config.clip_norm)
                opt.step(net.params, grads)
                total += loss * len(b)
            val_pred = net.predict(X_va)
        except NumericError as exc:
            raise DivergedTrainingError(epoch, str(exc)) from exc
        val_rmse = metrics.rmse(val_pred, y_va)
        if not np.isfinite(val_rmse):
            raise DivergedTrainingError(epoch, "validation RMSE became non-finite")
        history.append({"epoch": epoch, "train_loss": total / n, "val_rmse": val_rmse})
        if val_rmse < best_rmse:
            best_rmse, best_epoch, best, wait = val_rmse, epoch, net.copy_params(), 0
        else:
            wait += 1
            if wait >= config.early_stop_patience:
                break

    net.params = best
    return TrainedForecaster(config, net, data.norm_stats, history, best_epoch)


def predict(model: TrainedForecaster, inputs) -> np.ndarray:
    """Normalized power predictions for windows of shape ``(n, lookback, input_dim)``."""
    X = np.asarray(inputs, dtype=np.float64)
    want = (model.config.lookback, model.config.variant.input_dim)
    if X.ndim != 3 or X.shape[1:] != want:
        raise DimensionError(f"windows of shape {X.shape}; expected (n, {want[0]}, {want[1]})")
    return model.network.predict(X)


@dataclass
class MetricReport:
    splits: Dict[str, dict]  # split -> {mse, rmse, mae, r, rmse_kw}

    @property
    def train(self) -> dict:
        return self.splits["train"]

    @property
    def test(self) -> dict:
        return self.splits["test"]

    def to_dict(self) -> dict:
        return {s: {k: _json_float(v) for k, v in m.items()} for s, m in self.splits.items()}

    def rows(self):
        """Flat ``(split, metric, value)`` rows for CSV output."""
        for s, m in self.splits.items():
            for k, v in m.items():
                yield s, k, _json_float(v)


def _json_float(v):
    return None if v is None or not np.isfinite(v) else float(v)


def score_split(model: TrainedForecaster, pred, obs) -> dict:
    out = metrics.score(pred, obs)
    out["rmse_kw"] = out["rmse"] * model.norm_stats.span("power")
    return out


def evaluate(model: TrainedForecaster, data: SupervisedSet,
             splits=("train", "validation", "test")) -> MetricReport:
    report = {}
    for name in splits:
        X, y = data.split(name)
        report[name] = score_split(model, predict(model, X), y)
    return MetricReport(report)


def persistence_rmse(data: SupervisedSet, split: str = "validation") -> float:
    """RMSE of the naive forecast ``power(t + H) = power(t)``."""
    idx = {"train": data.train_idx, "validation": data.val_idx, "test": data.test_idx}[split]
    return metrics.rmse(data.last_power[idx], data.targets[idx])


# -- checkpoints --------------------------------------------------------------

def _weights_block(params: dict) -> dict:
    return {k: {"shape": list(v.shape), "data": v.ravel().tolist()} for k, v in sorted(params.items())}


def _digest(block: dict) -> str:
    raw = json.dumps(block, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(raw.encode()).hexdigest()


def save(model: TrainedForecaster, path) -> Path:
    block = _weights_block(model.network.params)
    payload = {
        "format_version": FORMAT_VERSION,
        "config": model.config.to_dict(),
        "norm_stats": model.norm_stats.to_dict(),
        "history": model.history,
        "best_epoch": model.best_epoch,
        "weights": block,
        "weights_sha256": _digest(block),
    }
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(payload, sort_keys=True))
    return path


def load(path) -> TrainedForecaster:
    try:
        payload = json.loads(Path(path).read_text())
    except (json.JSONDecodeError, UnicodeDecodeError) as exc:
        raise IntegrityError(f"{path}: unreadable checkpoint ({exc})") from exc
    version = payload.get("format_version")
    if version != FORMAT_VERSION:
        raise UnsupportedVersionError(
            f"{path}: checkpoint format {version!r}, this build reads {FORMAT_VERSION}")
    try:
        block = payload["weights"]
        if _digest(block) != payload["weights_sha256"]:
            raise IntegrityError(f"{path}: weights checksum mismatch")
        params = {k: np.array(v["data"], dtype=np.float64).reshape(v["shape"])
                  for k, v in block.items()}
        config = ForecasterConfig.from_dict(payload["config"])
        stats = NormStats.from_dict(payload["norm_stats"])
    except (KeyError, TypeError, ValueError) as exc:
        raise IntegrityError(f"{path}: malformed checkpoint ({exc})") from exc
    net = LstmNetwork(params, config.dropout_rate)
    if net.hidden_sizes != config.hidden_sizes:
        raise IntegrityError(f"{path}: weight shapes {net.hidden_sizes} disagree with config")
    return TrainedForecaster(config, net, stats, payload.get("history", []),
                             payload.get("best_epoch", -1))
