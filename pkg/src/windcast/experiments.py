"""Experiment harness: model, outlier, horizon and optimizer comparisons.

Every trained model leaves a raw result file under ``raw/``; the report
tables are built only from those results and carry the raw file names, so
each cell can be traced back.  Reports contain no wall-clock data, which keeps
them byte-identical across re-runs of the same configuration.
"""

from __future__ import annotations

import csv
import itertools
import logging
import math
from pathlib import Path
from typing import Dict, List, Optional

import numpy as np

from . import forecaster as fc
from .config import RunConfig, write_json
from .errors import WindcastError
from .ingest import ScadaSeries, build_supervised, parse_csv, write_csv
from .outliers import filter_outliers
from .search import friedman_ranks
from .synth import generate
from .tuning import LstmFitness, tune

log = logging.getLogger(__name__)

KINDS = ("model-comparison", "outlier-ablation", "horizon-comparison", "optimizer-comparison")
TABLE_COLUMNS = tuple(f"{m}_{s}" for m in ("mse", "rmse", "mae", "r") for s in ("train", "test"))


class ResultStore:
    """The single writer for one run directory."""

    def __init__(self, root):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.files: List[str] = []

    def json(self, rel: str, payload) -> str:
        write_json(self.root / rel, payload)
        self.files.append(rel)
        return rel

    def csv(self, rel: str, header, rows) -> str:
        path = self.root / rel
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(header)
            for row in rows:
                w.writerow([_cell(v) for v in row])
        self.files.append(rel)
        return rel

    def series(self, rel: str, series: ScadaSeries) -> str:
        write_csv(series, self.root / rel)
        self.files.append(rel)
        return rel


def _cell(v):
    if v is None:
        return ""
    if isinstance(v, (float, np.floating)):
        return repr(float(v)) if math.isfinite(v) else ""
    return v


def _clean(v):
    """JSON-safe copy: non-finite floats become None, numpy scalars become Python."""
    if isinstance(v, dict):
        return {str(k): _clean(x) for k, x in v.items()}
    if isinstance(v, (list, tuple)):
        return [_clean(x) for x in v]
    if isinstance(v, (np.integer,)):
        return int(v)
    if isinstance(v, (float, np.floating)):
        return float(v) if math.isfinite(v) else None
    return v


def derive_seed(seed: int, *parts: int) -> int:
    out = seed
    for p in parts:
        out = out * 1000 + p
    return out


# -- data preparation --------------------------------------------------------

def load_series(cfg: RunConfig, store: Optional[ResultStore] = None):
    """``(series, labels)``; labels are ``None`` for real data."""
    if cfg.data.path:
        series = parse_csv(cfg.data.path, cfg.data.schema, cfg.data.cadence)
        labels = None
    else:
        spec, scfg = cfg.synth.build(cfg.seed)
        series, labels = generate(spec, scfg)
    if store is not None:
        store.series("data/raw.csv", series)
        if labels is not None:
            store.json("data/labels.json", {"outliers": [int(i) for i in labels]})
    return series, labels


def apply_filter(cfg: RunConfig, series: ScadaSeries, labels=None,
                 store: Optional[ResultStore] = None):
    f = cfg.filter
    kept, report = filter_outliers(series, f.k, cfg.seed, f.autoencoder, f.threshold)
    summary = {"n_input": report.n_input, "n_kept": len(report.kept),
               "n_removed": len(report.removed)}
    if labels is not None and len(labels):
        removed = set(report.removed.tolist())
        lab = set(int(i) for i in labels)
        summary["recall"] = len(removed & lab) / len(lab)
        summary["inlier_removed_fraction"] = len(removed - lab) / max(1, len(series) - len(lab))
    if store is not None:
        store.json("data/filter_report.json", report.to_dict())
    return kept, report, summary


def train_and_score(config: fc.ForecasterConfig, data, store: ResultStore, name: str,
                    predictions: bool = False) -> dict:
    model = fc.train(config, data)
    report = fc.evaluate(model, data)
    raw = {
        "config": config.to_dict(),
        "best_epoch": model.best_epoch,
        "history": model.history,
        "metrics": report.to_dict(),
        "norm_stats": model.norm_stats.to_dict(),
        "persistence_rmse": {s: fc.persistence_rmse(data, s) for s in ("validation", "test")},
    }
    row = {
        "val_rmse": model.best_val_rmse,
        "metrics": report.to_dict(),
        "raw": store.json(f"raw/{name}.json", _clean(raw)),
    }
    if predictions:
        X, y = data.split("test")
        pred = fc.predict(model, X)
        t = data.target_time[data.test_idx]
        row["predictions"] = store.csv(
            f"predictions/{name}.csv", ("timestamp", "predicted_kw", "measured_kw"),
            zip(t, model.denormalize(pred), model.denormalize(y)))
    return row


def _flat(metrics: dict) -> dict:
    out = {}
    for m in ("mse", "rmse", "mae", "r"):
        for s in ("train", "test"):
            out[f"{m}_{s}"] = (metrics.get(s) or {}).get(m)
    return out


def summary_table(rows: List[dict], key: str) -> Dict[str, dict]:
    """Per group: mean/min/max/std of each train/test metric (sample std, 0 for one run)."""
    table = {}
    groups = sorted({r[key] for r in rows if "metrics" in r})
    for g in groups:
        flat = [_flat(r["metrics"]) for r in rows if r.get(key) == g and "metrics" in r]
        stats = {"mean": {}, "min": {}, "max": {}, "std": {}, "n": len(flat)}
        for col in TABLE_COLUMNS:
            v = np.array([f[col] for f in flat if f[col] is not None], dtype=np.float64)
            if len(v) == 0:
                for s in ("mean", "min", "max", "std"):
                    stats[s][col] = None
                continue
            stats["mean"][col] = float(v.mean())
            stats["min"][col] = float(v.min())
            stats["max"][col] = float(v.max())
            stats["std"][col] = float(v.std(ddof=1)) if len(v) > 1 else 0.0
        table[str(g)] = stats
    return table


def _friedman(rows, row_key, col_key, cols, metric=("test", "rmse")):
    keys = sorted({r[row_key] for r in rows}, key=str)
    S = np.full((len(keys), len(cols)), np.nan)
    for r in rows:
        if "metrics" not in r:
            continue
        v = (r["metrics"].get(metric[0]) or {}).get(metric[1])
        if v is not None:
            S[keys.index(r[row_key]), list(cols).index(r[col_key])] = v
    try:
        res = friedman_ranks(S, models=cols).to_dict()
    except ValueError as exc:
        return {"skipped": str(exc)}
    res["metric"] = f"{metric[0]}_{metric[1]}"
    res["rows"] = [str(k) for k in keys]
    return res


def _guarded(rows, errors, fn, **tags):
    try:
        row = fn()
    except WindcastError as exc:
        errors.append({**tags, "error": f"{type(exc).__name__}: {exc}"})
        row = {}
    rows.append({**tags, **row})


# -- experiments -------------------------------------------------------------

def model_comparison(cfg: RunConfig, store: ResultStore, errors: list) -> dict:
    series, labels = load_series(cfg, store)
    filt = None
    if cfg.filter.enabled:
        series, _, filt = apply_filter(cfg, series, labels, store)
    exp = cfg.experiment
    rows: List[dict] = []
    for v in exp.variants:
        data = build_supervised(series, v, cfg.ingest.lookback, cfg.ingest.horizon, cfg.seed,
                                cfg.ingest.split)
        for bs, lr in itertools.product(exp.bs_grid, exp.lr_grid):
            config = cfg.forecaster_config(variant=v, batch_size=bs, learning_rate=lr)
            name = f"{v}-bs{bs}-lr{lr:g}"
            _guarded(rows, errors, lambda: train_and_score(config, data, store, name),
                     model=v, batch_size=bs, learning_rate=lr)
    for r in rows:
        r["config"] = f"bs{r['batch_size']}-lr{r['learning_rate']:g}"
    return {
        "filter": filt,
        "results": rows,
        "tables": summary_table(rows, "model"),
        "friedman": _friedman(rows, "config", "model", list(exp.variants)),
    }


def outlier_ablation(cfg: RunConfig, store: ResultStore, errors: list) -> dict:
    raw, labels = load_series(cfg, store)
    filtered, _, filt = apply_filter(cfg, raw, labels, store)
    rows: List[dict] = []
    for v in cfg.experiment.variants:
        config = cfg.forecaster_config(variant=v)
        for arm, series in (("raw", raw), ("filtered", filtered)):
            def run(series=series, arm=arm):
                data = build_supervised(series, v, config.lookback, config.horizon, cfg.seed,
                                        cfg.ingest.split)
                out = train_and_score(config, data, store, f"{arm}-{v}", predictions=True)
                out["n_samples"] = len(data)
                return out
            _guarded(rows, errors, run, data=arm, model=v)
    return {"filter": filt, "results": rows, "tables": summary_table(rows, "data")}


def horizon_comparison(cfg: RunConfig, store: ResultStore, errors: list) -> dict:
    series, labels = load_series(cfg, store)
    filt = None
    if cfg.filter.enabled:
        series, _, filt = apply_filter(cfg, series, labels, store)
    rows: List[dict] = []
    for v in cfg.experiment.variants:
        for h in cfg.experiment.horizons:
            config = cfg.forecaster_config(variant=v, horizon=h)
            def run(v=v, h=h, config=config):
                data = build_supervised(series, v, config.lookback, h, cfg.seed, cfg.ingest.split)
                out = train_and_score(config, data, store, f"{v}-H{h}", predictions=True)
                out["persistence_test_rmse"] = fc.persistence_rmse(data, "test")
                return out
            _guarded(rows, errors, run, model=v, horizon=h)
    for r in rows:
        r["arm"] = f"H{r['horizon']}"
    return {"filter": filt, "results": rows, "tables": summary_table(rows, "arm")}


def optimizer_comparison(cfg: RunConfig, store: ResultStore, errors: list) -> dict:
    series, labels = load_series(cfg, store)
    filt = None
    if cfg.filter.enabled:
        series, _, filt = apply_filter(cfg, series, labels, store)
    base = cfg.forecaster_config(max_epochs=cfg.search.max_epochs)
    data = build_supervised(series, base.variant, base.lookback, base.horizon, cfg.seed,
                            cfg.ingest.split)
    methods = list(cfg.experiment.optimizers)
    rows: List[dict] = []
    for rep in cfg.experiment.repeats:
        eval_seed = derive_seed(cfg.seed, rep)
        fitness = LstmFitness(data, base, eval_seed)
        for m in methods:
            def run(m=m, rep=rep, fitness=fitness):
                best, trace = tune(fitness, cfg.search.settings(m), seed=eval_seed, jobs=cfg.jobs)
                tag = f"{m}-r{rep}"
                tref = store.json(f"traces/{tag}.json", _clean(trace.to_dict()))
                store.csv(f"traces/{tag}.csv", ("generation", "best", "mean", "p1", "crm",
                                                "evals"),
                          ([g.get(c) for c in ("generation", "best", "mean", "p1", "crm",
                                               "evals")] for g in trace.generations))
                out = train_and_score(fitness.config(best.params), data, store, tag,
                                      predictions=True)
                out.update(search_val_rmse=best.fitness, evaluations=trace.evaluations,
                           best_params=best.params, trace=tref)
                return out
            _guarded(rows, errors, run, method=m, repeat=rep)
    return {
        "filter": filt,
        "results": rows,
        "tables": summary_table(rows, "method"),
        "friedman": _friedman(rows, "repeat", "method", methods),
    }


RUNNERS = {
    "model-comparison": model_comparison,
    "outlier-ablation": outlier_ablation,
    "horizon-comparison": horizon_comparison,
    "optimizer-comparison": optimizer_comparison,
}


def run_experiment(kind: str, cfg: RunConfig, run_dir) -> dict:
    """Run one experiment into ``run_dir`` and write ``report.json``.

    A failing stage leaves whatever finished on disk and marks the report
    incomplete instead of raising.
    """
    if kind not in RUNNERS:
        raise ValueError(f"unknown experiment {kind!r}; choose from {KINDS}")
    store = ResultStore(run_dir)
    store.json("config.json", cfg.to_dict())
    errors: List[dict] = []
    try:
        body = RUNNERS[kind](cfg, store, errors)
    except WindcastError as exc:
        errors.append({"stage": "setup", "error": f"{type(exc).__name__}: {exc}"})
        body = {}
    report = {
        "kind": kind,
        "config_digest": cfg.digest(),
        "seed": cfg.seed,
        "complete": not errors,
        "errors": errors,
        "table_columns": list(TABLE_COLUMNS),
        **body,
    }
    report["files"] = sorted(set(store.files))
    store.json("report.json", _clean(report))
    return report
