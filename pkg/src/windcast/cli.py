"""``windcast`` command line.

Exit codes: 0 success, 1 internal error or incomplete experiment, 2 usage,
configuration or input error.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import json
import logging
import sys
from pathlib import Path

import numpy as np

from . import config as cfgmod
from . import forecaster as fc
from . import metrics
from .errors import (ConfigError, DimensionError, EmptyDataError, InsufficientDataError,
                     IntegrityError, NoDataError, SchemaError, UnsupportedVersionError)
from .experiments import KINDS, ResultStore, apply_filter, run_experiment, train_and_score
from .ingest import (ModelVariant, build_supervised, correlation_matrix, parse_csv,
                     split_indices, valid_starts, window_features, write_csv)
from .synth import generate, write_synthetic
from .tuning import METHODS, LstmFitness, tune

log = logging.getLogger("windcast")

USAGE_ERRORS = (ConfigError, SchemaError, DimensionError, EmptyDataError, InsufficientDataError,
                IntegrityError, UnsupportedVersionError, NoDataError, FileNotFoundError)


class UsageError(Exception):
    pass


def _common() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(add_help=False)
    g = p.add_argument_group("run options")
    g.add_argument("--config", metavar="PATH", default=argparse.SUPPRESS,
                   help="JSON run configuration")
    g.add_argument("--seed", type=int, default=argparse.SUPPRESS, help="global seed")
    g.add_argument("--jobs", type=int, default=argparse.SUPPRESS,
                   help="parallel fitness-evaluation workers")
    g.add_argument("--out", metavar="DIR", default=argparse.SUPPRESS,
                   help="parent directory for run directories (default: runs)")
    g.add_argument("--run-id", default=argparse.SUPPRESS,
                   help="run directory name (default: derived from the configuration)")
    g.add_argument("-v", "--verbose", action="store_true", default=argparse.SUPPRESS)
    return p


def build_parser() -> argparse.ArgumentParser:
    common = _common()
    p = argparse.ArgumentParser(prog="windcast", parents=[common],
                                description="Wind power forecasting with tuned LSTMs.")
    sub = p.add_subparsers(dest="command", required=True)

    s = sub.add_parser("synth", parents=[common], help="generate labelled synthetic SCADA data")
    s.add_argument("--n-records", type=int)
    s.add_argument("--outlier-rate", type=float)
    s.add_argument("--outlier-kind", choices=("stuck-at", "scaled", "random"))
    s.add_argument("--noise-frac", type=float)

    s = sub.add_parser("ingest", parents=[common], help="parse a SCADA CSV and summarise it")
    s.add_argument("input")

    s = sub.add_parser("filter", parents=[common], help="remove outliers from a SCADA CSV")
    s.add_argument("input")
    s.add_argument("--threshold", choices=("global", "cluster"))
    s.add_argument("--k", type=int)

    for name, helptext in (("train", "train one forecaster"),
                           ("tune", "tune forecaster hyperparameters")):
        s = sub.add_parser(name, parents=[common], help=helptext)
        s.add_argument("input")
        s.add_argument("--variant", choices=[v.name for v in ModelVariant])
        s.add_argument("--horizon", type=int)
        s.add_argument("--lookback", type=int)
        s.add_argument("--max-epochs", type=int)
        if name == "tune":
            s.add_argument("--method", choices=METHODS)
            s.add_argument("--budget", type=int)

    s = sub.add_parser("forecast", parents=[common], help="predict power with a saved model")
    s.add_argument("model")
    s.add_argument("input")

    s = sub.add_parser("evaluate", parents=[common], help="score a model on a SCADA CSV")
    s.add_argument("model")
    s.add_argument("input")
    s.add_argument("--predictions", help="score this predictions CSV instead of re-predicting")
    s.add_argument("--split-seed", type=int,
                   help="seed of the train/validation/test split (default: the model's seed)")

    s = sub.add_parser("experiment", parents=[common], help="run a comparison experiment")
    s.add_argument("kind", choices=KINDS)

    s = sub.add_parser("report-plots", parents=[common], help="emit plot-ready CSVs for a run")
    s.add_argument("run_dir")
    return p


def _resolve(args) -> cfgmod.RunConfig:
    over: dict = {}
    for key in ("seed", "jobs", "out", "run_id"):
        if key in args:
            over[key] = getattr(args, key)
    sections = {
        "synth": {"n_records": "n_records", "outlier_rate": "outlier_rate",
                  "outlier_kind": "outlier_kind", "noise_frac": "noise_frac"},
        "filter": {"threshold": "threshold", "k": "k"},
        "ingest": {"horizon": "horizon", "lookback": "lookback"},
        "search": {"method": "method", "budget": "budget"},
    }
    for section, mapping in sections.items():
        for attr, key in mapping.items():
            val = getattr(args, attr, None)
            if val is not None:
                over.setdefault(section, {})[key] = val
    fcfg = {}
    if getattr(args, "variant", None):
        fcfg["variant"] = args.variant
    if getattr(args, "max_epochs", None):
        fcfg["max_epochs"] = args.max_epochs
    if fcfg:
        over["forecaster"] = fcfg
    return cfgmod.load(getattr(args, "config", None), over)


def _run_dir(cfg: cfgmod.RunConfig, args) -> Path:
    if cfg.run_id:
        return cfgmod.run_dir(cfg, args.command)
    extra = {k: v for k, v in sorted(vars(args).items())
             if k not in ("config", "out", "jobs", "run_id", "verbose")}
    h = hashlib.sha256((cfg.canonical_json() + json.dumps(extra, sort_keys=True,
                                                          default=str)).encode())
    d = Path(cfg.out) / f"{args.command}-{h.hexdigest()[:12]}"
    d.mkdir(parents=True, exist_ok=True)
    return d


def _emit(payload):
    print(json.dumps(payload, indent=1, sort_keys=True))


# -- commands ----------------------------------------------------------------

def cmd_synth(cfg, args, out: Path):
    spec, scfg = cfg.synth.build(cfg.seed)
    series, labels = generate(spec, scfg)
    path = out / "synth.csv"
    write_csv(series, path)
    sidecar = write_synthetic(series, labels, path, spec, scfg)
    cfgmod.write_json(out / "config.json", cfg.to_dict())
    _emit({"data": str(path), "labels": str(sidecar), "records": len(series),
           "outliers": int(len(labels))})


def _read(cfg, path, required=None):
    return parse_csv(path, cfg.data.schema, cfg.data.cadence, required=required)


def cmd_ingest(cfg, args, out: Path):
    series = _read(cfg, args.input)
    corr = correlation_matrix(series)
    summary = {
        "records": len(series),
        "skipped": series.skipped,
        "resorted": series.resorted,
        "cadence": series.cadence,
        "gaps": int(len(series.gaps)),
        "correlation": corr.to_dict(),
    }
    cfgmod.write_json(out / "ingest_summary.json", summary)
    _emit({k: v for k, v in summary.items() if k != "correlation"})


def cmd_filter(cfg, args, out: Path):
    series = _read(cfg, args.input)
    store = ResultStore(out)
    kept, report, summary = apply_filter(cfg, series, None, store)
    store.series("kept.csv", kept)
    removed = np.zeros(len(series), dtype=int)
    removed[report.removed] = 1
    store.csv("plots/power_curve_scatter.csv", ("wind_speed", "power", "removed"),
              zip(series["wind_speed"], series["power"], removed))
    _emit(summary)


def _supervised(cfg, series, fconf):
    return build_supervised(series, fconf.variant, fconf.lookback, fconf.horizon, cfg.seed,
                            cfg.ingest.split)


def _save_model(store: ResultStore, model, data):
    fc.save(model, store.root / "model.json")
    report = fc.evaluate(model, data)
    store.json("metrics.json", report.to_dict())
    store.csv("metrics.csv", ("split", "metric", "value"), report.rows())
    store.csv("history.csv", ("epoch", "train_loss", "val_rmse"),
              ([h["epoch"], h["train_loss"], h["val_rmse"]] for h in model.history))
    return report


def cmd_train(cfg, args, out: Path):
    series = _read(cfg, args.input)
    fconf = cfg.forecaster_config()
    data = _supervised(cfg, series, fconf)
    model = fc.train(fconf, data)
    store = ResultStore(out)
    store.json("config.json", cfg.to_dict())
    report = _save_model(store, model, data)
    _emit({"model": str(out / "model.json"), "best_epoch": model.best_epoch,
           "metrics": report.to_dict()})


def cmd_tune(cfg, args, out: Path):
    series = _read(cfg, args.input)
    base = cfg.forecaster_config(max_epochs=cfg.search.max_epochs)
    data = _supervised(cfg, series, base)
    fitness = LstmFitness(data, base, eval_seed=cfg.seed)
    best, trace = tune(fitness, cfg.search.settings(), seed=cfg.seed, jobs=cfg.jobs)
    store = ResultStore(out)
    store.json("config.json", cfg.to_dict())
    trace.write_json(out / "trace.json")
    trace.write_csv(out / "trace.csv")
    chosen = fitness.config(best.params)
    store.json("best.json", {"fitness": best.fitness, "params": best.params,
                             "config": chosen.to_dict(), "evaluations": trace.evaluations})
    model = fc.train(chosen, data)
    report = _save_model(store, model, data)
    _emit({"best_val_rmse": best.fitness, "params": best.params,
           "evaluations": trace.evaluations, "metrics": report.to_dict()})


def _forecast_frame(model, series):
    c = model.config
    starts = valid_starts(series, c.lookback, c.horizon)
    if len(starts) == 0:
        raise InsufficientDataError("no complete input window in the file")
    X, y, t, _, _ = window_features(series, c.variant, c.lookback, c.horizon,
                                    model.norm_stats, starts)
    return fc.predict(model, X), y, t


def cmd_forecast(cfg, args, out: Path):
    model = fc.load(args.model)
    series = _read(cfg, args.input, required=model.config.variant.features)
    pred, _, t = _forecast_frame(model, series)
    c = model.config
    starts = valid_starts(series, c.lookback, c.horizon)
    measured = series["power"][starts + c.lookback + c.horizon - 1]
    has_measured = bool(np.isfinite(measured).any())
    header = ["timestamp", "predicted_kw"] + (["measured_kw"] if has_measured else [])
    rows = ([ti, pk] + ([mk] if has_measured else [])
            for ti, pk, mk in zip(t, model.denormalize(pred), measured))
    ResultStore(out).csv("predictions.csv", header, rows)
    _emit({"predictions": str(out / "predictions.csv"), "rows": int(len(pred))})


def _read_predictions(path, n):
    with open(path, newline="") as fh:
        rows = list(csv.DictReader(fh))
    if len(rows) != n or (rows and "predicted_kw" not in rows[0]):
        raise UsageError(f"{path}: expected {n} rows with a predicted_kw column")
    return np.array([float(r["predicted_kw"]) for r in rows])


def cmd_evaluate(cfg, args, out: Path):
    model = fc.load(args.model)
    c = model.config
    series = _read(cfg, args.input, required=tuple(set(c.variant.features) | {"power"}))
    pred, y, _ = _forecast_frame(model, series)
    if args.predictions:
        kw = _read_predictions(args.predictions, len(pred))
        pred = model.norm_stats.normalize("power", kw)
    seed = c.seed if args.split_seed is None else args.split_seed
    splits = dict(zip(("train", "validation", "test"),
                      split_indices(len(y), seed, cfg.ingest.split)))
    report = fc.MetricReport({s: fc.score_split(model, pred[idx], y[idx])
                              for s, idx in splits.items()})
    store = ResultStore(out)
    store.json("metrics.json", report.to_dict())
    store.csv("metrics.csv", ("split", "metric", "value"), report.rows())
    _emit(report.to_dict())


def cmd_experiment(cfg, args, out: Path):
    report = run_experiment(args.kind, cfg, out)
    _emit({"run_dir": str(out), "complete": report["complete"], "errors": report["errors"]})
    return 0 if report["complete"] else 1


def cmd_report_plots(cfg, args, out: Path):
    from .plots import emit_plot_data
    files = emit_plot_data(args.run_dir)
    _emit({"files": files})


COMMANDS = {
    "synth": cmd_synth,
    "ingest": cmd_ingest,
    "filter": cmd_filter,
    "train": cmd_train,
    "tune": cmd_tune,
    "forecast": cmd_forecast,
    "evaluate": cmd_evaluate,
    "experiment": cmd_experiment,
    "report-plots": cmd_report_plots,
}


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return int(exc.code or 0)
    logging.basicConfig(level=logging.INFO if getattr(args, "verbose", False) else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = _resolve(args)
        if args.command == "report-plots":
            out = Path(args.run_dir)
        else:
            out = _run_dir(cfg, args)
        code = COMMANDS[args.command](cfg, args, out)
        return int(code or 0)
    except (UsageError, *USAGE_ERRORS) as exc:
        print(f"windcast: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # noqa: BLE001 - last-resort handler for the exit-code contract
        log.debug("internal error", exc_info=True)
        print(f"windcast: internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
