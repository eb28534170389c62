"""Plot-ready tidy CSVs built from a finished run directory.

Files written under ``<run>/plots/``:

``power_curve_scatter.csv``
    wind_speed, power, removed (1 if the outlier filter dropped the row).
``grid_surface_<model>.csv``
    batch_size, learning_rate, mse, r (test split) for model-comparison runs;
    ``grid_surface_search-r<k>.csv`` holds validation mse and r for grid-search traces.
``convergence_<method>-r<k>.csv``
    evaluation, best (best-so-far fitness, non-increasing).
``predicted_vs_measured_<name>.csv``
    timestamp, predicted_kw, measured_kw.
"""

from __future__ import annotations

import csv
import json
import shutil
from pathlib import Path
from typing import List

import numpy as np

from .errors import NoDataError
from .ingest import parse_csv


def _write(path: Path, header, rows):
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for r in rows:
            w.writerow(["" if v is None else repr(v) if isinstance(v, float) else v for v in r])


def emit_plot_data(run_dir) -> List[str]:
    run = Path(run_dir)
    report_path = run / "report.json"
    if not report_path.is_file():
        raise NoDataError(f"{run}: no report.json; nothing to plot")
    report = json.loads(report_path.read_text())
    if not report.get("results") and not (run / "data" / "filter_report.json").is_file():
        raise NoDataError(f"{run}: the run holds no results")
    plots = run / "plots"
    written: List[str] = []

    raw_csv, freport = run / "data" / "raw.csv", run / "data" / "filter_report.json"
    if raw_csv.is_file() and freport.is_file():
        series = parse_csv(raw_csv)
        removed = np.zeros(len(series), dtype=int)
        removed[json.loads(freport.read_text())["removed"]] = 1
        p = plots / "power_curve_scatter.csv"
        _write(p, ("wind_speed", "power", "removed"),
               ((float(u), float(w), int(r))
                for u, w, r in zip(series["wind_speed"], series["power"], removed)))
        written.append(str(p.relative_to(run)))

    rows = report.get("results", [])
    if report.get("kind") == "model-comparison":
        for model in sorted({r["model"] for r in rows}):
            p = plots / f"grid_surface_{model}.csv"
            _write(p, ("batch_size", "learning_rate", "mse", "r"),
                   ([r["batch_size"], r["learning_rate"],
                     (r.get("metrics") or {}).get("test", {}).get("mse"),
                     (r.get("metrics") or {}).get("test", {}).get("r")]
                    for r in rows if r["model"] == model))
            written.append(str(p.relative_to(run)))

    for r in rows:
        if not r.get("trace"):
            continue
        trace = json.loads((run / r["trace"]).read_text())
        tag = Path(r["trace"]).stem
        p = plots / f"convergence_{tag}.csv"
        _write(p, ("evaluation", "best"), _convergence(trace))
        written.append(str(p.relative_to(run)))
        if trace["algorithm"] == "grid":
            p = plots / f"grid_surface_search-r{r['repeat']}.csv"
            _write(p, ("batch_size", "learning_rate", "mse", "r"),
                   ([c["params"]["batch_size"], c["params"]["learning_rate"],
                     c["info"].get("val_mse"), c["info"].get("val_r")]
                    for c in trace["candidates"]))
            written.append(str(p.relative_to(run)))

    for r in rows:
        if r.get("predictions"):
            src = run / r["predictions"]
            p = plots / f"predicted_vs_measured_{src.stem}.csv"
            shutil.copyfile(src, p)
            written.append(str(p.relative_to(run)))
    return written


def _convergence(trace: dict):
    best = float("inf")
    for k, c in enumerate(trace["candidates"], start=1):
        f = c["fitness"]
        if f is not None and f < best:
            best = f
        yield [k, best if np.isfinite(best) else None]
