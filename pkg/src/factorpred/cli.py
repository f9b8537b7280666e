"""factorpred command line tool.

    factorpred simulate  --config c.json --out DIR [--seed N]
    factorpred fit       --config c.json --out DIR [--seed N]
    factorpred benchmark --config c.json --out DIR [--seed N] [--jobs N]
    factorpred report    --config c.json --out DIR

The config is a JSON object; keys outside the schema are rejected. A single
file may hold the keys of several commands. The config hash written into
every output is taken over the config after the --seed override, without
``jobs`` (which never changes results).
"""

from __future__ import annotations

import argparse
import json
import logging
import os
import sys
from dataclasses import fields
from typing import Optional

import numpy as np

from . import io as fio
from .methods import FitContext, as_spec, fit_method
from .model import Dataset, validate_params
from .plot import risk_chart
from .risk import (MC_COLUMNS, RESULT_COLUMNS, DesignPoint, exact_excess_risk,
                   prediction_diagnostics, run_benchmark, summarize)

log = logging.getLogger("factorpred")

COMMANDS = ("simulate", "fit", "benchmark", "report")
CONFIG_KEYS = {"command", "seed", "design", "designs", "grid", "methods", "reps", "n_mc",
               "write_z", "plot", "data", "theta", "results", "jobs"}
DESIGN_KEYS = {f.name for f in fields(DesignPoint)}
GRID_KEYS = {"vary", "values"}
GRID_PARAMS = ("n", "p", "k", "m", "loading_scale")
PLOT_KEYS = {"x", "log_x", "log_y", "title", "file"}
SUMMARY_COLUMNS = ("design", "method", "count", "median", "q25", "q75", "iqr", "median_rank",
                   "frac_rank_eq_k")
ERROR_COLUMNS = ("design", "method", "rep", "error")
TIMING_COLUMNS = ("design", "method", "rep", "seconds")


class ConfigError(ValueError):
    pass


def _check_keys(obj, allowed: set, where: str) -> None:
    if not isinstance(obj, dict):
        raise ConfigError(f"{where} must be a JSON object")
    extra = sorted(set(obj) - allowed)
    if extra:
        raise ConfigError(f"unknown key(s) in {where}: {', '.join(extra)}")


def load_config(path: str, command: str, seed: Optional[int] = None) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            cfg = json.load(fh)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path!r}: {exc.strerror}") from exc
    except json.JSONDecodeError as exc:
        raise ConfigError(f"{path}: invalid JSON at line {exc.lineno}, column {exc.colno}: "
                          f"{exc.msg}") from exc
    _check_keys(cfg, CONFIG_KEYS, "config")
    if cfg.get("command", command) != command:
        raise ConfigError(f"config is for {cfg['command']!r}, not {command!r}")
    if seed is not None:
        cfg["seed"] = seed
    cfg.setdefault("seed", 0)
    if not isinstance(cfg["seed"], int) or cfg["seed"] < 0:
        raise ConfigError("seed must be a nonnegative integer")
    if "design" in cfg:
        _check_keys(cfg["design"], DESIGN_KEYS, "design")
    for i, d in enumerate(cfg.get("designs", [])):
        _check_keys(d, DESIGN_KEYS, f"designs[{i}]")
    if "grid" in cfg:
        _check_keys(cfg["grid"], GRID_KEYS, "grid")
        if cfg["grid"].get("vary") not in GRID_PARAMS:
            raise ConfigError(f"grid.vary must be one of {', '.join(GRID_PARAMS)}")
        if not cfg["grid"].get("values"):
            raise ConfigError("grid.values must be a non-empty list")
    if "plot" in cfg:
        _check_keys(cfg["plot"], PLOT_KEYS, "plot")
    base = os.path.dirname(os.path.abspath(path))
    for key in ("data", "theta", "results"):
        if key in cfg and not os.path.isabs(cfg[key]):
            cfg[key] = os.path.normpath(os.path.join(base, cfg[key]))
    return cfg


def hash_of(cfg: dict) -> str:
    return fio.config_hash({k: v for k, v in cfg.items() if k != "jobs"})


def _design(d: dict) -> DesignPoint:
    try:
        return DesignPoint(**d)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"bad design {d}: {exc}") from exc


def design_grid(cfg: dict) -> list:
    if "designs" in cfg:
        if "grid" in cfg:
            raise ConfigError("give either designs or grid, not both")
        return [_design(d) for d in cfg["designs"]]
    base = dict(cfg.get("design", {}))
    grid = cfg.get("grid")
    if grid is None:
        return [_design(base)]
    return [_design({**base, grid["vary"]: v}) for v in grid["values"]]


def _methods(cfg: dict) -> list:
    methods = cfg.get("methods")
    if not methods:
        raise ConfigError("no methods")
    try:
        return [as_spec(m) for m in methods]
    except (TypeError, ValueError) as exc:
        raise ConfigError(str(exc)) from exc


# ---------------------------------------------------------------------------

def cmd_simulate(cfg: dict, out: str) -> list:
    designs = design_grid(cfg)
    if len(designs) != 1:
        raise ConfigError("simulate takes a single design")
    design, seed, chash = designs[0], cfg["seed"], hash_of(cfg)
    theta, data = design.draw(seed)
    fio.ensure_dir(out)
    written = []

    def path(name):
        written.append(os.path.join(out, name))
        return written[-1]

    fio.write_matrix(path("X.csv"), data.x, fio.numbered("p", data.p), chash, seed)
    fio.write_matrix(path("Y.csv"), data.y, ["y"], chash, seed)
    if cfg.get("write_z", True):
        fio.write_matrix(path("Z.csv"), data.z, fio.numbered("z", theta.k), chash, seed)
    design_dict = {f.name: getattr(design, f.name) for f in fields(DesignPoint)}
    fio.write_json(path("theta.json"), fio.theta_to_dict(theta, seed, chash, design_dict))
    return written


def load_dataset(data_dir: str) -> Dataset:
    x, _, _ = fio.read_matrix(os.path.join(data_dir, "X.csv"))
    y, yh, _ = fio.read_matrix(os.path.join(data_dir, "Y.csv"))
    if y.shape[1] != 1:
        raise fio.CSVFormatError(f"Y.csv must have one column, found {len(yh)}")
    if y.shape[0] != x.shape[0]:
        raise fio.CSVFormatError(f"X.csv has {x.shape[0]} rows but Y.csv has {y.shape[0]}")
    return Dataset(x, y[:, 0])


def cmd_fit(cfg: dict, out: str) -> list:
    if "data" not in cfg:
        raise ConfigError("fit needs 'data', the directory holding X.csv and Y.csv")
    methods = _methods(cfg)
    data = load_dataset(cfg["data"])
    theta_path = cfg.get("theta", os.path.join(cfg["data"], "theta.json"))
    theta = None
    if os.path.exists(theta_path):
        theta = fio.read_theta(theta_path)
        report = validate_params(theta)
        if not report.valid or theta.p != data.p:
            raise ConfigError(f"{theta_path} does not describe this data: "
                              f"{report.violations or 'dimension mismatch'}")
    seed, chash = cfg["seed"], hash_of(cfg)
    ctx = FitContext(theta=theta, seed=seed)

    alphas, tags = [], []
    meta = {"config": chash, "seed": seed, "n": data.n, "p": data.p, "fits": []}
    for spec in methods:
        try:
            pred = fit_method(spec, data, ctx)
        except Exception as exc:  # keep the other methods; the failure goes in fit_meta
            log.warning("%s failed: %s", spec.tag, exc)
            meta["fits"].append({"method": spec.tag, "tuning": spec.tuning,
                                 "error": f"{type(exc).__name__}: {exc}"})
            continue
        resid = data.y - data.x @ pred.alpha
        diag = prediction_diagnostics(pred, data, ctx.svd(data))
        entry = {
            "method": spec.tag,
            "selected_rank": pred.selected_rank,
            "tuning": spec.tuning,
            "train_max_abs_residual": float(np.abs(resid).max()),
            "diagnostics": None if diag is None else
            {"r_hat": diag.r_hat, "eta_hat": diag.eta_hat, "psi_hat": diag.psi_hat},
            "details": {k: v for k, v in pred.meta.items() if k != "method_tag"},
        }
        if theta is not None:
            entry["excess_risk"] = exact_excess_risk(theta, pred.alpha)
        meta["fits"].append(entry)
        alphas.append(pred.alpha)
        tags.append(spec.tag)
    if not alphas:
        raise RuntimeError("every method failed: "
                           + "; ".join(f"{f['method']}: {f['error']}" for f in meta["fits"]))

    fio.ensure_dir(out)
    a_path, m_path = os.path.join(out, "alpha.csv"), os.path.join(out, "fit_meta.json")
    fio.write_matrix(a_path, np.column_stack(alphas), tags, chash, seed)
    fio.write_json(m_path, meta)
    return [a_path, m_path]


def _x_values(summary_rows: list, results: list, x: str) -> dict:
    """Design -> plotted x value; 'snr' uses the mean SNR over replications."""
    per = {}
    for r in results:
        per.setdefault(r["design"], []).append(float(r[x]))
    return {d: float(np.mean(v)) if x == "snr" else v[0] for d, v in per.items()}


def _write_chart(cfg: dict, out: str, summary: list, results: list, default_x: Optional[str],
                 chash: str) -> Optional[str]:
    plot = cfg.get("plot")
    if plot is None:
        return None
    x = plot.get("x", default_x)
    if x not in GRID_PARAMS + ("snr",):
        raise ConfigError("plot.x must name a design parameter or 'snr'")
    svg = risk_chart(summary, _x_values(summary, results, x), x,
                     log_x=plot.get("log_x", False), log_y=plot.get("log_y", True),
                     title=plot.get("title", ""), note=f"config={chash} seed={cfg['seed']}")
    path = os.path.join(out, plot.get("file", "risk.svg"))
    with open(path, "w", encoding="utf-8", newline="\n") as fh:
        fh.write(svg)
    return path


def cmd_benchmark(cfg: dict, out: str, jobs: int = 1) -> list:
    methods = _methods(cfg)
    designs = design_grid(cfg)
    tags = [d.tag for d in designs]
    if len(set(tags)) != len(tags):
        raise ConfigError(f"design labels repeat: {tags}")
    reps = cfg.get("reps", 100)
    seed, chash = cfg["seed"], hash_of(cfg)
    n_mc = cfg.get("n_mc")
    fio.ensure_dir(out)
    table = run_benchmark(designs, methods, reps, seed, n_mc=n_mc, jobs=jobs)

    cols = RESULT_COLUMNS + (MC_COLUMNS if n_mc else ())
    files = {name: os.path.join(out, name) for name in
             ("results.csv", "summary.csv", "errors.csv", "timings.csv")}
    fio.write_records(files["results.csv"], cols, table.rows, chash, seed)
    fio.write_records(files["summary.csv"], SUMMARY_COLUMNS, table.summary(), chash, seed)
    fio.write_records(files["errors.csv"], ERROR_COLUMNS, table.errors, chash, seed)
    fio.write_records(files["timings.csv"], TIMING_COLUMNS, table.timings, chash, seed)
    for e in table.errors:
        log.warning("failed cell %s / %s / rep %s: %s", e["design"], e["method"], e["rep"],
                    e["error"])
    written = list(files.values())
    chart = _write_chart(cfg, out, table.summary(), table.rows,
                         cfg.get("grid", {}).get("vary"), chash)
    if chart:
        written.append(chart)
    return written


_INT_COLUMNS = {"n", "p", "k", "rep", "seed", "selected_rank"}
_FLOAT_COLUMNS = {"loading_scale", "snr", "excess_risk", "mc_risk", "mc_std_error"}


def read_results(path: str) -> tuple[list, dict]:
    records, header, prov = fio.read_records(path)
    missing = {"design", "method", "excess_risk"} - set(header)
    if missing:
        raise fio.CSVFormatError(f"{path}: missing column(s) {sorted(missing)}")
    rows = []
    for i, rec in enumerate(records):
        row = {}
        for key, val in rec.items():
            try:
                if key in _INT_COLUMNS:
                    row[key] = int(val) if val != "" else None
                elif key in _FLOAT_COLUMNS:
                    row[key] = float(val) if val != "" else None
                else:
                    row[key] = val
            except ValueError:
                raise fio.CSVFormatError(f"{path}: data row {i + 1}, column {key!r}: "
                                         f"cannot parse {val!r}") from None
        rows.append(row)
    return rows, prov


def cmd_report(cfg: dict, out: str) -> list:
    path = cfg.get("results", os.path.join(out, "results.csv"))
    rows, prov = read_results(path)
    if not rows:
        raise ConfigError(f"{path} has no rows")
    chash = prov.get("config", hash_of(cfg))
    seed = prov.get("seed", cfg["seed"])
    fio.ensure_dir(out)
    summary = summarize(rows)
    s_path = os.path.join(out, "summary.csv")
    fio.write_records(s_path, SUMMARY_COLUMNS, summary, chash, seed)
    written = [s_path]
    report_cfg = dict(cfg, seed=seed)
    if "plot" not in report_cfg:
        report_cfg["plot"] = {}
    default_x = None
    for x in GRID_PARAMS:
        if x in rows[0] and len({r[x] for r in rows}) > 1:
            default_x = x
            break
    if default_x is None and report_cfg["plot"].get("x") is None:
        return written
    chart = _write_chart(report_cfg, out, summary, rows, default_x, chash)
    written.append(chart)
    return written


# ---------------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="factorpred",
                                 description="Prediction under latent factor regression models.")
    ap.add_argument("command", choices=COMMANDS)
    ap.add_argument("--config", required=True, help="JSON configuration file")
    ap.add_argument("--out", required=True, help="output directory")
    ap.add_argument("--seed", type=int, default=None, help="override the config seed")
    ap.add_argument("--jobs", type=int, default=None,
                    help="worker processes for benchmark (FACTORPRED_JOBS overrides)")
    ap.add_argument("-v", "--verbose", action="store_true")
    return ap


def resolve_jobs(flag: Optional[int], cfg: dict) -> int:
    env = os.environ.get("FACTORPRED_JOBS")
    if env:
        try:
            jobs = int(env)
        except ValueError:
            raise ConfigError(f"FACTORPRED_JOBS must be an integer, got {env!r}") from None
    else:
        jobs = flag if flag is not None else cfg.get("jobs", 1)
    if jobs < 1:
        raise ConfigError("jobs must be at least 1")
    return jobs


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    try:
        cfg = load_config(args.config, args.command, args.seed)
        if args.command == "simulate":
            written = cmd_simulate(cfg, args.out)
        elif args.command == "fit":
            written = cmd_fit(cfg, args.out)
        elif args.command == "benchmark":
            written = cmd_benchmark(cfg, args.out, resolve_jobs(args.jobs, cfg))
        else:
            written = cmd_report(cfg, args.out)
    except (ConfigError, fio.CSVFormatError) as exc:
        print(f"factorpred: error: {exc}", file=sys.stderr)
        return 2
    except Exception as exc:  # report, don't dump a traceback on the user
        if args.verbose:
            raise
        print(f"factorpred: error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return 1
    for path in written:
        print(path)
    return 0


if __name__ == "__main__":
    sys.exit(main())
