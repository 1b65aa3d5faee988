"""Command-line interface: ``idma simulate | fit | tune``.

Reports are JSON documents with a ``schema`` tag. Everything except the
``timing`` block is a deterministic function of the inputs and the seed,
whatever ``--jobs`` is. Exit codes: 0 success, 1 runtime failure, 2 usage
or validation failure.
"""

from __future__ import annotations

import argparse
import configparser
import csv
import json
import logging
import math
import os
import re
import sys
import time
from datetime import datetime, timezone
from pathlib import Path

import numpy as np

from . import __version__
from . import estimator as est
from . import simulation as sim
from . import tuning
from ._backend import BACKEND
from .errors import IdmaError, SchemaError, ValidationError
from .model import Hyperparams, PanelData, residualize_on_covariates, standardize, validate_panel

log = logging.getLogger("idma")

SCHEMA_VERSION = 1
EXIT_OK, EXIT_RUNTIME, EXIT_USAGE = 0, 1, 2

# config-file keys and the flag destinations they map to
CONFIG_KEYS = {
    "setting": int, "n": int, "p": int, "t": int, "reps": int, "seed": int, "rank": str,
    "lambda_f": str, "lambda_b": float, "crossfit": "bool", "cf": str, "data": str,
    "out": str, "jobs": int, "folds": int, "standardize": "bool", "verbose": "bool",
}


class UsageError(Exception):
    """Bad command-line or configuration input (exit code 2)."""


# ---------------------------------------------------------------- arguments

def _parser():
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--seed", type=int, default=None,
                        help="master seed (falls back to $IDMA_SEED, then 0)")
    common.add_argument("--rank", default=None, help="factor rank: integer or 'auto' (default 2)")
    common.add_argument("--lambda-f", dest="lambda_f", default=None,
                        help="fusion penalty; a comma list is a grid for 'tune'")
    common.add_argument("--lambda-b", dest="lambda_b", type=float, default=None,
                        help="outcome penalty (default: 5-fold CV)")
    common.add_argument("--cf", default=None,
                        help="subgroup count (0 = none); a comma list is a grid for 'tune'")
    common.add_argument("--crossfit", action="store_true", default=None,
                        help="average two half-sample fits instead of one full-sample fit")
    common.add_argument("--config", default=None, help="key = value file; flags override it")
    common.add_argument("--out", default=None, help="report path (default: stdout)")
    common.add_argument("--jobs", type=int, default=None,
                        help="worker processes (default: all cores); never changes results")
    common.add_argument("-v", "--verbose", action="store_true", default=None)

    parser = argparse.ArgumentParser(prog="idma", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=f"idma {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    s = sub.add_parser("simulate", parents=[common], help="Monte Carlo campaign on a simulation setting")
    s.add_argument("--setting", type=int, choices=(1, 2), default=None)
    s.add_argument("--n", type=int, default=None)
    s.add_argument("--p", type=int, default=None)
    s.add_argument("--t", type=int, default=None, help="time points (default 5)")
    s.add_argument("--reps", type=int, default=None)

    for name, text in (("fit", "fit a panel CSV"), ("tune", "BIC tuning over (lambda_f, c_f) on a panel CSV")):
        f = sub.add_parser(name, parents=[common], help=text)
        f.add_argument("--data", default=None, help="long-format CSV: id,time,x,y,z_*,m_*")
        f.add_argument("--no-standardize", dest="standardize", action="store_false", default=None,
                       help="skip pooled z-scoring of y, x and mediators")
        f.add_argument("--folds", type=int, default=None)
    return parser


def _read_config(path):
    cp = configparser.ConfigParser(interpolation=None)
    try:
        text = Path(path).read_text(encoding="utf-8")
    except OSError as exc:
        raise UsageError(f"cannot read config file {path}: {exc}") from exc
    try:
        cp.read_string("[idma]\n" + text)
    except configparser.Error as exc:
        raise UsageError(f"malformed config file {path}: {exc}") from exc
    out = {}
    for key, raw in cp["idma"].items():
        key = key.replace("-", "_")
        if key not in CONFIG_KEYS:
            raise UsageError(f"unknown config key '{key}' in {path}")
        kind = CONFIG_KEYS[key]
        try:
            if kind == "bool":
                out[key] = cp["idma"].getboolean(key)
            else:
                out[key] = kind(raw)
        except ValueError as exc:
            raise UsageError(f"config key '{key}': {exc}") from exc
    return out


def resolve_args(ns, environ=None):
    """Merge flags over the config file over the environment over defaults."""
    environ = os.environ if environ is None else environ
    cfg = _read_config(ns.config) if ns.config else {}
    merged = dict(cfg)
    for key, val in vars(ns).items():
        if val is not None and key != "config":
            merged[key] = val
    if merged.get("seed") is None:
        env = environ.get("IDMA_SEED")
        if env not in (None, ""):
            try:
                merged["seed"] = int(env)
            except ValueError as exc:
                raise UsageError(f"IDMA_SEED must be an integer, got {env!r}") from exc
    defaults = {"seed": 0, "rank": "2", "crossfit": False, "jobs": os.cpu_count() or 1,
                "verbose": False, "t": 5, "standardize": True, "folds": 5}
    for key, val in defaults.items():
        merged.setdefault(key, val)
    merged["command"] = ns.command
    data = merged.get("data")
    if data is not None and not Path(data).is_file():
        raise UsageError(f"--data: no such file {data}")
    if merged["seed"] < 0:
        raise UsageError("--seed must be nonnegative")
    if merged["jobs"] < 1:
        raise UsageError("--jobs must be >= 1")
    merged["rank"] = _parse_rank(merged["rank"])
    return merged


def _parse_rank(v):
    v = str(v).strip().lower()
    if v == "auto":
        return "auto"
    try:
        r = int(v)
    except ValueError as exc:
        raise UsageError(f"--rank must be an integer or 'auto', got {v!r}") from exc
    if r < 1:
        raise UsageError("--rank must be positive")
    return r


def _parse_list(v, cast, name):
    if v is None:
        return None
    parts = [s.strip() for s in str(v).split(",")]
    if not parts or any(s == "" for s in parts):
        raise UsageError(f"malformed {name} list {v!r}")
    try:
        vals = [cast(s) for s in parts]
    except ValueError as exc:
        raise UsageError(f"malformed {name} list {v!r}: {exc}") from exc
    if any(isinstance(x, float) and not math.isfinite(x) for x in vals) or min(vals) < 0:
        raise UsageError(f"{name} values must be finite and nonnegative")
    return vals


def _scalar(v, cast, name):
    vals = _parse_list(v, cast, name)
    if vals is None:
        return None
    if len(vals) != 1:
        raise UsageError(f"{name} takes a single value for this command")
    return vals[0]


# --------------------------------------------------------------------- CSV

_M_COL = re.compile(r"^m_(\d+)$")
_Z_COL = re.compile(r"^z_(\d+)$")


def read_panel_csv(path):
    """Parse a long-format panel CSV. Returns ``(PanelData, ids, mediator_names, covariate_names)``.

    One row per (id, time); times must be 1..T for every id. Violations
    raise :class:`SchemaError` naming the offending row, column or cell.
    """
    try:
        fh = open(path, newline="", encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot open {path}: {exc}") from exc
    with fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise SchemaError(f"{path} is empty") from None
        rows = list(reader)
    for col in ("id", "time", "x", "y"):
        if col not in header:
            raise SchemaError(f"missing required column '{col}'")
    if len(set(header)) != len(header):
        raise SchemaError("duplicate column names in header")
    m_cols = sorted((int(_M_COL.match(h).group(1)), h) for h in header if _M_COL.match(h))
    z_cols = sorted((int(_Z_COL.match(h).group(1)), h) for h in header if _Z_COL.match(h))
    extra = [h for h in header if h not in ("id", "time", "x", "y") and not _M_COL.match(h)
             and not _Z_COL.match(h)]
    if extra:
        raise SchemaError(f"unexpected column(s): {', '.join(extra)}")
    if not m_cols:
        raise SchemaError("no mediator columns (m_1..m_p)")
    for label, cols in (("m", m_cols), ("z", z_cols)):
        idx = [k for k, _ in cols]
        if idx != list(range(1, len(idx) + 1)):
            raise SchemaError(f"{label}_ columns must be numbered 1..{len(idx)} without gaps")
    pos = {h: j for j, h in enumerate(header)}
    m_names = [h for _, h in m_cols]
    z_names = [h for _, h in z_cols]
    cells = {}
    for lineno, row in enumerate(rows, start=2):
        if not row or all(not c.strip() for c in row):
            continue
        if len(row) != len(header):
            raise SchemaError(f"row {lineno}: expected {len(header)} fields, got {len(row)}")
        key_id = row[pos["id"]].strip()
        if key_id == "":
            raise SchemaError(f"row {lineno}: empty id")
        try:
            t = int(row[pos["time"]])
        except ValueError:
            raise SchemaError(f"row {lineno}, column 'time': not an integer ({row[pos['time']]!r})") from None
        vals = {}
        for col in ["x", "y"] + z_names + m_names:
            raw = row[pos[col]].strip()
            try:
                v = float(raw)
            except ValueError:
                raise SchemaError(f"row {lineno}, column '{col}': not a number ({raw!r})") from None
            if not math.isfinite(v):
                raise SchemaError(f"row {lineno}, column '{col}': non-finite value")
            vals[col] = v
        if (key_id, t) in cells:
            raise SchemaError(f"row {lineno}: duplicate (id={key_id}, time={t})")
        cells[(key_id, t)] = vals
    if not cells:
        raise SchemaError("no data rows")
    ids = sorted({i for i, _ in cells}, key=lambda s: (0, int(s)) if s.lstrip("-").isdigit() else (1, s))
    T = max(t for _, t in cells)
    for i in ids:
        for t in range(1, T + 1):
            if (i, t) not in cells:
                raise SchemaError(f"missing cell (id={i}, time={t}); times must be 1..{T} for every id")
    bad = [(i, t) for i, t in cells if not 1 <= t <= T]
    if bad:
        raise SchemaError(f"time out of range at (id={bad[0][0]}, time={bad[0][1]})")
    n, p, q = len(ids), len(m_names), len(z_names)
    y = np.empty((n, T))
    x = np.empty((n, T))
    m = np.empty((n, T, p))
    z = np.empty((n, T, q)) if q else None
    for a, i in enumerate(ids):
        for t in range(T):
            c = cells[(i, t + 1)]
            y[a, t], x[a, t] = c["y"], c["x"]
            m[a, t] = [c[h] for h in m_names]
            if q:
                z[a, t] = [c[h] for h in z_names]
    return PanelData(y, m, x, z), ids, m_names, z_names


def write_panel_csv(path, panel: PanelData, ids=None):
    """Write a panel in the long format read by :func:`read_panel_csv`."""
    ids = list(range(1, panel.n + 1)) if ids is None else ids
    q = panel.q
    header = ["id", "time", "x", "y"] + [f"z_{j + 1}" for j in range(q)] + [f"m_{k + 1}" for k in range(panel.p)]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(header)
        for a, i in enumerate(ids):
            for t in range(panel.T):
                row = [i, t + 1, repr(float(panel.x[a, t])), repr(float(panel.y[a, t]))]
                if q:
                    row += [repr(float(v)) for v in panel.z[a, t]]
                row += [repr(float(v)) for v in panel.m[a, t]]
                w.writerow(row)


# ----------------------------------------------------------------- reports

def _clean(obj):
    """JSON-safe copy: arrays to lists, non-finite floats to None."""
    if isinstance(obj, dict):
        return {str(k): _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return v if math.isfinite(v) else None
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def _header(kind, cfg, extra):
    hyper_keys = ("seed", "rank", "lambda_f", "lambda_b", "cf", "crossfit", "folds", "standardize")
    return {
        "software": {"name": "idma", "version": __version__},
        "command": kind,
        "settings": {k: cfg.get(k) for k in hyper_keys if k in cfg},
        **extra,
    }


# Required top-level keys per report kind; "timing" is the only block that
# varies between identical runs.
REPORT_KEYS = {
    "simulate": ("header", "metrics", "aggregates", "failures", "rows"),
    "fit": ("header", "selected", "factors", "loadings", "subgroups", "effects", "diagnostics", "tuning"),
    "tune": ("header", "lambda_r", "rank", "lambda_b", "best", "candidates", "skipped"),
}


def validate_report(doc):
    """Check a parsed report against its documented layout; return its kind."""
    if not isinstance(doc, dict):
        raise SchemaError("report must be a JSON object")
    tag = doc.get("schema")
    m = re.fullmatch(r"idma\.(simulate|fit|tune)/(\d+)", str(tag))
    if not m:
        raise SchemaError(f"unrecognized schema tag {tag!r}")
    kind, version = m.group(1), int(m.group(2))
    if version != SCHEMA_VERSION:
        raise SchemaError(f"schema version {version} is not supported (expected {SCHEMA_VERSION})")
    missing = [k for k in REPORT_KEYS[kind] + ("timing",) if k not in doc]
    if missing:
        raise SchemaError(f"{tag} report lacks key(s): {', '.join(missing)}")
    if kind == "fit":
        dims = doc["header"]["dims"]
        shape = np.shape(doc["effects"]["gamma"])
        if shape != (dims["n"], dims["T"], dims["p"]):
            raise SchemaError(f"gamma has shape {shape}, header says {(dims['n'], dims['T'], dims['p'])}")
    return kind


def _emit(report, cfg, started):
    report = {"schema": f"idma.{cfg['command']}/{SCHEMA_VERSION}", **report}
    report["timing"] = {
        "created": datetime.now(timezone.utc).isoformat(timespec="seconds"),
        "wall_seconds": round(time.perf_counter() - started, 3),
        "backend": BACKEND,
        "jobs": cfg["jobs"],
    }
    text = json.dumps(_clean(report), indent=1, sort_keys=True, allow_nan=False) + "\n"
    out = cfg.get("out")
    if out:
        Path(out).parent.mkdir(parents=True, exist_ok=True)
        Path(out).write_text(text, encoding="utf-8")
    else:
        sys.stdout.write(text)


def _metrics_csv_path(out):
    path = Path(out)
    return path.with_name(path.stem + ".metrics.csv")


def _write_metrics_csv(path, rows):
    cols = ["method", "rep"] + list(sim.METRICS) + ["error"]
    with open(path, "w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh)
        w.writerow(cols)
        for r in rows:
            vals = [r.method, r.rep]
            for key in sim.METRICS:
                v = getattr(r, key)
                vals.append("" if v is None or not math.isfinite(v) else repr(float(v)))
            vals.append(r.error or "")
            w.writerow(vals)


# ---------------------------------------------------------------- commands

def _hyper_from(cfg, lambda_f=None, c_f=None):
    kw = dict(rank=cfg["rank"], crossfit=bool(cfg["crossfit"]), seed=int(cfg["seed"]),
              folds=int(cfg.get("folds", 5)))
    if cfg.get("lambda_b") is not None:
        kw["lambda_b"] = float(cfg["lambda_b"])
    if lambda_f is not None:
        kw["lambda_f"] = float(lambda_f)
    if c_f is not None:
        kw["c_f"] = int(c_f)
    try:
        return Hyperparams(**kw)
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc


def cmd_simulate(cfg):
    started = time.perf_counter()
    for key in ("setting", "n", "p", "reps"):
        if cfg.get(key) is None:
            raise UsageError(f"simulate needs --{key}")
    if cfg["setting"] not in (1, 2):
        raise UsageError("--setting must be 1 or 2")
    if cfg["reps"] < 1:
        raise UsageError("--reps must be >= 1")
    if cfg["n"] < 4 or cfg["p"] < (8 if cfg["setting"] == 1 else 4) or cfg["t"] < 2:
        raise UsageError("need n >= 4, t >= 2 and p >= 8 (setting 1) or p >= 4 (setting 2)")
    lf = _scalar(cfg.get("lambda_f"), float, "--lambda-f")
    cf_vals = _parse_list(cfg.get("cf"), int, "--cf")
    grid = None
    if lf is None:
        hyper = None
        if cf_vals is not None or cfg["rank"] != 2 or cfg["crossfit"] or cfg.get("lambda_b") is not None:
            hyper = _hyper_from(cfg).with_(lambda_f=None)
        if cf_vals is not None:
            grid = tuning.TuneGrid(c_f_grid=tuple(cf_vals), folds=cfg["folds"])
    else:
        if cf_vals is not None and len(cf_vals) != 1:
            raise UsageError("--cf takes a single value when --lambda-f is fixed")
        hyper = _hyper_from(cfg, lf, cf_vals[0] if cf_vals else 0)
    rep = sim.run_replications(cfg["setting"], cfg["n"], cfg["p"], cfg["reps"], T=cfg["t"],
                               seed=cfg["seed"], hyper=hyper, grid=grid, jobs=cfg["jobs"])
    rows = []
    for r in rep.rows:
        d = {k: getattr(r, k) for k in ("method", "rep") + tuple(sim.METRICS)}
        d["error"] = r.error
        d["details"] = r.extra or {}
        rows.append(d)
    aggregates = {m: {k: v for k, v in a.items() if k != "runtime_seconds"}
                  for m, a in rep.aggregates.items()}
    report = {
        "header": _header("simulate", cfg, {
            "setting": cfg["setting"], "n": cfg["n"], "p": cfg["p"], "T": cfg["t"],
            "reps": cfg["reps"], "tuned": hyper is None or hyper.lambda_f is None}),
        "metrics": list(sim.METRICS),
        "aggregates": aggregates,
        "failures": rep.failures,
        "rows": rows,
    }
    _emit(report, cfg, started)
    if cfg.get("out"):
        _write_metrics_csv(_metrics_csv_path(cfg["out"]), rep.rows)
    failed = sum(rep.failures.values())
    if failed:
        log.warning("%d replication(s) failed; see the report rows", failed)
    return EXIT_OK


def _load(cfg):
    if not cfg.get("data"):
        raise UsageError(f"{cfg['command']} needs --data PATH")
    panel, ids, m_names, z_names = read_panel_csv(cfg["data"])
    validate_panel(panel)
    adj, _ = residualize_on_covariates(panel)
    scaling = None
    if cfg["standardize"]:
        adj, scaling = standardize(adj)
    return panel, adj, ids, m_names, z_names, scaling


def _original_scale(coef, scaling):
    """Undo standardization: alpha by m_sd/x_sd, beta by y_sd/m_sd, theta and gamma by y_sd/x_sd."""
    if scaling is None:
        return coef.alpha, coef.beta, coef.theta, coef.gamma
    ms = np.asarray(scaling.m_sds)
    alpha = coef.alpha * ms / scaling.x_sd
    beta = coef.beta * scaling.y_sd / ms
    theta = coef.theta * scaling.y_sd / scaling.x_sd
    return alpha, beta, theta, alpha * beta


def _fit_report(cfg, fit, panel, ids, m_names, z_names, scaling, tuned=None):
    alpha, beta, theta, gamma = _original_scale(fit.coefficients, scaling)
    fm = fit.factor_model
    return {
        "header": _header("fit", cfg, {
            "data": os.path.basename(cfg["data"]),
            "dims": {"n": panel.n, "T": panel.T, "p": panel.p, "q": panel.q},
            "ids": ids, "mediators": m_names, "covariates": z_names,
            "standardized": scaling is not None,
            "hyperparameters": {"rank": fit.rank, "lambda_r": fit.lambda_r, "lambda_f": fit.lambda_f,
                                "lambda_b": fit.lambda_b, "c_f": fit.c_f,
                                "crossfit": bool(cfg["crossfit"]), "seed": int(cfg["seed"])},
        }),
        "selected": [m_names[k] for k in fit.selected],
        "factors": fm.factors,
        "loadings": {"a": fm.loading_a, "b": fm.loading_b, "c": fm.loading_c},
        "subgroups": fit.labels,
        "effects": {"scale": "original" if scaling is not None else "input",
                    "alpha": alpha, "beta": beta, "theta": theta, "gamma": gamma},
        "diagnostics": {
            "singular_values": fit.singular_values,
            "distinct_factor_rows": fit.distinct_factor_rows,
            "df_f": fit.df_f, "df_b": fit.df_b,
            "losses": {"mediator": fit.losses[0], "outcome": fit.losses[1]},
            "converged": fit.converged,
            "cv_curve": fit.cv_curve,
        },
        "tuning": tuned,
    }


def _candidates(report):
    return [{"lambda_f": c.lambda_f, "c_f": c.c_f, "loss_m": c.loss_m, "loss_y": c.loss_y,
             "df_f": c.df_f, "df_b": c.df_b, "score": c.score, "lambda_b": c.lambda_b,
             "error": c.error} for c in report.candidates]


def cmd_fit(cfg):
    started = time.perf_counter()
    panel, adj, ids, m_names, z_names, scaling = _load(cfg)
    lf = _scalar(cfg.get("lambda_f"), float, "--lambda-f")
    cf = _scalar(cfg.get("cf"), int, "--cf")
    tuned = None
    if lf is None:
        grid = tuning.TuneGrid(c_f_grid=(cf,) if cf is not None else tuning.TuneGrid().c_f_grid,
                               folds=min(cfg["folds"], adj.n))
        base = _hyper_from(cfg).with_(lambda_f=None)
        if base.crossfit:
            chosen, rep = tuning.tune_bic(adj, grid, base.with_(crossfit=False))
            fit = est.fit_idma(adj, chosen.with_(crossfit=True))
        else:
            chosen, rep, fit = tuning.tune_bic(adj, grid, base, return_fit=True)
        tuned = {"best": rep.best, "candidates": _candidates(rep)}
    else:
        fit = est.fit_idma(adj, _hyper_from(cfg, lf, cf or 0))
    _emit(_fit_report(cfg, fit, panel, ids, m_names, z_names, scaling, tuned), cfg, started)
    return EXIT_OK


def cmd_tune(cfg):
    started = time.perf_counter()
    panel, adj, ids, m_names, z_names, scaling = _load(cfg)
    lf_grid = _parse_list(cfg.get("lambda_f"), float, "--lambda-f")
    cf_grid = _parse_list(cfg.get("cf"), int, "--cf")
    try:
        grid = tuning.TuneGrid(lambda_f_grid=tuple(lf_grid) if lf_grid else None,
                               c_f_grid=tuple(cf_grid) if cf_grid else tuning.TuneGrid().c_f_grid,
                               folds=min(cfg["folds"], adj.n))
    except ValidationError as exc:
        raise UsageError(str(exc)) from exc
    base = _hyper_from(cfg).with_(crossfit=False)
    chosen, rep = tuning.tune_bic(adj, grid, base)
    best = rep.best_candidate
    report = {
        "header": _header("tune", cfg, {
            "data": os.path.basename(cfg["data"]),
            "dims": {"n": panel.n, "T": panel.T, "p": panel.p, "q": panel.q},
            "standardized": scaling is not None,
            "bic": {"c1": grid.bic_c1, "c2": grid.bic_c2}}),
        "lambda_r": rep.lambda_r,
        "rank": rep.rank,
        "lambda_b": chosen.lambda_b,
        "best": {"index": rep.best, "lambda_f": best.lambda_f, "c_f": best.c_f, "score": best.score},
        "candidates": _candidates(rep),
        "skipped": rep.skipped,
    }
    _emit(report, cfg, started)
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "tune": cmd_tune}


def main(argv=None):
    parser = _parser()
    try:
        ns = parser.parse_args(argv)
    except SystemExit as exc:  # argparse reports usage errors with code 2
        return int(exc.code or 0)
    try:
        cfg = resolve_args(ns)
        logging.basicConfig(level=logging.INFO if cfg["verbose"] else logging.WARNING,
                            format="idma: %(levelname)s: %(message)s", stream=sys.stderr)
        return COMMANDS[cfg["command"]](cfg)
    except UsageError as exc:
        parser.print_usage(sys.stderr)
        print(f"idma: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ValidationError as exc:
        print(f"idma: invalid input: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except (IdmaError, RuntimeError, ArithmeticError, OSError, ValueError) as exc:
        print(f"idma: failed: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
