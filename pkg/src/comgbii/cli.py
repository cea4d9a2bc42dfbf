"""Command-line interface: ``comgbii {fit,simulate,gof,risk,predict,report}``.

Every subcommand writes its artifacts under ``--out`` with fixed names:

  model.json      fitted model (parameters, covariance, formula, encoding)
  fit_table.csv   parameter,estimate,se,z,p_value
  trace.csv       iteration,objective,grad_norm,max_h,rho,lambda,inner_iter,inner_status
  gof.json        goodness-of-fit report
  gof_table.csv   statistic,value,p_value
  qq.csv          theoretical,empirical
  qq.svg          normal QQ plot of the quantile residuals
  risk.csv        model,level,empirical_var,model_var,var_diff_pct,empirical_tvar,model_tvar,tvar_diff_pct
  bic_risk.csv    model,bic,level,model_var,model_tvar
  predict.csv     row,partition,y,var_<q>...
  mse.csv         q,partition,mse
  replicates.csv  replicate,status,nll,<parameters>...,error
  simulate_summary.csv  parameter,truth,n,median,q1,q3,lower_whisker,upper_whisker,n_outside
  model_table.csv model,n_params,nll,aic,bic,aic_rank,bic_rank,status

Exit codes: 0 success, 1 input error, 2 numeric non-convergence (artifacts
are still written), 3 internal error.
"""

from __future__ import annotations

import argparse
import csv
import json
import logging
import math
import sys
from concurrent.futures import ProcessPoolExecutor
from pathlib import Path
from typing import Optional

import numpy as np

from . import diagnostics
from .dataio import (
    Schema,
    design_matrix,
    load_config,
    parse_formula,
    read_csv,
    simulate_composite,
    simulate_mixture,
    split_indices,
    write_csv,
)
from .errors import ComGbiiError, ConvergenceError, DataError, DomainError, NonFiniteError, SingularHessianError
from .families import ALPHA_NAMES, ROSTER
from .regression import FitConfig, RegressionModel, fit, predict_var, wald_table

__all__ = ["main", "build_parser"]

log = logging.getLogger("comgbii")

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_NONCONVERGED = 2
EXIT_INTERNAL = 3

DEFAULT_LEVELS = (0.95, 0.99)
PREDICT_LEVELS = (0.2, 0.4, 0.5, 0.6, 0.8)
SIM_TRUTH_BETA = (2.0, 0.5, 0.2)
SIM_TRUTH_ALPHA = tuple(math.log(v) for v in (1.5, 1.0, 2.0, 1.5, 2.0, 1.5))

# keys a --config document may carry besides the schema block
_CONFIG_KEYS = {
    "data", "schema", "formula", "family", "out", "seed", "threads", "boot",
    "levels", "replicates", "model", "n", "design", "restarts",
}


class InputError(Exception):
    """Bad command-line input (exit code 1)."""


# ---------------------------------------------------------------------------
# parsing
# ---------------------------------------------------------------------------


def _levels(text: str) -> list[float]:
    try:
        vals = [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"levels must be comma-separated numbers, got {text!r}") from None
    if not vals or not all(0.0 < v < 1.0 for v in vals):
        raise argparse.ArgumentTypeError("every level must lie strictly between 0 and 1")
    return vals


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="TOML or JSON file whose keys override the flags")
    common.add_argument("--out", default=".", help="output directory (default: current directory)")
    common.add_argument("--seed", type=int, default=None, help="random seed")
    common.add_argument("--threads", type=int, default=1, help="worker processes (default 1 for bit-stable output)")
    common.add_argument("-v", "--verbose", action="store_true", help="log progress to stderr")

    data = argparse.ArgumentParser(add_help=False)
    data.add_argument("--data", help="input CSV with a header row")
    data.add_argument("--schema", help="schema file (JSON or TOML): response, covariates, family, split")
    data.add_argument("--formula", help='model formula such as "loss ~ 1" or "y ~ x1 + x2"')

    parser = argparse.ArgumentParser(
        prog="comgbii",
        description="Composite GBII regression for heavy-tailed positive losses.",
        epilog=__doc__.split("\n\n", 1)[1],
        formatter_class=argparse.RawDescriptionHelpFormatter,
    )
    sub = parser.add_subparsers(dest="command", required=True)
    fmt = argparse.RawDescriptionHelpFormatter

    p = sub.add_parser("fit", parents=[common, data], formatter_class=fmt,
                       help="fit a composite model", description="Writes model.json, fit_table.csv and trace.csv.")
    p.add_argument("--family", default=None, choices=list(ROSTER), help="composite family (default ComGBII)")
    p.add_argument("--restarts", type=int, default=None, help="jittered restarts (default 5)")

    p = sub.add_parser("simulate", parents=[common], formatter_class=fmt, help="replicated simulation study",
                       description="Writes replicates.csv, simulate_summary.csv and sample.csv (first replicate's data).")
    p.add_argument("--design", choices=("composite", "mixture"), default="composite",
                   help="composite: data from the composite regression with fixed truth; mixture: Gamma body with a GPD tail")
    p.add_argument("--family", default=None, choices=list(ROSTER), help="family fitted to each replicate")
    p.add_argument("--replicates", type=int, default=None, help="number of replicates (default 100)")
    p.add_argument("--n", type=int, default=None, help="sample size per replicate (default 2000)")
    p.add_argument("--restarts", type=int, default=None, help="jittered restarts per fit (default 0)")

    p = sub.add_parser("gof", parents=[common, data], formatter_class=fmt, help="goodness-of-fit with bootstrap p-values",
                       description="Writes gof.json, gof_table.csv, qq.csv and qq.svg.")
    p.add_argument("--model", help="model.json (default: <out>/model.json)")
    p.add_argument("--boot", type=int, default=None, help="bootstrap replicates (default 2000)")

    p = sub.add_parser("risk", parents=[common, data], formatter_class=fmt, help="VaR/TVaR against the sample",
                       description="Writes risk.csv and bic_risk.csv.")
    p.add_argument("--model", action="append", help="model.json; repeat to compare several (default: <out>/model.json)")
    p.add_argument("--levels", type=_levels, default=None, help="comma-separated levels (default 0.95,0.99)")

    p = sub.add_parser("predict", parents=[common, data], formatter_class=fmt, help="per-row VaR predictions and MSE",
                       description="Writes predict.csv and mse.csv.  When the model was fitted on a split, "
                                   "the same split is rebuilt and MSE is reported for both partitions.")
    p.add_argument("--model", help="model.json (default: <out>/model.json)")
    p.add_argument("--levels", type=_levels, default=None, help="comma-separated quantile levels (default 0.2,0.4,0.5,0.6,0.8)")

    p = sub.add_parser("report", parents=[common], formatter_class=fmt, help="model-selection table",
                       description="Writes model_table.csv ranking the given models by AIC and BIC.")
    p.add_argument("--model", action="append", help="model.json files (default: <out>/model.json)")
    return parser


def _apply_config(args: argparse.Namespace) -> argparse.Namespace:
    """Overlay a --config document on the parsed flags."""
    if not args.config:
        return args
    doc = load_config(args.config)
    for key, value in doc.items():
        if key in ("response", "covariates", "split") or key == "family" and isinstance(value, dict):
            continue
        if key not in _CONFIG_KEYS:
            raise InputError(f"unknown config key {key!r}")
        if key == "levels" and not isinstance(value, list):
            value = _levels(str(value))
        if key == "model" and isinstance(value, str) and args.command in ("risk", "report"):
            value = [value]
        setattr(args, key, value)
    args.config_doc = doc
    return args


def _family_from(doc: dict) -> Optional[str]:
    fam = doc.get("family")
    if fam is None or isinstance(fam, str):
        return fam
    if "name" in fam:
        return fam["name"]
    for name, f in ROSTER.items():
        if f.head == fam.get("head") and f.tail == fam.get("tail"):
            return name
    raise InputError(f"no roster family has head {fam.get('head')!r} and tail {fam.get('tail')!r}")


# ---------------------------------------------------------------------------
# helpers
# ---------------------------------------------------------------------------


def _write_rows(path: Path, header: list[str], rows) -> None:
    with path.open("w", newline="", encoding="utf-8") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])


def _fmt(v):
    if isinstance(v, (float, np.floating)):
        v = float(v)
        return "" if math.isnan(v) else repr(v)
    if v is None:
        return ""
    return v


def _write_json(path: Path, doc) -> None:
    path.write_text(json.dumps(doc, indent=2, sort_keys=True) + "\n", encoding="utf-8")


def _out_dir(args) -> Path:
    out = Path(args.out)
    out.mkdir(parents=True, exist_ok=True)
    return out


def _schema_doc(args) -> dict:
    doc = {}
    if args.schema:
        doc.update(load_config(args.schema))
    doc.update({k: v for k, v in getattr(args, "config_doc", {}).items() if k in ("response", "covariates", "family", "split")})
    return doc


def _load_data(args, formula: Optional[str] = None, encoding: Optional[dict] = None):
    """Read the dataset and build the design matrix.

    Returns (dataset, design, formula, schema document, covariates).
    """
    if not args.data:
        raise InputError("--data is required")
    if not Path(args.data).is_file():
        raise InputError(f"data file not found: {args.data}")
    doc = _schema_doc(args)
    formula = getattr(args, "formula", None) or formula
    covariates = None
    response = doc.get("response")
    if formula:
        response, covariates = parse_formula(formula)
    if "covariates" in doc or response is not None:
        schema_doc = {"response": response or doc.get("response"), "covariates": doc.get("covariates", [])}
        if covariates is not None:
            typed = {c["name"] if isinstance(c, dict) else c: c for c in schema_doc["covariates"]}
            schema_doc["covariates"] = [typed.get(name, {"name": name, "type": "categorical" if encoding and name in encoding else "numeric"}) for name in covariates]
        schema = Schema.from_dict(schema_doc)
        ds = read_csv(args.data, schema)
    else:
        ds = read_csv(args.data)
    if covariates is None:
        covariates = list(ds.columns) if "covariates" in doc else []
    if not formula:
        formula = f"{ds.response_name} ~ " + (" + ".join(covariates) if covariates else "1")
    dm = design_matrix(ds, covariates, encoding)
    return ds, dm, formula, doc, covariates


def _load_model(path) -> RegressionModel:
    p = Path(path)
    if not p.is_file():
        raise InputError(f"model file not found: {p}")
    return RegressionModel.from_json(p.read_text(encoding="utf-8"))


def _model_paths(args) -> list[str]:
    m = args.model
    if m is None:
        return [str(Path(args.out) / "model.json")]
    return [m] if isinstance(m, str) else list(m)


def _design_for(model: RegressionModel, args):
    cfg = model.config or {}
    ds, dm, _, _, _ = _load_data(args, formula=cfg.get("formula"), encoding=cfg.get("encoding"))
    if list(dm.names) != list(model.covariate_names):
        raise InputError(f"design columns {dm.names} do not match the model's {list(model.covariate_names)}")
    return ds, dm


def _fit_config(args, restarts_default: int, compute_se: bool = True) -> FitConfig:
    restarts = args.restarts if getattr(args, "restarts", None) is not None else restarts_default
    return FitConfig(restarts=restarts, compute_se=compute_se)


# ---------------------------------------------------------------------------
# fit
# ---------------------------------------------------------------------------


def cmd_fit(args) -> int:
    out = _out_dir(args)
    ds, dm, formula, doc, _ = _load_data(args)
    family = args.family or _family_from(doc) or "ComGBII"
    split_cfg = doc.get("split")
    X_fit, y_fit = dm.matrix, ds.y
    if split_cfg:
        # levels come from the full data so the columns match at prediction time
        train_idx, _ = split_indices(ds.n, float(split_cfg["ratio"]), split_cfg.get("seed"))
        X_fit, y_fit = dm.matrix[train_idx], ds.y[train_idx]
    config = _fit_config(args, 5)
    model, report = fit(y_fit, X_fit, family, config, seed=args.seed, covariate_names=dm.names)
    model.config = {
        **model.config,
        "formula": formula,
        "encoding": dm.encoding,
        "split": split_cfg,
        "seed": args.seed,
        "aic": report.aic,
        "bic": report.bic,
        "n_params": report.n_params,
        "grad_norm": report.grad_norm,
        "max_violation": report.max_violation,
        "se_error": report.se_error,
    }
    (out / "model.json").write_text(model.to_json() + "\n", encoding="utf-8")
    rows = wald_table(model)
    _write_rows(out / "fit_table.csv", ["parameter", "estimate", "se", "z", "p_value"],
                [[r["parameter"], r["estimate"], r["se"], r["z"], r["p_value"]] for r in rows])
    trace_cols = ["iteration", "objective", "grad_norm", "max_h", "rho", "lambda", "inner_iter", "inner_status"]
    _write_rows(out / "trace.csv", trace_cols,
                [[t.get(c) if c != "lambda" else ";".join(repr(float(v)) for v in np.atleast_1d(t.get(c, []))) for c in trace_cols]
                 for t in report.trace])
    print(f"{family}: status={report.status} nll={report.nll:.4f} aic={report.aic:.2f} bic={report.bic:.2f} "
          f"n={model.n} params={report.n_params}")
    _print_table(["parameter", "estimate", "se", "z", "p_value"],
                 [[r["parameter"], r["estimate"], r["se"], r["z"], r["p_value"]] for r in rows])
    if report.status != "converged":
        log.warning("solver status %s: treat the estimates with care", report.status)
        return EXIT_NONCONVERGED
    return EXIT_OK


def _print_table(header, rows) -> None:
    cells = [[str(h) for h in header]] + [[_cell(v) for v in row] for row in rows]
    widths = [max(len(r[j]) for r in cells) for j in range(len(header))]
    for r in cells:
        print("  ".join(c.rjust(w) if j else c.ljust(w) for j, (c, w) in enumerate(zip(r, widths))))


def _cell(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "nan" if math.isnan(v) else f"{float(v):.4f}"
    return str(v)


# ---------------------------------------------------------------------------
# simulate
# ---------------------------------------------------------------------------


def _sim_replicate(task):
    index, design, n, family, seed_seq, config = task
    rng = np.random.default_rng(seed_seq)
    if design == "composite":
        ds = simulate_composite(n, SIM_TRUTH_BETA, SIM_TRUTH_ALPHA, seed=rng)
    else:
        ds = simulate_mixture(n, max(1, n // 10), seed=rng)
    dm = design_matrix(ds, list(ds.columns))
    try:
        model, report = fit(ds.y, dm.matrix, family, config, seed=int(rng.integers(2**31)), covariate_names=dm.names)
    except (ComGbiiError, ArithmeticError) as exc:
        return index, None, None, f"{type(exc).__name__}: {exc}"
    return index, model.to_dict(), report.status, None


def cmd_simulate(args) -> int:
    out = _out_dir(args)
    n_rep = 100 if args.replicates is None else int(args.replicates)
    n = 2000 if args.n is None else int(args.n)
    if n_rep < 1 or n < 20:
        raise InputError("need --replicates >= 1 and --n >= 20")
    family = args.family or "ComGBII"
    config = _fit_config(args, 0, compute_se=False)
    children = np.random.SeedSequence(args.seed).spawn(n_rep)
    tasks = [(i, args.design, n, family, children[i], config) for i in range(n_rep)]
    first = simulate_composite(n, SIM_TRUTH_BETA, SIM_TRUTH_ALPHA, seed=np.random.default_rng(children[0])) \
        if args.design == "composite" else simulate_mixture(n, max(1, n // 10), seed=np.random.default_rng(children[0]))
    write_csv(first, out / "sample.csv")
    if args.threads > 1:
        with ProcessPoolExecutor(max_workers=args.threads) as pool:
            results = list(pool.map(_sim_replicate, tasks))
    else:
        results = [_sim_replicate(t) for t in tasks]
    k = len(SIM_TRUTH_BETA) if args.design == "composite" else 3
    names = [f"beta{j}" for j in range(k)] + [f"alpha_{a}" for a in ALPHA_NAMES]
    rows = []
    estimates = {name: [] for name in names}
    failures = 0
    for index, md, status, err in sorted(results, key=lambda r: r[0]):
        if md is None:
            failures += 1
            rows.append([index, "failed", math.nan] + [math.nan] * len(names) + [err])
            continue
        vals = list(md["beta"]) + [md["alpha"][a] for a in ALPHA_NAMES]
        for name, v in zip(names, vals):
            estimates[name].append(v)
        rows.append([index, status, md["nll"]] + vals + [""])
    _write_rows(out / "replicates.csv", ["replicate", "status", "nll"] + names + ["error"], rows)
    truth = list(SIM_TRUTH_BETA) + list(SIM_TRUTH_ALPHA) if args.design == "composite" else [math.nan] * len(names)
    summary = [[name, t] + _box_summary(estimates[name]) for name, t in zip(names, truth)]
    header = ["parameter", "truth", "n", "median", "q1", "q3", "lower_whisker", "upper_whisker", "n_outside"]
    _write_rows(out / "simulate_summary.csv", header, summary)
    _print_table(header, summary)
    if failures:
        log.warning("%d of %d replicate fits failed", failures, n_rep)
    return EXIT_OK


def _box_summary(values) -> list:
    """n, median, quartiles, Tukey whiskers (1.5 IQR) and the count outside them."""
    v = np.asarray(values, dtype=float)
    if v.size == 0:
        return [0] + [math.nan] * 5 + [0]
    q1, med, q3 = np.quantile(v, [0.25, 0.5, 0.75])
    iqr = q3 - q1
    lo_fence, hi_fence = q1 - 1.5 * iqr, q3 + 1.5 * iqr
    inside = v[(v >= lo_fence) & (v <= hi_fence)]
    return [int(v.size), float(med), float(q1), float(q3), float(inside.min()), float(inside.max()),
            int(v.size - inside.size)]


# ---------------------------------------------------------------------------
# gof
# ---------------------------------------------------------------------------


def qq_svg(theoretical, empirical, title: str = "Normal QQ plot of quantile residuals", size: int = 400) -> str:
    """Standalone SVG scatter of QQ pairs with the identity line."""
    t = np.asarray(theoretical, dtype=float)
    e = np.asarray(empirical, dtype=float)
    lo = float(min(t.min(), e.min())) if t.size else -3.0
    hi = float(max(t.max(), e.max())) if t.size else 3.0
    if hi - lo < 1e-12:
        lo, hi = lo - 1.0, hi + 1.0
    pad = 40

    def sx(v):
        return pad + (v - lo) / (hi - lo) * (size - 2 * pad)

    def sy(v):
        return size - pad - (v - lo) / (hi - lo) * (size - 2 * pad)

    parts = [
        f'<svg xmlns="http://www.w3.org/2000/svg" width="{size}" height="{size}" viewBox="0 0 {size} {size}">',
        f'<rect width="{size}" height="{size}" fill="white"/>',
        f'<text x="{size / 2:.1f}" y="20" text-anchor="middle" font-family="sans-serif" font-size="13">{title}</text>',
        f'<rect x="{pad}" y="{pad}" width="{size - 2 * pad}" height="{size - 2 * pad}" fill="none" stroke="black"/>',
        f'<line x1="{sx(lo):.2f}" y1="{sy(lo):.2f}" x2="{sx(hi):.2f}" y2="{sy(hi):.2f}" stroke="red" stroke-width="1"/>',
        f'<text x="{size / 2:.1f}" y="{size - 10}" text-anchor="middle" font-family="sans-serif" font-size="11">theoretical</text>',
        f'<text x="12" y="{size / 2:.1f}" transform="rotate(-90 12 {size / 2:.1f})" text-anchor="middle" '
        f'font-family="sans-serif" font-size="11">empirical</text>',
    ]
    for a, b in zip(t, e):
        parts.append(f'<circle cx="{sx(a):.2f}" cy="{sy(b):.2f}" r="1.5" fill="steelblue"/>')
    parts.append("</svg>")
    return "\n".join(parts) + "\n"


def cmd_gof(args) -> int:
    out = _out_dir(args)
    model = _load_model(_model_paths(args)[0])
    ds, dm = _design_for(model, args)
    if dm.matrix.shape[1] != 1:
        raise InputError("gof applies to intercept-only (distribution) fits")
    n_boot = 2000 if args.boot is None else int(args.boot)
    if n_boot < 1:
        raise InputError("--boot must be at least 1")
    rep = diagnostics.gof_tests(ds.y, model, n_boot=n_boot, seed=args.seed, threads=args.threads)
    _write_json(out / "gof.json", rep.to_dict())
    table = [["ks", rep.ks, rep.p_ks], ["ad", rep.ad, rep.p_ad], ["cvm", rep.cvm, rep.p_cvm], ["qq_r", rep.qq_correlation, math.nan]]
    _write_rows(out / "gof_table.csv", ["statistic", "value", "p_value"], table)
    theo, emp, r = diagnostics.qq_data(model, ds.y, dm.matrix)
    _write_rows(out / "qq.csv", ["theoretical", "empirical"], zip(theo, emp))
    (out / "qq.svg").write_text(qq_svg(theo, emp), encoding="utf-8")
    _print_table(["statistic", "value", "p_value"], table)
    if rep.n_failed:
        print(f"{rep.n_failed} of {n_boot} bootstrap refits failed")
    return EXIT_OK


# ---------------------------------------------------------------------------
# risk
# ---------------------------------------------------------------------------


def cmd_risk(args) -> int:
    out = _out_dir(args)
    levels = args.levels or list(DEFAULT_LEVELS)
    risk_rows, grid_rows = [], []
    for path in _model_paths(args):
        model = _load_model(path)
        ds, dm = _design_for(model, args)
        comps = diagnostics.risk_comparison(model, ds.y, levels)
        bic = 2.0 * model.nll + model.n_params * math.log(model.n) if model.n else math.nan
        for c in comps:
            risk_rows.append([model.family, c.level, c.empirical_var, c.model_var, c.var_diff_pct,
                              c.empirical_tvar, c.model_tvar, c.tvar_diff_pct])
            grid_rows.append([model.family, bic, c.level, c.model_var, c.model_tvar])
    header = ["model", "level", "empirical_var", "model_var", "var_diff_pct", "empirical_tvar", "model_tvar", "tvar_diff_pct"]
    _write_rows(out / "risk.csv", header, risk_rows)
    _write_rows(out / "bic_risk.csv", ["model", "bic", "level", "model_var", "model_tvar"], grid_rows)
    _print_table(header, risk_rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# predict
# ---------------------------------------------------------------------------


def cmd_predict(args) -> int:
    out = _out_dir(args)
    levels = args.levels or list(PREDICT_LEVELS)
    model = _load_model(_model_paths(args)[0])
    ds, dm = _design_for(model, args)
    split_cfg = (model.config or {}).get("split")
    partition = np.array(["all"] * ds.n, dtype=object)
    if split_cfg:
        train_idx, test_idx = split_indices(ds.n, float(split_cfg["ratio"]), split_cfg.get("seed"))
        partition[train_idx] = "train"
        partition[test_idx] = "test"
    preds = {q: predict_var(model, dm.matrix, q) for q in levels}
    rows = [[i + 1, partition[i], ds.y[i]] + [preds[q][i] for q in levels] for i in range(ds.n)]
    _write_rows(out / "predict.csv", ["row", "partition", "y"] + [f"var_{q:g}" for q in levels], rows)
    mse_rows = []
    for q in levels:
        for part in sorted(set(partition)):
            mask = partition == part
            mse_rows.append([q, part, float(np.sum((ds.y[mask] - preds[q][mask]) ** 2))])
    _write_rows(out / "mse.csv", ["q", "partition", "mse"], mse_rows)
    _print_table(["q", "partition", "mse"], mse_rows)
    return EXIT_OK


# ---------------------------------------------------------------------------
# report
# ---------------------------------------------------------------------------


def cmd_report(args) -> int:
    out = _out_dir(args)
    entries = []
    for path in _model_paths(args):
        model = _load_model(path)
        if not model.n:
            raise InputError(f"{path}: model has no sample size; was it fitted?")
        aic, bic = diagnostics.aic_bic(model.nll, model.n_params, model.n)
        entries.append([model.family, model.n_params, model.nll, aic, bic, model.status])
    aic_rank = _ranks([e[3] for e in entries])
    bic_rank = _ranks([e[4] for e in entries])
    rows = [e[:5] + [a, b, e[5]] for e, a, b in zip(entries, aic_rank, bic_rank)]
    header = ["model", "n_params", "nll", "aic", "bic", "aic_rank", "bic_rank", "status"]
    _write_rows(out / "model_table.csv", header, rows)
    _print_table(header, rows)
    return EXIT_OK


def _ranks(values) -> list[int]:
    order = np.argsort(values, kind="stable")
    ranks = np.empty(len(values), dtype=int)
    ranks[order] = np.arange(1, len(values) + 1)
    return [int(r) for r in ranks]


COMMANDS = {
    "fit": cmd_fit,
    "simulate": cmd_simulate,
    "gof": cmd_gof,
    "risk": cmd_risk,
    "predict": cmd_predict,
    "report": cmd_report,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INPUT
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(name)s: %(message)s")
    try:
        args = _apply_config(args)
        if args.threads < 1:
            raise InputError("--threads must be at least 1")
        return COMMANDS[args.command](args)
    except (InputError, DataError, DomainError, argparse.ArgumentTypeError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except (ConvergenceError, NonFiniteError, SingularHessianError) as exc:
        print(f"numeric failure: {exc}", file=sys.stderr)
        return EXIT_NONCONVERGED
    except Exception as exc:  # the exit-code contract reserves 3 for anything unexpected
        log.exception("internal error")
        print(f"internal error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_INTERNAL


if __name__ == "__main__":
    sys.exit(main())
