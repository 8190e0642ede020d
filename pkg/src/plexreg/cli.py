"""Command-line front end: ``fit``, ``predict``, ``simulate`` and ``tune``.

Exit codes: 0 success, 2 input error, 3 solver failure.
"""

from __future__ import annotations

import argparse
import csv
import json
import sys
from dataclasses import replace
from pathlib import Path
from typing import Dict, List, Optional, Sequence

import numpy as np

from .penalty import PenaltySpec
from .sim import ScenarioSpec, render_table, report_to_json, run_experiment
from .solver import ConvergenceError, Dataset, SolverConfig, two_step_fit
from .spline import DesignMatrix, SplineSpec, build_design
from .tuning import lambda_grid, lambda_max, tune_by_cv, tune_by_validation

SCHEMA_VERSION = 1
DEFAULT_SEED = 20240101

PRESETS = {
    "table1-normal": dict(n=300, p=400, error_dist="normal"),
    "table1-t5": dict(n=300, p=400, error_dist="t5"),
    "table2-normal": dict(n=300, p=600, error_dist="normal"),
    "table2-t5": dict(n=300, p=600, error_dist="t5"),
}


class InputError(Exception):
    pass


# ---------------------------------------------------------------------------
# CSV / JSON helpers
# ---------------------------------------------------------------------------

def read_csv(path) -> Dict[str, np.ndarray]:
    path = Path(path)
    if not path.is_file():
        raise InputError(f"no such file: {path}")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise InputError(f"{path} is empty")
        rows = [r for r in reader if r]
    if len(set(header)) != len(header):
        raise InputError(f"{path} has duplicate column names")
    cols: Dict[str, List[str]] = {h: [] for h in header}
    for i, row in enumerate(rows, start=2):
        if len(row) != len(header):
            raise InputError(f"{path}:{i}: expected {len(header)} fields, got {len(row)}")
        for h, v in zip(header, row):
            cols[h].append(v.strip())
    return {h: v for h, v in cols.items()}


def numeric_columns(table, names: Sequence[str], path="input") -> np.ndarray:
    out = []
    for name in names:
        if name not in table:
            raise InputError(f"column {name!r} not found in {path}")
        vals = []
        for i, v in enumerate(table[name], start=2):
            if v == "":
                raise InputError(f"{path}:{i}: missing value in column {name!r}")
            try:
                x = float(v)
            except ValueError:
                raise InputError(f"{path}:{i}: non-numeric value {v!r} in column {name!r}")
            if not np.isfinite(x):
                raise InputError(f"{path}:{i}: non-finite value in column {name!r}")
            vals.append(x)
        out.append(vals)
    return np.ascontiguousarray(np.array(out, dtype=float).T.reshape(-1, len(names)))


def _split_names(s: Optional[str]) -> List[str]:
    return [c.strip() for c in s.split(",") if c.strip()] if s else []


def _write_text(path, text: str):
    if path in (None, "-"):
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def fit_to_json(fit, design: DesignMatrix, x_names, z_names, y_name, extra=None) -> Dict:
    comps = []
    for j, name in enumerate(z_names):
        b = design.blocks[j]
        coef = fit.xi[b]
        comps.append({
            "name": name,
            "lower": float(design.lower[j]),
            "upper": float(design.upper[j]),
            "knots": [float(k) for k in design.knots[j]],
            "coefficients": [float(c) for c in coef],
            "center": float(np.mean(design.Pi[:, b] @ coef)),
        })
    pen = fit.config.penalty
    doc = {
        "schema_version": SCHEMA_VERSION,
        "columns": {"y": y_name, "x": list(x_names), "z": list(z_names)},
        "model": {"alpha": fit.config.alpha,
                  "penalty": {"family": pen.family, "lambda": pen.lam, "shape": pen.shape}},
        "spline": {"order": design.spec.order, "internal_knots": design.spec.internal_knots,
                   "knot_rule": design.spec.knot_rule, "drop_first": design.spec.drop_first},
        "beta": {x_names[j]: float(fit.beta[j]) for j in fit.active_set},
        "intercept": fit.mu,
        "xi": [float(v) for v in fit.xi],
        "components": comps,
        "diagnostics": {
            "converged": bool(fit.converged),
            "outer_iters": int(fit.outer_iters),
            "kkt_max_residual": float(fit.kkt_max_residual),
            "objective_trace": [float(v) for v in fit.objective_trace],
            "active_set": [x_names[j] for j in fit.active_set],
            "n": int(fit.fitted.size),
        },
    }
    if extra:
        doc["tuning"] = extra
    return doc


def design_from_json(doc) -> DesignMatrix:
    try:
        sp = doc["spline"]
        spec = SplineSpec(order=int(sp["order"]), internal_knots=int(sp["internal_knots"]),
                          knot_rule=sp["knot_rule"], drop_first=bool(sp["drop_first"]))
        comps = doc["components"]
        lower = np.array([c["lower"] for c in comps], dtype=float)
        upper = np.array([c["upper"] for c in comps], dtype=float)
        knots = tuple(np.array(c["knots"], dtype=float) for c in comps)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"fit JSON does not match the schema: {exc}")
    J = spec.n_basis
    blocks = tuple(slice(1 + j * J, 1 + (j + 1) * J) for j in range(len(comps)))
    return DesignMatrix(Pi=np.empty((0, 1 + J * len(comps))), spec=spec, lower=lower,
                        upper=upper, knots=knots, blocks=blocks)


# ---------------------------------------------------------------------------
# argument handling
# ---------------------------------------------------------------------------

def _positive_int(s):
    v = int(s)
    if v < 1:
        raise argparse.ArgumentTypeError(f"expected a positive integer, got {s}")
    return v


def _alpha(s):
    v = float(s)
    if not 0 < v < 1:
        raise argparse.ArgumentTypeError(f"alpha must lie in (0, 1), got {s}")
    return v


def _add_model_args(p):
    p.add_argument("--alpha", type=_alpha, default=0.5, help="expectile level (default 0.5)")
    p.add_argument("--penalty", choices=["scad", "mcp", "l1", "none"], default="scad")
    p.add_argument("--scad-a", type=float, default=3.7)
    p.add_argument("--mcp-b", type=float, default=1.0)
    p.add_argument("--spline-order", type=int, default=4)
    p.add_argument("--knots", type=int, default=0, help="internal knots per covariate")
    p.add_argument("--knot-rule", choices=["uniform", "quantile"], default="uniform")
    p.add_argument("--max-outer", type=_positive_int, default=50)
    p.add_argument("--init", choices=["zero", "elasso"], default="elasso")
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)


def _add_data_args(p):
    p.add_argument("--data", required=True, help="input CSV with a header row")
    p.add_argument("--y", required=True, help="response column")
    p.add_argument("--x", default=None, help="comma-separated linear columns "
                   "(default: all columns not used as y or z)")
    p.add_argument("--z", required=True, help="comma-separated nonparametric columns")


def _add_tune_args(p, required=False):
    p.add_argument("--tune", default=None if not required else "cv:5",
                   help="'holdout' or 'cv:K' (default cv:5 for the tune command)")
    p.add_argument("--holdout-frac", type=float, default=0.25)
    p.add_argument("--n-lambda", type=_positive_int, default=50)
    p.add_argument("--lambda-eps", type=float, default=0.01)


def _shape(args):
    return {"scad": args.scad_a, "mcp": args.mcp_b}.get(args.penalty)


def _config(args, lam=0.0) -> SolverConfig:
    return SolverConfig(alpha=args.alpha, penalty=PenaltySpec(args.penalty, lam, _shape(args)),
                        max_outer=args.max_outer, init=args.init)


def _spline(args) -> SplineSpec:
    return SplineSpec(order=args.spline_order, internal_knots=args.knots,
                      knot_rule=args.knot_rule)


def _load_dataset(args):
    table = read_csv(args.data)
    z_names = _split_names(args.z)
    if not z_names:
        raise InputError("need at least one --z column")
    x_names = _split_names(args.x)
    if args.x is None:
        x_names = [c for c in table if c != args.y and c not in z_names]
    if not x_names:
        raise InputError("no linear (--x) columns")
    y = numeric_columns(table, [args.y], args.data)[:, 0]
    X = numeric_columns(table, x_names, args.data)
    Z = numeric_columns(table, z_names, args.data)
    return Dataset(y, X, Z), x_names, z_names


def _parse_tune(spec: str):
    if spec == "holdout":
        return "holdout", None
    if spec.startswith("cv:"):
        try:
            k = int(spec[3:])
        except ValueError:
            raise InputError(f"bad --tune value {spec!r}")
        return "cv", k
    raise InputError(f"--tune must be 'holdout' or 'cv:K', got {spec!r}")


def _run_tuning(args, ds: Dataset, spline: SplineSpec):
    mode, k = _parse_tune(args.tune)
    cfg = _config(args)
    design = build_design(ds.Z, spline)
    grid = lambda_grid(lambda_max(ds, design, args.alpha), args.n_lambda, args.lambda_eps)
    if mode == "cv":
        if k < 2 or k > ds.n:
            raise InputError(f"cv needs 2 <= K <= n, got K={k}, n={ds.n}")
        res = tune_by_cv(ds, k, grid, cfg, seed=args.seed, spline=spline)
    else:
        if not 0 < args.holdout_frac < 1:
            raise InputError("--holdout-frac must lie in (0, 1)")
        perm = np.random.default_rng(args.seed).permutation(ds.n)
        m = int(round(args.holdout_frac * ds.n))
        if m < 1 or ds.n - m < 2:
            raise InputError("holdout split leaves an empty part")
        tr, te = ds.subset(np.sort(perm[m:])), ds.subset(np.sort(perm[:m]))
        res = tune_by_validation(tr, te, grid, cfg, spline=spline)
    info = {"mode": args.tune, "seed": args.seed, "lambda": res.lam,
            "grid": [float(v) for v in res.grid],
            "losses": [float(v) if np.isfinite(v) else None for v in res.losses]}
    if res.fold_losses is not None:
        info["fold_losses"] = [[float(v) if np.isfinite(v) else None for v in row]
                               for row in res.fold_losses]
    return res.lam, info


# ---------------------------------------------------------------------------
# subcommands
# ---------------------------------------------------------------------------

def cmd_fit(args) -> int:
    ds, x_names, z_names = _load_dataset(args)
    spline = _spline(args)
    extra = None
    if args.tune:
        if args.penalty == "none":
            raise InputError("--tune needs a penalty other than 'none'")
        lam, extra = _run_tuning(args, ds, spline)
    elif args.penalty == "none":
        lam = 0.0
    elif args.lam is None:
        raise InputError("give --lambda or --tune")
    else:
        lam = args.lam
    design = build_design(ds.Z, spline)
    fit = two_step_fit(ds, design, _config(args, lam))
    doc = fit_to_json(fit, design, x_names, z_names, args.y, extra)
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def cmd_predict(args) -> int:
    try:
        doc = json.loads(Path(args.fit).read_text(encoding="utf-8"))
    except (OSError, json.JSONDecodeError) as exc:
        raise InputError(f"cannot read fit JSON {args.fit}: {exc}")
    if not isinstance(doc, dict) or doc.get("schema_version") != SCHEMA_VERSION:
        raise InputError(f"unsupported fit JSON schema_version {doc.get('schema_version')!r}")
    try:
        x_names, z_names = doc["columns"]["x"], doc["columns"]["z"]
        beta_map, xi = doc["beta"], np.array(doc["xi"], dtype=float)
    except (KeyError, TypeError, ValueError) as exc:
        raise InputError(f"fit JSON does not match the schema: {exc}")
    design = design_from_json(doc)
    if xi.size != 1 + design.spec.n_basis * len(z_names):
        raise InputError("fit JSON coefficient count does not match its spline layout")
    table = read_csv(args.data)
    X = numeric_columns(table, x_names, args.data)
    Z = numeric_columns(table, z_names, args.data)
    beta = np.array([beta_map.get(name, 0.0) for name in x_names], dtype=float)
    pred = X @ beta + design.evaluate(Z) @ xi
    lines = ["prediction"] + [repr(float(v)) for v in pred]
    _write_text(args.out, "\n".join(lines) + "\n")
    return 0


def _scenario(args) -> ScenarioSpec:
    base = dict(PRESETS[args.preset]) if args.preset else {}
    for key, val in (("n", args.n), ("p", args.p), ("error_dist", args.error)):
        if val is not None:
            base[key] = val
    if args.homo:
        base["heteroscedastic"] = False
    if args.alphas:
        base["alphas"] = tuple(float(a) for a in _split_names(args.alphas))
    if args.penalties:
        base["penalties"] = tuple(_split_names(args.penalties))
    base["replications"] = args.reps
    base["seed"] = args.seed
    base["n_lambda"] = args.n_lambda
    try:
        return ScenarioSpec(**base)
    except (TypeError, ValueError) as exc:
        raise InputError(f"invalid scenario: {exc}")


def cmd_simulate(args) -> int:
    scenario = _scenario(args)
    report = run_experiment(scenario, SolverConfig(max_outer=args.max_outer),
                            SplineSpec(order=args.spline_order, internal_knots=args.knots))
    _write_text(args.out, report_to_json(report) + "\n")
    table = render_table(report)
    if args.table:
        _write_text(args.table, table)
    if args.out not in (None, "-"):
        sys.stdout.write(table)
    return 0


def cmd_tune(args) -> int:
    ds, _, _ = _load_dataset(args)
    if args.penalty == "none":
        raise InputError("tuning needs a penalty other than 'none'")
    _, info = _run_tuning(args, ds, _spline(args))
    doc = {"schema_version": SCHEMA_VERSION, "alpha": args.alpha,
           "penalty": {"family": args.penalty, "shape": _shape(args)}, **info}
    _write_text(args.out, json.dumps(doc, indent=2, sort_keys=True) + "\n")
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="plexreg", description="Penalized partially linear additive expectile regression")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("fit", help="fit a model to CSV data")
    _add_data_args(p)
    _add_model_args(p)
    p.add_argument("--lambda", dest="lam", type=float, default=None)
    _add_tune_args(p)
    p.add_argument("--out", default="-", help="output JSON path (default stdout)")
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", help="predict conditional expectiles from a fit JSON")
    p.add_argument("--fit", required=True)
    p.add_argument("--data", required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("simulate", help="run the Monte Carlo study")
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--n", type=int, default=None)
    p.add_argument("--p", type=int, default=None)
    p.add_argument("--error", choices=["normal", "t5"], default=None)
    p.add_argument("--homo", action="store_true", help="homoscedastic errors")
    p.add_argument("--alphas", default=None, help="comma-separated expectile levels")
    p.add_argument("--penalties", default=None, help="comma-separated, from scad,mcp,l1")
    p.add_argument("--reps", type=_positive_int, default=50)
    p.add_argument("--seed", type=int, default=DEFAULT_SEED)
    p.add_argument("--n-lambda", type=_positive_int, default=50)
    p.add_argument("--max-outer", type=_positive_int, default=50)
    p.add_argument("--spline-order", type=int, default=4)
    p.add_argument("--knots", type=int, default=0)
    p.add_argument("--out", default="-", help="report JSON path (default stdout)")
    p.add_argument("--table", default=None, help="also write the text table here")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("tune", help="select lambda by cross-validation or holdout")
    _add_data_args(p)
    _add_model_args(p)
    _add_tune_args(p, required=True)
    p.add_argument("--out", default="-")
    p.set_defaults(func=cmd_tune)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    try:
        return args.func(args)
    except InputError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except ConvergenceError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return 3
    except ValueError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
