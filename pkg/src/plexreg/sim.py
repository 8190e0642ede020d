"""Monte Carlo design, evaluation metrics and the replication harness.

Covariates follow an AR(1)-correlated Gaussian ``x~ ~ N(0, Sigma)`` with
``Sigma_ij = 0.5^|i-j|`` of dimension p + 2, transformed as

* ``x1 = sqrt(12) Phi(x~1)`` (uniform on [0, sqrt(12)], unit variance, not recentered),
* ``x_i = x~_i`` for i = 2..24 and ``x_i = x~_{i+2}`` for i = 25..p,
* ``z1 = Phi(x~25)``, ``z2 = Phi(x~26)``,

and the response is ``y = x6 + x12 + x15 + x20 + sin(2 pi z1) + z2^3 + eps``
with ``eps = 0.7 x1 varsigma`` (heteroscedastic) or ``eps = varsigma``.
Indices above are 1-based; arrays are 0-based.
"""

from __future__ import annotations

import json
import logging
import math
from dataclasses import asdict, dataclass, field, replace
from typing import Dict, List, Optional, Sequence, Tuple

import numpy as np
from scipy import linalg, special

from .penalty import PenaltySpec
from .solver import ConvergenceError, Dataset, FitResult, SolverConfig, oracle_fit, predict
from .spline import SplineSpec, build_design
from .tuning import lambda_grid, lambda_max, tune_by_validation

logger = logging.getLogger(__name__)

ACTIVE = (5, 11, 14, 19)       # x6, x12, x15, x20
HETERO_INDEX = 0               # x1
ERROR_DISTS = ("normal", "t5", "none")
METHOD_LABEL = {"scad": "E-SCAD", "mcp": "E-MCP", "l1": "E-Lasso"}


@dataclass(frozen=True)
class ScenarioSpec:
    n: int = 300
    p: int = 400
    error_dist: str = "normal"
    heteroscedastic: bool = True
    hetero_scale: float = 0.70
    alphas: Tuple[float, ...] = (0.1, 0.5, 0.9)
    penalties: Tuple[str, ...] = ("scad", "l1")
    replications: int = 50
    seed: int = 20240101
    tune_factor: int = 10
    n_lambda: int = 50
    lambda_eps: float = 0.01
    max_active: Optional[int] = None
    oracle: bool = True

    def __post_init__(self):
        if self.n < 10:
            raise ValueError(f"n must be >= 10, got {self.n}")
        if self.p < 26:
            raise ValueError(f"p must be >= 26 (the design uses indices up to 26), got {self.p}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if self.error_dist not in ERROR_DISTS:
            raise ValueError(f"error_dist must be one of {ERROR_DISTS}, got {self.error_dist!r}")
        for a in self.alphas:
            if not 0 < a < 1:
                raise ValueError(f"expectile level {a} outside (0, 1)")
        for pen in self.penalties:
            if pen not in METHOD_LABEL:
                raise ValueError(f"unsupported penalty {pen!r} for the experiment")
        object.__setattr__(self, "alphas", tuple(float(a) for a in self.alphas))
        object.__setattr__(self, "penalties", tuple(self.penalties))


@dataclass(frozen=True)
class Truth:
    beta: np.ndarray
    g0: np.ndarray


def ar1_cholesky(dim: int, rho: float = 0.5) -> np.ndarray:
    idx = np.arange(dim)
    sigma = rho ** np.abs(idx[:, None] - idx[None, :])
    return linalg.cholesky(sigma, lower=True)


def gen_covariates(n: int, p: int, seed) -> Tuple[np.ndarray, np.ndarray]:
    """Draw ``X`` (n x p) and ``Z`` (n x 2) for the simulation design."""
    if p < 26:
        raise ValueError(f"p must be >= 26, got {p}")
    rng = np.random.default_rng(seed)
    L = ar1_cholesky(p + 2)
    xt = rng.standard_normal((n, p + 2)) @ L.T
    X = np.empty((n, p))
    X[:, 0] = math.sqrt(12.0) * special.ndtr(xt[:, 0])
    X[:, 1:24] = xt[:, 1:24]
    X[:, 24:] = xt[:, 26:]
    Z = special.ndtr(xt[:, 24:26])
    return X, Z


def true_beta(p: int) -> np.ndarray:
    beta = np.zeros(p)
    beta[list(ACTIVE)] = 1.0
    return beta


def g0_values(Z) -> np.ndarray:
    Z = np.asarray(Z, dtype=float)
    return np.sin(2.0 * np.pi * Z[:, 0]) + Z[:, 1] ** 3


def gen_response(X, Z, scenario: ScenarioSpec, seed) -> Tuple[np.ndarray, Truth]:
    """Response from the sparse partially linear additive model."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    rng = np.random.default_rng(seed)
    if scenario.error_dist == "normal":
        noise = rng.standard_normal(n)
    elif scenario.error_dist == "t5":
        noise = rng.standard_t(5, size=n)
    else:
        noise = np.zeros(n)
    if scenario.heteroscedastic:
        noise = scenario.hetero_scale * X[:, HETERO_INDEX] * noise
    beta = true_beta(p)
    g0 = g0_values(Z)
    return X @ beta + g0 + noise, Truth(beta=beta, g0=g0)


def compute_metrics(beta_hat, g_hat, truth: Truth) -> Dict[str, float]:
    """AE, SE, ADE, Size and selection flags for one fitted model.

    ADE compares ``g_hat`` and ``g0`` after removing each one's sample mean,
    since the level of ``g`` is not separable from the linear part when the
    covariates are not centered.
    """
    beta_hat = np.asarray(beta_hat, dtype=float)
    if beta_hat.shape != truth.beta.shape:
        raise ValueError("beta_hat and true beta differ in shape")
    diff = beta_hat - truth.beta
    g_hat = np.asarray(g_hat, dtype=float)
    dev = (g_hat - g_hat.mean()) - (truth.g0 - truth.g0.mean())
    active = set(np.flatnonzero(beta_hat).tolist())
    return {
        "AE": float(np.sum(np.abs(diff))),
        "SE": float(np.sqrt(np.sum(diff * diff))),
        "ADE": float(np.mean(np.abs(dev))),
        "Size": int(len(active)),
        "F": bool(set(ACTIVE) <= active),
        "F1": bool(HETERO_INDEX in active),
    }


def _child_seeds(seed: int, k: int) -> List[int]:
    return [int(s) for s in np.random.SeedSequence(seed).generate_state(k)]


def simulate_replication(scenario: ScenarioSpec, rep: int, base_config: SolverConfig,
                         spline: SplineSpec = SplineSpec()) -> Dict:
    """One replication: data, tuning set, tuned fits per level and method, oracle."""
    s_x, s_y, s_tx, s_ty = _child_seeds(scenario.seed + rep, 4)
    n, p = scenario.n, scenario.p
    X, Z = gen_covariates(n, p, s_x)
    y, truth = gen_response(X, Z, scenario, s_y)
    Xt, Zt = gen_covariates(scenario.tune_factor * n, p, s_tx)
    yt, _ = gen_response(Xt, Zt, scenario, s_ty)
    train, tune = Dataset(y, X, Z), Dataset(yt, Xt, Zt)
    design = build_design(Z, spline)
    path_cap = scenario.n // 3 if scenario.max_active is None else (scenario.max_active or None)
    out = {"rep": rep, "levels": {}}
    for alpha in scenario.alphas:
        level = {}
        lmax = lambda_max(train, design, alpha)
        grid = lambda_grid(lmax, scenario.n_lambda, scenario.lambda_eps)
        for pen in scenario.penalties:
            cfg = replace(base_config, alpha=alpha, penalty=PenaltySpec(pen, grid[0],
                                                                        _shape(base_config, pen)))
            sel = tune_by_validation(train, tune, grid, cfg, spline=spline,
                                     max_active=path_cap, design=design)
            fit = sel.fit
            m = compute_metrics(fit.beta, fit.g, truth)
            m["lambda"] = float(sel.lam)
            level[METHOD_LABEL[pen]] = m
        if scenario.oracle:
            ofit = oracle_fit(train, design, ACTIVE, alpha=alpha, config=base_config)
            m = compute_metrics(ofit.beta, ofit.g, truth)
            level["Oracle"] = m
        out["levels"][f"{alpha:g}"] = level
    return out


def _shape(config: SolverConfig, family: str):
    if config.penalty.family == family:
        return config.penalty.shape
    return None


def _aggregate(values: Sequence[float]) -> Dict[str, float]:
    arr = np.asarray(values, dtype=float)
    sd = float(arr.std(ddof=1)) if arr.size > 1 else 0.0
    return {"mean": float(arr.mean()), "sd": sd}


def aggregate(replications: List[Dict], scenario: ScenarioSpec) -> Dict:
    """Mean (sd) of every criterion per level and method, F/F1 as percentages."""
    table = {}
    for alpha in scenario.alphas:
        key = f"{alpha:g}"
        methods = [METHOD_LABEL[p] for p in scenario.penalties]
        if scenario.oracle:
            methods.append("Oracle")
        level = {}
        for meth in methods:
            rows = [r["levels"][key][meth] for r in replications]
            entry = {c: _aggregate([row[c] for row in rows]) for c in ("AE", "SE", "ADE")}
            if meth != "Oracle":
                entry["Size"] = _aggregate([row["Size"] for row in rows])
                entry["F"] = 100.0 * float(np.mean([row["F"] for row in rows]))
                entry["F1"] = 100.0 * float(np.mean([row["F1"] for row in rows]))
            level[meth] = entry
        table[key] = level
    return table


def run_experiment(scenario: ScenarioSpec, config: Optional[SolverConfig] = None,
                   spline: SplineSpec = SplineSpec()) -> Dict:
    """Run all replications and aggregate into a table-shaped report.

    Replication ``r`` uses seed ``scenario.seed + r``; a replication that
    fails to converge is recorded and skipped.
    """
    config = config or SolverConfig()
    reps, failures = [], []
    for r in range(scenario.replications):
        try:
            reps.append(simulate_replication(scenario, r, config, spline))
        except (ConvergenceError, np.linalg.LinAlgError, linalg.LinAlgError) as exc:
            logger.warning("replication %d failed: %s", r, exc)
            failures.append({"rep": r, "error": str(exc)})
    scen = asdict(scenario)
    report = {
        "schema_version": 1,
        "scenario": scen,
        "solver": _config_dict(config),
        "spline": asdict(spline),
        "n_success": len(reps),
        "failures": failures,
        "table": aggregate(reps, scenario) if reps else {},
        "replications": reps,
    }
    return report


def _config_dict(config: SolverConfig) -> Dict:
    d = {k: v for k, v in asdict(config).items() if k not in ("beta_init", "penalty")}
    d["penalty_shape"] = config.penalty.shape
    return d


def report_to_json(report: Dict) -> str:
    return json.dumps(report, sort_keys=True, indent=2)


def render_table(report: Dict) -> str:
    """Plain-text table: criterion rows grouped by level, one column per method."""
    table = report["table"]
    if not table:
        return "no successful replications\n"
    sc = report["scenario"]
    err = sc["error_dist"] + (" (hetero)" if sc["heteroscedastic"] else "")
    lines = [f"n={sc['n']}, p={sc['p']}, error={err}, R={report['n_success']}"]
    methods = list(next(iter(table.values())).keys())
    width = 15
    header = f"{'':<12}{'Criteria':<10}" + "".join(f"{m:>{width}}" for m in methods)
    lines += [header, "-" * len(header)]
    for key, level in table.items():
        for c in ("AE", "SE", "ADE", "Size", "F,F1"):
            cells = []
            for m in methods:
                e = level[m]
                if c == "F,F1":
                    cells.append(f"{e['F']:.0f}, {e['F1']:.0f}" if "F" in e else "-")
                elif c in e:
                    cells.append(f"{e[c]['mean']:.2f}({e[c]['sd']:.2f})")
                else:
                    cells.append("-")
            lab = f"alpha={key}" if c == "AE" else ""
            lines.append(f"{lab:<12}{c:<10}" + "".join(f"{x:>{width}}" for x in cells))
        lines.append("-" * len(header))
    if report["failures"]:
        lines.append(f"failed replications: {len(report['failures'])}")
    return "\n".join(lines) + "\n"
