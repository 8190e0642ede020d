from dataclasses import replace

import numpy as np
import pytest
from scipy.optimize import minimize

from plexreg import (Dataset, PenaltySpec, SolverConfig, SplineSpec, build_design, empirical_loss,
                     fit_linear_lla, fit_nonparametric, kkt_report, oracle_fit, predict,
                     two_step_fit)
from plexreg.loss import expectile_grad, expectile_loss
from plexreg.penalty import lla_weights, penalty_value
from plexreg.sim import ACTIVE, ScenarioSpec, gen_covariates, gen_response
from plexreg.solver import ConvergenceError, irls_expectile, penalized_objective

from conftest import make_instance


def lstsq(A, y):
    return np.linalg.lstsq(A, y, rcond=None)[0]


def benchmark_data(seed, n=300, p=400):
    s = np.random.SeedSequence(seed).generate_state(2)
    X, Z = gen_covariates(n, p, s[0])
    y, truth = gen_response(X, Z, ScenarioSpec(n=n, p=p), s[1])
    return Dataset(y, X, Z), build_design(Z), truth


# --- step (a): nonparametric part -------------------------------------------------

def test_fit_nonparametric_least_squares(instance):
    ds, design, _ = instance
    xi = fit_nonparametric(ds.y, ds.X, np.zeros(ds.p), design, SolverConfig(alpha=0.5))
    np.testing.assert_allclose(xi, lstsq(design.Pi, ds.y), rtol=1e-8, atol=1e-10)


def test_fit_nonparametric_exact_fit(instance):
    ds, design, _ = instance
    xi_true = np.random.default_rng(1).standard_normal(design.n_cols)
    beta = np.random.default_rng(2).standard_normal(ds.p)
    y = ds.X @ beta + design.Pi @ xi_true
    xi = fit_nonparametric(y, ds.X, beta, design, SolverConfig(alpha=0.8))
    np.testing.assert_allclose(xi, xi_true, atol=1e-8)


def test_fit_nonparametric_against_nelder_mead():
    ds, design, _ = make_instance(n=40, p=2, d=1, seed=11, hetero=True)
    beta = np.array([0.5, 0.0])
    cfg = SolverConfig(alpha=0.9)
    xi = fit_nonparametric(ds.y, ds.X, beta, design, cfg)
    f = lambda v: empirical_loss(ds.y, ds.X, design.Pi, beta, v, 0.9)
    res = minimize(f, np.zeros(design.n_cols), method="Nelder-Mead",
                   options={"xatol": 1e-10, "fatol": 1e-14, "maxiter": 40000, "maxfev": 40000})
    np.testing.assert_allclose(xi, res.x, atol=1e-4)
    assert f(xi) <= res.fun + 1e-12


def test_irls_reports_nonconvergence():
    rng = np.random.default_rng(0)
    A = rng.standard_normal((30, 3))
    with pytest.raises(ConvergenceError):
        irls_expectile(A, rng.standard_normal(30), 0.2, max_iter=1, tol=1e-300)


# --- step (b): weighted L1 --------------------------------------------------------

def test_fit_linear_lla_zero_at_lambda_max(instance):
    ds, design, _ = instance
    cfg = SolverConfig(alpha=0.3)
    xi = fit_nonparametric(ds.y, ds.X, np.zeros(ds.p), design, cfg)
    s = ds.X.T @ expectile_grad(ds.y - design.Pi @ xi, 0.3) / ds.n
    lmax = np.max(np.abs(s))
    beta = fit_linear_lla(ds.y, ds.X, xi, design, np.full(ds.p, lmax), cfg)
    assert np.all(beta == 0)
    beta = fit_linear_lla(ds.y, ds.X, xi, design, np.full(ds.p, 0.9 * lmax), cfg)
    assert np.any(beta != 0)


def test_fit_linear_lla_unpenalized_least_squares(instance):
    ds, design, _ = instance
    xi = np.random.default_rng(3).standard_normal(design.n_cols)
    beta = fit_linear_lla(ds.y, ds.X, xi, design, np.zeros(ds.p), SolverConfig(alpha=0.5))
    np.testing.assert_allclose(beta, lstsq(ds.X, ds.y - design.Pi @ xi), rtol=1e-7, atol=1e-9)


def test_fit_linear_lla_random_probes():
    ds, design, _ = make_instance(n=30, p=5, d=1, seed=4)
    cfg = SolverConfig(alpha=0.7)
    xi = fit_nonparametric(ds.y, ds.X, np.zeros(ds.p), design, cfg)
    w = np.full(ds.p, 0.1)
    beta = fit_linear_lla(ds.y, ds.X, xi, design, w, cfg)
    r = ds.y - design.Pi @ xi
    obj = lambda b: np.mean(expectile_loss(r - ds.X @ b, 0.7)) + np.sum(w * np.abs(b))
    rng = np.random.default_rng(5)
    base = obj(beta)
    scales = rng.choice([1e-4, 1e-2, 1.0], size=10_000)
    probes = beta + scales[:, None] * rng.standard_normal((10_000, ds.p))
    vals = np.array([obj(b) for b in probes])
    assert np.all(vals >= base - 1e-12)


# --- two-step fit -------------------------------------------------------------------

@pytest.mark.parametrize("seed", range(5))
def test_unpenalized_matches_joint_least_squares(seed):
    ds, design, _ = make_instance(n=100, p=5, d=2, seed=seed)
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.5, penalty=PenaltySpec("none")))
    coef = lstsq(np.hstack([ds.X, design.Pi]), ds.y)
    np.testing.assert_allclose(fit.beta, coef[:5], rtol=1e-6, atol=1e-9)
    np.testing.assert_allclose(fit.xi, coef[5:], rtol=1e-6, atol=1e-9)
    assert fit.converged


def test_strong_penalty_pure_noise():
    ds, design, _ = make_instance(n=200, p=30, d=2, seed=8, active=())
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.5, penalty=PenaltySpec("scad", 5.0)))
    assert np.all(fit.beta == 0)
    g0 = np.sin(2 * np.pi * ds.Z[:, 0]) + ds.Z[:, 1] ** 2
    dev = (fit.g - fit.g.mean()) - (g0 - g0.mean())
    assert np.mean(np.abs(dev)) < 0.2


@pytest.mark.parametrize("alpha", [0.1, 0.5, 0.9])
@pytest.mark.parametrize("family", ["scad", "mcp", "l1"])
def test_objective_trace_nonincreasing(alpha, family):
    ds, design, _ = make_instance(n=80, p=40, d=2, seed=int(alpha * 10), active=(0, 3, 7), hetero=True)
    fit = two_step_fit(ds, design, SolverConfig(alpha=alpha, penalty=PenaltySpec(family, 0.08)))
    assert np.all(np.diff(fit.objective_trace) <= 1e-10)
    # the recorded final value is the objective at the returned point
    cfg = fit.config
    assert fit.objective_trace[-1] == pytest.approx(
        penalized_objective(ds.y, ds.X, design.Pi, fit.beta, fit.xi, cfg), rel=1e-12)


def test_benchmark_single_replication():
    from plexreg.tuning import lambda_grid, lambda_max, tune_by_validation
    ds, design, truth = benchmark_data(101)
    tune, _, _ = benchmark_data(202, n=3000)
    cfg = SolverConfig(alpha=0.5, penalty=PenaltySpec("scad", 1.0))
    grid = lambda_grid(lambda_max(ds, design, 0.5))
    sel = tune_by_validation(ds, tune, grid, cfg, design=design, max_active=100)
    active = set(sel.fit.active_set.tolist())
    assert set(ACTIVE) <= active
    assert len(active) <= 10


def test_lla_fixed_point_at_oracle():
    ds, design, _ = make_instance(n=200, p=20, d=2, seed=12, active=(2, 5), noise=0.3)
    lam = 0.25
    active = [2, 5]
    cfg = SolverConfig(alpha=0.5, penalty=PenaltySpec("scad", lam))
    orc = oracle_fit(ds, design, active, alpha=0.5, config=cfg)
    assert np.all(np.abs(orc.beta[active]) > 3.7 * lam)
    off = np.setdiff1d(np.arange(ds.p), active)
    assert np.max(np.abs(kkt_report(orc, ds, design).s[off])) < lam
    w = lla_weights(orc.beta, cfg.penalty)
    assert np.all(w[active] == 0) and np.all(w[off] == lam)
    beta = fit_linear_lla(ds.y, ds.X, orc.xi, design, w, cfg, beta0=orc.beta)
    np.testing.assert_allclose(beta, orc.beta, atol=1e-7)
    assert np.all(beta[off] == 0)
    # the full algorithm started at the oracle stays there
    fit = two_step_fit(ds, design, replace(cfg, init="user", beta_init=orc.beta))
    np.testing.assert_allclose(fit.beta, orc.beta, atol=1e-7)


def test_determinism(instance):
    ds, design, _ = instance
    cfg = SolverConfig(alpha=0.3, penalty=PenaltySpec("scad", 0.05))
    a, b = two_step_fit(ds, design, cfg), two_step_fit(ds, design, cfg)
    assert np.array_equal(a.beta, b.beta) and np.array_equal(a.xi, b.xi)
    assert np.array_equal(a.objective_trace, b.objective_trace)


def test_init_options(instance):
    ds, design, truth = instance
    cfg = SolverConfig(alpha=0.5, penalty=PenaltySpec("scad", 0.05))
    for init in ("zero", "elasso"):
        fit = two_step_fit(ds, design, replace(cfg, init=init))
        assert set(fit.active_set.tolist()) >= {0, 1}
    fit = two_step_fit(ds, design, replace(cfg, init="user", beta_init=truth))
    assert set(fit.active_set.tolist()) >= {0, 1}
    with pytest.raises(ValueError):
        SolverConfig(init="user")


def test_duplicate_columns_are_tolerated(instance):
    ds, design, _ = instance
    X = np.hstack([ds.X, ds.X[:, :1]])
    dup = Dataset(ds.y, X, ds.Z)
    fit = two_step_fit(dup, design, SolverConfig(alpha=0.6, penalty=PenaltySpec("l1", 0.05)))
    assert kkt_report(fit, dup, design, tol=1e-6).ok


# --- oracle fit -------------------------------------------------------------------

def test_oracle_empty_active_set(instance):
    ds, design, _ = instance
    orc = oracle_fit(ds, design, [], alpha=0.7)
    xi = fit_nonparametric(ds.y, ds.X, np.zeros(ds.p), design, SolverConfig(alpha=0.7))
    assert np.all(orc.beta == 0)
    np.testing.assert_allclose(orc.xi, xi, atol=1e-9)


def test_oracle_least_squares(instance):
    ds, design, _ = instance
    orc = oracle_fit(ds, design, [0, 1, 3], alpha=0.5)
    coef = lstsq(np.hstack([ds.X[:, [0, 1, 3]], design.Pi]), ds.y)
    np.testing.assert_allclose(orc.beta[[0, 1, 3]], coef[:3], rtol=1e-8)
    assert orc.beta[2] == 0 and orc.beta[4] == 0
    with pytest.raises(ValueError):
        oracle_fit(ds, design, range(ds.p), alpha=0.5) if ds.p + design.n_cols >= ds.n else \
            oracle_fit(Dataset(ds.y[:8], ds.X[:8], ds.Z[:8]), design, [0, 1], alpha=0.5)


def test_oracle_absolute_error_band():
    errs = []
    for r in range(50):
        ds, design, truth = benchmark_data(20240101 + r)
        orc = oracle_fit(ds, design, ACTIVE, alpha=0.5)
        errs.append(np.sum(np.abs(orc.beta - truth.beta)))
    assert abs(np.mean(errs) - 0.28) <= 3 * 0.11


# --- KKT report -------------------------------------------------------------------

def test_kkt_unpenalized_converged(instance):
    ds, design, _ = instance
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.2, penalty=PenaltySpec("none")))
    rep = kkt_report(fit, ds, design)
    assert fit.converged and rep.max_residual <= fit.config.tol_inner and rep.ok


def test_kkt_scores_by_direct_loop():
    rng = np.random.default_rng(9)
    n = 12
    X, Z = rng.standard_normal((n, 2)), rng.uniform(size=(n, 1))
    y = X[:, 0] + rng.standard_normal(n)
    ds, design = Dataset(y, X, Z), build_design(Z, SplineSpec(order=2))
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.25, penalty=PenaltySpec("scad", 0.1)))
    rep = kkt_report(fit, ds, design)
    for j in range(2):
        acc = 0.0
        for i in range(n):
            r = y[i] - X[i, 0] * fit.beta[0] - X[i, 1] * fit.beta[1] - design.Pi[i] @ fit.xi
            acc += 2 * (0.25 if r >= 0 else 0.75) * r * X[i, j]
        assert rep.s[j] == pytest.approx(-acc / n, abs=1e-12)


def test_kkt_oracle_off_support_scores():
    lam = 3 * np.sqrt(np.log(400) / 300)
    hits = 0
    for r in range(50):
        ds, design, _ = benchmark_data(777 + r)
        rep = kkt_report(oracle_fit(ds, design, ACTIVE, alpha=0.5), ds, design)
        off = np.setdiff1d(np.arange(ds.p), ACTIVE)
        hits += np.max(np.abs(rep.s[off])) <= lam
        assert all(rep.status[j] == "fixed" for j in off)
    assert hits >= 45


def test_kkt_flags_a_perturbed_point(instance):
    ds, design, _ = instance
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.5, penalty=PenaltySpec("l1", 0.05)))
    bad = replace(fit, beta=fit.beta + 0.3)
    rep = kkt_report(bad, ds, design, tol=1e-6)
    assert not rep.ok and "violating" in rep.status


def test_predict_reproduces_fitted(instance):
    ds, design, _ = instance
    fit = two_step_fit(ds, design, SolverConfig(alpha=0.4, penalty=PenaltySpec("mcp", 0.05)))
    np.testing.assert_allclose(predict(fit, design, ds.X, ds.Z), fit.fitted, atol=1e-10)
