"""Two-step LLA solver for penalized partially linear additive expectile regression.

The objective is

    L(beta, xi) = (1/n) sum_i phi_alpha(y_i - x_i'beta - Pi_i'xi) + sum_j P_lambda(|beta_j|).

Each outer iteration (a) minimizes over the unpenalized spline coefficients
``xi`` exactly, then (b) replaces the folded-concave penalty by its tangent
line at the current ``beta`` and solves the resulting weighted-L1 problem.
Both steps can only decrease ``L``. The returned point is a local minimum
candidate; nothing guarantees it is the oracle estimator.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace
from typing import List, Optional, Sequence

import numpy as np
from scipy import linalg

from .loss import check_alpha, expectile_curvature, expectile_grad, expectile_loss
from .penalty import PenaltySpec, lla_weights, penalty_deriv_abs, penalty_value
from .spline import DesignMatrix, center_fit

logger = logging.getLogger(__name__)

INIT_MODES = ("zero", "elasso", "user")


class ConvergenceError(RuntimeError):
    """Raised when an iterative solve exhausts its budget.

    ``iterate`` holds the last iterate and ``residual`` its optimality
    residual, so callers can inspect how far off the solve was.
    """

    def __init__(self, message, iterate=None, residual=None):
        super().__init__(message)
        self.iterate = iterate
        self.residual = residual


@dataclass(frozen=True)
class Dataset:
    y: np.ndarray
    X: np.ndarray
    Z: np.ndarray

    def __post_init__(self):
        y = np.asarray(self.y, dtype=float).ravel()
        X = np.asarray(self.X, dtype=float)
        Z = np.asarray(self.Z, dtype=float)
        if X.ndim == 1:
            X = X[:, None]
        if Z.ndim == 1:
            Z = Z[:, None]
        if X.shape[0] != y.size or Z.shape[0] != y.size:
            raise ValueError(f"row mismatch: y {y.size}, X {X.shape}, Z {Z.shape}")
        for name, arr in (("y", y), ("X", X), ("Z", Z)):
            if not np.all(np.isfinite(arr)):
                raise ValueError(f"{name} contains non-finite values")
        object.__setattr__(self, "y", y)
        object.__setattr__(self, "X", X)
        object.__setattr__(self, "Z", Z)

    @property
    def n(self) -> int:
        return self.y.size

    @property
    def p(self) -> int:
        return self.X.shape[1]

    def subset(self, rows) -> "Dataset":
        return Dataset(self.y[rows], self.X[rows], self.Z[rows])


@dataclass(frozen=True)
class SolverConfig:
    """Solver settings.

    ``tol_outer`` bounds both the max-norm change in ``beta`` and the relative
    objective change between outer iterations; ``tol_inner`` bounds the KKT
    residual of every inner solve. ``init`` selects the starting ``beta``:
    ``"elasso"`` starts from the L1-penalized fit of the same model at the
    same level, ``"zero"`` starts at the origin and
    ``"user"`` uses ``beta_init``.
    """

    alpha: float = 0.5
    penalty: PenaltySpec = field(default_factory=lambda: PenaltySpec("scad", 0.0))
    max_outer: int = 50
    max_inner: int = 2000
    tol_outer: float = 1e-6
    tol_inner: float = 1e-8
    ridge_eps: float = 1e-10
    init: str = "elasso"
    beta_init: Optional[np.ndarray] = None
    lla_passes: int = 1

    def __post_init__(self):
        check_alpha(self.alpha)
        if self.init not in INIT_MODES:
            raise ValueError(f"init must be one of {INIT_MODES}, got {self.init!r}")
        if self.init == "user" and self.beta_init is None:
            raise ValueError("init='user' needs beta_init")
        if min(self.tol_outer, self.tol_inner) <= 0:
            raise ValueError("tolerances must be positive")
        if min(self.max_outer, self.max_inner, self.lla_passes) < 1:
            raise ValueError("iteration limits must be >= 1")
        if self.ridge_eps < 0:
            raise ValueError("ridge_eps must be >= 0")

    def with_lam(self, lam: float) -> "SolverConfig":
        return replace(self, penalty=self.penalty.with_lam(lam))


@dataclass(frozen=True)
class FitResult:
    beta: np.ndarray
    xi: np.ndarray
    mu: float
    G: np.ndarray
    g: np.ndarray
    fitted: np.ndarray
    objective_trace: np.ndarray
    outer_iters: int
    converged: bool
    kkt_max_residual: float
    active_set: np.ndarray
    config: SolverConfig
    last_weights: Optional[np.ndarray] = None
    inner_kkt: tuple = ()
    free: Optional[np.ndarray] = None
    flags: tuple = ()

    @property
    def lam(self) -> float:
        return self.config.penalty.lam

    @property
    def size(self) -> int:
        return int(self.active_set.size)


@dataclass(frozen=True)
class KKTReport:
    """Per-coordinate stationarity residuals.

    ``s`` are the partial derivatives of the empirical loss in ``beta`` and
    ``grad_xi`` those in ``xi``. ``status`` labels every ``beta`` coordinate
    as ``"active-stationary"``, ``"stationary"``, ``"fixed"`` (held at zero by
    an oracle restriction) or ``"violating"``.
    """

    s: np.ndarray
    grad_xi: np.ndarray
    residual_beta: np.ndarray
    residual_xi: np.ndarray
    status: List[str]
    max_residual: float
    tol: float

    @property
    def ok(self) -> bool:
        return self.max_residual <= self.tol


# ---------------------------------------------------------------------------
# smooth piecewise-quadratic solve (IRLS / semismooth Newton)
# ---------------------------------------------------------------------------

def _line_search(e, u, alpha, cd, n, iters=100):
    """Exact minimizer over t in [0, 1] of mean(phi(e - t u)) + t * cd.

    The directional derivative is nondecreasing and piecewise linear in t,
    so regula falsi on it converges quickly.
    """
    def slope(t):
        return -np.dot(expectile_grad(e - t * u, alpha), u) / n + cd

    hi_val = slope(1.0)
    if hi_val <= 0:
        return 1.0
    lo, hi, lo_val = 0.0, 1.0, slope(0.0)
    if lo_val >= 0:
        return 0.0
    side = 0
    for _ in range(iters):
        t = (lo * hi_val - hi * lo_val) / (hi_val - lo_val)
        v = slope(t)
        if abs(v) <= 1e-15 or hi - lo <= 1e-14:
            return t
        if v > 0:
            hi, hi_val = t, v
            if side == -1:
                lo_val *= 0.5
            side = -1
        else:
            lo, lo_val = t, v
            if side == 1:
                hi_val *= 0.5
            side = 1
    return lo


def irls_expectile(A, r, alpha, theta0=None, linear=None, ridge_eps=1e-10,
                   tol=1e-8, max_iter=200):
    """Minimize ``mean(phi_alpha(r - A theta)) + linear' theta``.

    Each sweep solves the weighted normal equations with the current
    asymmetric weights (a semismooth Newton step) and then line-searches
    exactly along that direction, which keeps the iteration monotone even
    when the sign pattern of the residuals flips.

    Returns
    -------
    theta : ndarray
    n_iter : int
    grad_norm : float
        Max-norm of the gradient at ``theta``.
    """
    A = np.asarray(A, dtype=float)
    n, k = A.shape
    theta = np.zeros(k) if theta0 is None else np.array(theta0, dtype=float)
    c = np.zeros(k) if linear is None else np.asarray(linear, dtype=float)
    e = r - A @ theta
    gnorm = np.inf
    last_step = np.inf
    for it in range(max_iter + 1):
        grad = -(A.T @ expectile_grad(e, alpha)) / n + c
        gnorm = float(np.max(np.abs(grad))) if k else 0.0
        # the ridge perturbs the Newton system, so also wait for a negligible step
        if gnorm <= tol and (last_step <= 1e-10 or gnorm == 0.0):
            return theta, it, gnorm
        if it == max_iter:
            break
        w = expectile_curvature(e, alpha)
        H = (A.T * w) @ A / n
        H[np.diag_indices_from(H)] += ridge_eps
        try:
            d = linalg.solve(H, -grad, assume_a="pos")
        except (linalg.LinAlgError, ValueError):
            d = np.linalg.lstsq(H, -grad, rcond=None)[0]
        u = A @ d
        t = _line_search(e, u, alpha, float(c @ d), n)
        if t == 0.0:
            # Newton direction failed to descend; take a gradient step instead
            d = -grad
            u = A @ d
            t = _line_search(e, u, alpha, float(c @ d), n)
            if t == 0.0:
                if gnorm <= tol:
                    return theta, it, gnorm
                break
        step = t * d
        last_step = float(np.max(np.abs(step))) / max(1.0, float(np.max(np.abs(theta))))
        theta = theta + step
        e = r - A @ theta
    raise ConvergenceError(
        f"IRLS did not reach gradient tolerance {tol:g} (residual {gnorm:.3g})",
        iterate=theta, residual=gnorm)


# ---------------------------------------------------------------------------
# weighted-L1 expectile regression (proximal gradient + Newton polish)
# ---------------------------------------------------------------------------

def lipschitz_estimate(X, alpha, n_iter=100, rtol=1e-6):
    """Estimate (2 c2 / n) * lambda_max(X'X) by power iteration."""
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    c2 = max(alpha, 1.0 - alpha)
    if p == 0 or not np.any(X):
        return 2.0 * c2 / n
    v = np.random.default_rng(0).standard_normal(p)
    v /= np.linalg.norm(v)
    ev = 0.0
    for _ in range(n_iter):
        w = X.T @ (X @ v)
        ev_new = float(np.linalg.norm(w))
        if ev_new == 0.0:
            break
        v = w / ev_new
        if abs(ev_new - ev) <= rtol * ev_new:
            ev = ev_new
            break
        ev = ev_new
    return 2.0 * c2 * max(ev, 1e-12) / n


def _soft(v, thr):
    return np.sign(v) * np.maximum(np.abs(v) - thr, 0.0)


def weighted_l1_kkt(beta, grad, weights):
    """Per-coordinate KKT residual of ``f(beta) + sum_j w_j |beta_j|``."""
    return np.where(beta != 0, np.abs(grad + weights * np.sign(beta)),
                    np.maximum(np.abs(grad) - weights, 0.0))


def _signature(beta):
    return np.sign(beta).astype(np.int8).tobytes()


def weighted_l1_expectile(X, r, alpha, weights, beta0=None, tol=1e-8, max_iter=2000,
                          lipschitz=None, ridge_eps=1e-10):
    """Minimize ``mean(phi_alpha(r - X beta)) + sum_j w_j |beta_j|``.

    Monotone FISTA with backtracking produces sparse iterates; whenever the
    sign pattern settles, the smooth problem restricted to that orthant face
    is solved by :func:`irls_expectile`. A polished point that keeps its
    signs and passes the full KKT check is returned; one that crosses zero
    is cut back to the first crossing, which drops that coordinate.

    Returns
    -------
    beta : ndarray
    n_iter : int
    kkt : float
        Max KKT residual at ``beta``.
    """
    X = np.asarray(X, dtype=float)
    n, p = X.shape
    w = np.asarray(weights, dtype=float)
    if np.any(w < 0):
        raise ValueError("weights must be nonnegative")
    beta = np.zeros(p) if beta0 is None else np.array(beta0, dtype=float)
    if p == 0:
        return beta, 0, 0.0
    if lipschitz is None:
        lipschitz = lipschitz_estimate(X, alpha)
    step = 1.0 / lipschitz

    def smooth(e):
        return float(np.mean(expectile_loss(e, alpha)))

    def grad_at(e):
        return -(X.T @ expectile_grad(e, alpha)) / n

    def total(b, e):
        return smooth(e) + float(w @ np.abs(b))

    e = r - X @ beta
    F = total(beta, e)
    g = grad_at(e)
    kkt = float(weighted_l1_kkt(beta, g, w).max())
    if kkt <= tol:
        return beta, 0, kkt

    yk, e_y, tk = beta.copy(), e.copy(), 1.0
    sig, stable, tried = _signature(beta), 0, None
    for it in range(1, max_iter + 1):
        g_y = grad_at(e_y)
        f_y = smooth(e_y)
        while True:
            z = _soft(yk - step * g_y, step * w)
            diff = z - yk
            e_z = e_y - X @ diff
            f_z = smooth(e_z)
            if f_z <= f_y + g_y @ diff + (diff @ diff) / (2.0 * step) + 1e-13 * abs(f_y):
                break
            step *= 0.5
        F_z = f_z + float(w @ np.abs(z))
        t_next = 0.5 * (1.0 + np.sqrt(1.0 + 4.0 * tk * tk))
        if F_z <= F:
            yk = z + ((tk - 1.0) / t_next) * (z - beta)
            beta, e, F = z, e_z, F_z
            tk = t_next
        else:
            # restart momentum from the last accepted point
            yk, tk = beta.copy(), 1.0
        e_y = r - X @ yk

        new_sig = _signature(beta)
        stable = stable + 1 if new_sig == sig else 0
        sig = new_sig
        if stable >= 3 and sig != tried or it % 10 == 0:
            g = grad_at(e)
            kkt = float(weighted_l1_kkt(beta, g, w).max())
            if kkt <= tol:
                return beta, it, kkt
        if stable >= 3 and sig != tried:
            tried = sig
            S = np.flatnonzero(beta)
            if S.size == 0:
                continue
            s = np.sign(beta[S])
            try:
                th, _, _ = irls_expectile(X[:, S], r, alpha, theta0=beta[S], linear=w[S] * s,
                                          ridge_eps=ridge_eps, tol=0.1 * tol, max_iter=50)
            except ConvergenceError as exc:
                th = exc.iterate
            cross = th * s <= 0
            cand = beta.copy()
            if cross.any():
                # stop at the first zero crossing along beta_S -> th
                frac = beta[S][cross] / (beta[S][cross] - th[cross])
                tau = float(frac.min())
                step_S = beta[S] + tau * (th - beta[S])
                hit = np.zeros(S.size, dtype=bool)
                hit[np.flatnonzero(cross)[frac <= tau]] = True
                step_S[hit | (np.sign(step_S) != s)] = 0.0
                cand[S] = step_S
            else:
                cand[S] = th
            e_c = r - X @ cand
            F_c = total(cand, e_c)
            if F_c <= F + 1e-14 * abs(F):
                beta, e, F = cand, e_c, F_c
                yk, e_y, tk = beta.copy(), e.copy(), 1.0
                g = grad_at(e)
                kkt = float(weighted_l1_kkt(beta, g, w).max())
                if kkt <= tol:
                    return beta, it, kkt
                sig = _signature(beta)
                stable = 0
    g = grad_at(e)
    kkt = float(weighted_l1_kkt(beta, g, w).max())
    if kkt <= tol:
        return beta, max_iter, kkt
    raise ConvergenceError(
        f"proximal gradient did not reach KKT tolerance {tol:g} (residual {kkt:.3g})",
        iterate=beta, residual=kkt)


# ---------------------------------------------------------------------------
# Algorithm steps
# ---------------------------------------------------------------------------

def _pi(design):
    return design.Pi if isinstance(design, DesignMatrix) else np.asarray(design, dtype=float)


def fit_nonparametric(y, X, beta, design, config: SolverConfig = SolverConfig(), xi0=None):
    """Step (a): minimize the empirical loss over ``xi`` with ``beta`` held fixed."""
    Pi = _pi(design)
    r = np.asarray(y, dtype=float) - np.asarray(X, dtype=float) @ np.asarray(beta, dtype=float)
    xi, _, _ = irls_expectile(Pi, r, config.alpha, theta0=xi0, ridge_eps=config.ridge_eps,
                              tol=config.tol_inner, max_iter=config.max_inner)
    return xi


def fit_linear_lla(y, X, xi, design, weights, config: SolverConfig = SolverConfig(),
                   beta0=None, lipschitz=None):
    """Step (b): weighted-L1 expectile regression of ``y - Pi xi`` on ``X``."""
    Pi = _pi(design)
    r = np.asarray(y, dtype=float) - Pi @ np.asarray(xi, dtype=float)
    beta, _, _ = weighted_l1_expectile(X, r, config.alpha, weights, beta0=beta0,
                                       tol=config.tol_inner, max_iter=config.max_inner,
                                       lipschitz=lipschitz, ridge_eps=config.ridge_eps)
    return beta


def penalized_objective(y, X, Pi, beta, xi, config: SolverConfig) -> float:
    e = y - X @ beta - Pi @ xi
    return float(np.mean(expectile_loss(e, config.alpha))
                 + np.sum(penalty_value(beta, config.penalty)))


def _initial_beta(y, X, Pi, config: SolverConfig, lipschitz):
    p = X.shape[1]
    pen = config.penalty
    if config.init == "user":
        beta = np.asarray(config.beta_init, dtype=float).ravel()
        if beta.size != p:
            raise ValueError(f"beta_init has length {beta.size}, expected {p}")
        return beta.copy()
    if config.init == "zero" or pen.family in ("none", "l1") or pen.lam == 0.0:
        return np.zeros(p)
    # L1-penalized fit of the same model at the same level
    sub = replace(config, penalty=PenaltySpec("l1", pen.lam), init="zero")
    core = _two_step_core(y, X, Pi, sub, np.zeros(p), None, lipschitz)
    return core["beta"]


def _joint_polish(y, X, Pi, config: SolverConfig, weights, beta, xi):
    """Minimize the LLA majorizer jointly over (beta on its support, xi).

    Alternating steps (a) and (b) converge only linearly when the linear and
    spline columns are correlated. With the sign pattern fixed the majorizer
    is smooth, so one Newton solve reaches the joint stationary point. The
    candidate is kept only if no sign flips and the majorizer does not rise.
    """
    S = np.flatnonzero(beta)
    sgn = np.sign(beta[S])
    A = np.hstack([X[:, S], Pi])
    lin = np.concatenate([weights[S] * sgn, np.zeros(Pi.shape[1])])
    try:
        th, _, _ = irls_expectile(A, y, config.alpha, theta0=np.concatenate([beta[S], xi]),
                                  linear=lin, ridge_eps=config.ridge_eps,
                                  tol=0.1 * config.tol_inner, max_iter=50)
    except ConvergenceError as exc:
        th = exc.iterate
    if np.any(th[:S.size] * sgn <= 0):
        return beta, xi
    cand = beta.copy()
    cand[S] = th[:S.size]
    xi_c = th[S.size:]

    def majorizer(b, v):
        return float(np.mean(expectile_loss(y - X @ b - Pi @ v, config.alpha)) + weights @ np.abs(b))

    if majorizer(cand, xi_c) <= majorizer(beta, xi):
        return cand, xi_c
    return beta, xi


def _two_step_core(y, X, Pi, config: SolverConfig, beta, xi, lipschitz):
    if lipschitz is None:
        lipschitz = lipschitz_estimate(X, config.alpha)
    pen = config.penalty
    trace = []
    inner_kkt = []
    weights = None
    converged = False
    xi = fit_nonparametric(y, X, beta, Pi, config, xi0=xi)
    obj = penalized_objective(y, X, Pi, beta, xi, config)
    trace.append(obj)
    it = 0
    for it in range(1, config.max_outer + 1):
        if it > 1:
            xi = fit_nonparametric(y, X, beta, Pi, config, xi0=xi)
        r = y - Pi @ xi
        beta_old = beta
        for _ in range(config.lla_passes):
            weights = lla_weights(beta, pen)
            try:
                new, _, kkt = weighted_l1_expectile(
                    X, r, config.alpha, weights, beta0=beta, tol=config.tol_inner,
                    max_iter=config.max_inner, lipschitz=lipschitz, ridge_eps=config.ridge_eps)
            except ConvergenceError as exc:
                raise ConvergenceError(f"outer iteration {it}, step (b): {exc}",
                                       iterate=exc.iterate, residual=exc.residual) from exc
            # never accept a worse point on the majorizer
            e_old, e_new = r - X @ beta, r - X @ new
            q_old = np.mean(expectile_loss(e_old, config.alpha)) + weights @ np.abs(beta)
            q_new = np.mean(expectile_loss(e_new, config.alpha)) + weights @ np.abs(new)
            if q_new <= q_old:
                beta = new
            inner_kkt.append(kkt)
        beta, xi = _joint_polish(y, X, Pi, config, weights, beta, xi)
        obj_new = penalized_objective(y, X, Pi, beta, xi, config)
        trace.append(obj_new)
        dbeta = float(np.max(np.abs(beta - beta_old))) if beta.size else 0.0
        drel = abs(obj - obj_new) / max(abs(obj), np.finfo(float).tiny)
        obj = obj_new
        if dbeta < config.tol_outer and drel < config.tol_outer:
            converged = True
            break
    # re-synchronize xi with the final beta; exact minimization cannot raise L
    xi = fit_nonparametric(y, X, beta, Pi, config, xi0=xi)
    trace.append(penalized_objective(y, X, Pi, beta, xi, config))
    if not converged:
        logger.info("two-step fit stopped at max_outer=%d without converging", config.max_outer)
    return dict(beta=beta, xi=xi, trace=np.array(trace), iters=it, converged=converged,
                weights=weights, inner_kkt=tuple(inner_kkt))


def _make_result(dataset: Dataset, design: DesignMatrix, config, beta, xi, trace, iters,
                 converged, weights=None, inner_kkt=(), free=None, flags=()):
    mu, G, g = center_fit(xi, design)
    fitted = dataset.X @ beta + design.Pi @ xi
    fit = FitResult(beta=beta, xi=xi, mu=mu, G=G, g=g, fitted=fitted,
                    objective_trace=np.asarray(trace), outer_iters=iters, converged=converged,
                    kkt_max_residual=np.nan, active_set=np.flatnonzero(beta), config=config,
                    last_weights=weights, inner_kkt=tuple(inner_kkt), free=free,
                    flags=tuple(flags))
    report = kkt_report(fit, dataset, design)
    return replace(fit, kkt_max_residual=report.max_residual)


def two_step_fit(dataset: Dataset, design: DesignMatrix, config: SolverConfig,
                 xi_init=None, lipschitz=None) -> FitResult:
    """Fit the penalized model by alternating steps (a) and (b).

    Stops when the max-norm change in ``beta`` and the relative change of
    the penalized objective both fall below ``config.tol_outer``, or after
    ``config.max_outer`` iterations (``converged`` is then False).
    """
    y, X, Pi = dataset.y, dataset.X, design.Pi
    if Pi.shape[0] != dataset.n:
        raise ValueError("design rows do not match the dataset")
    if lipschitz is None:
        lipschitz = lipschitz_estimate(X, config.alpha)
    beta0 = _initial_beta(y, X, Pi, config, lipschitz)
    core = _two_step_core(y, X, Pi, config, beta0, xi_init, lipschitz)
    return _make_result(dataset, design, config, core["beta"], core["xi"], core["trace"],
                        core["iters"], core["converged"], core["weights"], core["inner_kkt"])


def oracle_fit(dataset: Dataset, design: DesignMatrix, active: Sequence[int],
               alpha: float = 0.5, config: Optional[SolverConfig] = None) -> FitResult:
    """Unpenalized joint fit of ``(beta_A, xi)`` with ``beta`` zero off ``active``."""
    cfg = config or SolverConfig(alpha=alpha)
    cfg = replace(cfg, alpha=alpha, penalty=PenaltySpec("none", 0.0), init="zero")
    active = np.asarray(sorted(set(int(j) for j in active)), dtype=int)
    n, p = dataset.n, dataset.p
    if active.size + design.n_cols >= n:
        raise ValueError("oracle fit needs |active| + D_n < n")
    A = np.hstack([dataset.X[:, active], design.Pi])
    flags = []
    if np.linalg.matrix_rank(A) < A.shape[1]:
        flags.append("singular-design-ridge")
        logger.warning("oracle design is rank deficient; relying on ridge_eps=%g", cfg.ridge_eps)
    theta, iters, _ = irls_expectile(A, dataset.y, alpha, ridge_eps=cfg.ridge_eps,
                                     tol=cfg.tol_inner, max_iter=cfg.max_inner)
    beta = np.zeros(p)
    beta[active] = theta[:active.size]
    xi = theta[active.size:]
    free = np.zeros(p, dtype=bool)
    free[active] = True
    trace = [penalized_objective(dataset.y, dataset.X, design.Pi, beta, xi, cfg)]
    return _make_result(dataset, design, cfg, beta, xi, trace, iters, True, free=free,
                        flags=flags)


def kkt_report(fit: FitResult, dataset: Dataset, design: DesignMatrix, tol=None,
               weights=None) -> KKTReport:
    """Stationarity residuals of ``fit``.

    For ``beta_j != 0`` the residual is ``|s_j + w_j sgn(beta_j)|`` and for
    ``beta_j == 0`` it is ``max(|s_j| - w_j, 0)``, where ``w_j`` is the
    penalty derivative ``P'(|beta_j|)`` (``P'(0+) = lambda``) unless
    explicit LLA ``weights`` are given. Coordinates an oracle fit holds at
    zero are reported but excluded from the maximum.
    """
    cfg = fit.config
    tol = cfg.tol_inner if tol is None else tol
    e = dataset.y - dataset.X @ fit.beta - design.Pi @ fit.xi
    psi = expectile_grad(e, cfg.alpha)
    n = dataset.n
    s = -(dataset.X.T @ psi) / n
    gxi = -(design.Pi.T @ psi) / n
    w = penalty_deriv_abs(fit.beta, cfg.penalty) if weights is None else np.asarray(weights, float)
    res = weighted_l1_kkt(fit.beta, s, w)
    free = np.ones(fit.beta.size, dtype=bool) if fit.free is None else fit.free
    if fit.free is not None:
        res = np.where(free, np.abs(s), 0.0)
    rxi = np.abs(gxi)
    status = []
    for j in range(fit.beta.size):
        if not free[j]:
            status.append("fixed")
        elif res[j] > tol:
            status.append("violating")
        elif fit.beta[j] != 0:
            status.append("active-stationary")
        else:
            status.append("stationary")
    mx = float(max(res.max(initial=0.0), rxi.max(initial=0.0)))
    return KKTReport(s=s, grad_xi=gxi, residual_beta=res, residual_xi=rxi, status=status,
                     max_residual=mx, tol=tol)


def predict(fit: FitResult, design: DesignMatrix, X, Z, warn=True):
    """Conditional expectile prediction ``x'beta + Pi(z)'xi`` at new points."""
    X = np.atleast_2d(np.asarray(X, dtype=float))
    return X @ fit.beta + design.evaluate(Z, warn=warn) @ fit.xi
