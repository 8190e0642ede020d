"""Asymmetric squared (expectile) loss and related quantities."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np


@dataclass(frozen=True)
class ExpectileLevel:
    """Expectile level ``alpha`` in (0, 1) with its curvature bounds.

    ``c1 = min(alpha, 1 - alpha)`` and ``c2 = max(alpha, 1 - alpha)`` bound
    the curvature of the loss: ``phi`` is sandwiched between ``c1 r^2`` and
    ``c2 r^2`` around any linearization point.
    """

    alpha: float

    def __post_init__(self):
        check_alpha(self.alpha)

    @property
    def c1(self) -> float:
        return min(self.alpha, 1.0 - self.alpha)

    @property
    def c2(self) -> float:
        return max(self.alpha, 1.0 - self.alpha)


def check_alpha(alpha) -> float:
    alpha = float(alpha)
    if not (0.0 < alpha < 1.0):
        raise ValueError(f"expectile level must lie in (0, 1), got {alpha}")
    return alpha


def expectile_loss(r, alpha):
    """phi_alpha(r) = |alpha - 1{r < 0}| r^2, elementwise."""
    r = np.asarray(r, dtype=float)
    return np.where(r < 0, 1.0 - alpha, alpha) * r * r


def expectile_grad(r, alpha):
    """psi_alpha(r) = 2 |alpha - 1{r < 0}| r, the derivative of the loss."""
    r = np.asarray(r, dtype=float)
    return 2.0 * np.where(r < 0, 1.0 - alpha, alpha) * r


def expectile_curvature(r, alpha):
    """Pointwise second-derivative analog used as IRLS weights.

    Off zero this is ``2 |alpha - 1{r < 0}|``; at ``r == 0`` the right limit
    ``2 alpha`` is used.
    """
    r = np.asarray(r, dtype=float)
    return 2.0 * np.where(r < 0, 1.0 - alpha, alpha)


def sample_expectile(values, alpha, tol=1e-12, max_iter=500):
    """Sample ``alpha``-expectile by bisection.

    Solves ``sum_i psi_alpha(v_i - m) = 0``. The left-hand side is strictly
    decreasing in ``m`` and changes sign on ``[min(v), max(v)]``.
    """
    alpha = check_alpha(alpha)
    v = np.asarray(values, dtype=float).ravel()
    if v.size == 0:
        raise ValueError("sample_expectile needs at least one value")
    if not np.all(np.isfinite(v)):
        raise ValueError("sample_expectile needs finite values")
    lo, hi = float(v.min()), float(v.max())
    if lo == hi:
        return lo
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        if hi - lo <= tol or mid in (lo, hi):
            break
        if np.sum(expectile_grad(v - mid, alpha)) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def _residuals(y, X, Pi, beta, xi):
    y = np.asarray(y, dtype=float)
    X = np.asarray(X, dtype=float)
    Pi = np.asarray(Pi, dtype=float)
    beta = np.asarray(beta, dtype=float)
    xi = np.asarray(xi, dtype=float)
    n = y.shape[0]
    if X.shape != (n, beta.shape[0]) or Pi.shape != (n, xi.shape[0]):
        raise ValueError(
            f"dimension mismatch: y {y.shape}, X {X.shape}, beta {beta.shape}, "
            f"Pi {Pi.shape}, xi {xi.shape}")
    return y - X @ beta - Pi @ xi


def empirical_loss(y, X, Pi, beta, xi, alpha):
    """Unpenalized empirical loss (1/n) sum_i phi_alpha(y_i - x_i'beta - Pi_i'xi)."""
    r = _residuals(y, X, Pi, beta, xi)
    return float(np.mean(expectile_loss(r, alpha)))


def empirical_grad(y, X, Pi, beta, xi, alpha):
    """Gradient of :func:`empirical_loss` with respect to ``beta`` and ``xi``.

    Returns
    -------
    grad_beta : ndarray of shape (p,)
        The components ``s_j``, j = 1..p.
    grad_xi : ndarray of shape (D_n,)
    """
    r = _residuals(y, X, Pi, beta, xi)
    psi = expectile_grad(r, alpha)
    n = r.shape[0]
    return -(np.asarray(X, float).T @ psi) / n, -(np.asarray(Pi, float).T @ psi) / n
