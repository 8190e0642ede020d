"""Normalized B-spline bases and the additive design matrix.

Each nonparametric covariate is mapped affinely from its training range onto
[0, 1] and expanded in a clamped B-spline basis. The full basis sums to one,
which makes it collinear with the global intercept, so the first basis
function of every block is dropped. With the default cubic basis and no
internal knots this leaves 3 columns per covariate.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import List, Tuple

import numpy as np

KNOT_RULES = ("uniform", "quantile")


@dataclass(frozen=True)
class SplineSpec:
    order: int = 4
    internal_knots: int = 0
    knot_rule: str = "uniform"
    drop_first: bool = True

    def __post_init__(self):
        if int(self.order) != self.order or self.order < 2:
            raise ValueError(f"spline order must be an integer >= 2, got {self.order}")
        if int(self.internal_knots) != self.internal_knots or self.internal_knots < 0:
            raise ValueError(f"internal_knots must be a nonnegative integer, got {self.internal_knots}")
        if self.knot_rule not in KNOT_RULES:
            raise ValueError(f"knot_rule must be one of {KNOT_RULES}, got {self.knot_rule!r}")

    @property
    def n_raw(self) -> int:
        return self.internal_knots + self.order

    @property
    def n_basis(self) -> int:
        """Columns per covariate after the identifiability drop."""
        return self.n_raw - 1 if self.drop_first else self.n_raw


def make_knots(t, spec: SplineSpec) -> np.ndarray:
    """Clamped knot vector on [0, 1] for a column already mapped onto [0, 1]."""
    t = np.asarray(t, dtype=float).ravel()
    if np.unique(t).size < 2:
        raise ValueError("cannot place knots: column has fewer than two distinct values")
    k = spec.internal_knots
    if spec.knot_rule == "uniform":
        inner = np.arange(1, k + 1) / (k + 1.0)
    else:
        inner = np.quantile(t, np.arange(1, k + 1) / (k + 1.0))
    return np.concatenate([np.zeros(spec.order), inner, np.ones(spec.order)])


def basis_matrix(t, knots, order) -> np.ndarray:
    """Evaluate all normalized B-splines at the points ``t`` (Cox-de Boor).

    Points outside ``[knots[0], knots[-1]]`` are clamped to the boundary.
    Returns an array of shape ``(len(t), len(knots) - order)``.
    """
    knots = np.asarray(knots, dtype=float)
    t = np.clip(np.atleast_1d(np.asarray(t, dtype=float)), knots[0], knots[-1])
    n_int = len(knots) - 1
    B = np.zeros((t.size, n_int))
    for i in range(n_int):
        if knots[i] < knots[i + 1]:
            B[:, i] = (knots[i] <= t) & (t < knots[i + 1])
    # right endpoint belongs to the last nonempty interval
    last = max(i for i in range(n_int) if knots[i] < knots[i + 1])
    B[t == knots[-1], :] = 0.0
    B[t == knots[-1], last] = 1.0
    for k in range(2, order + 1):
        m = len(knots) - k
        out = np.zeros((t.size, m))
        for i in range(m):
            d1 = knots[i + k - 1] - knots[i]
            d2 = knots[i + k] - knots[i + 1]
            if d1 > 0:
                out[:, i] += (t - knots[i]) / d1 * B[:, i]
            if d2 > 0:
                out[:, i] += (knots[i + k] - t) / d2 * B[:, i + 1]
        B = out
    return B


def basis_eval(t: float, knots, order) -> np.ndarray:
    """All raw basis functions at a single point."""
    return basis_matrix([t], knots, order)[0]


@dataclass(frozen=True)
class DesignMatrix:
    """Assembled design ``Pi`` = [1, pi(z_1), ..., pi(z_d)] with its transforms.

    ``lower``/``upper`` hold the training range of every column and
    ``knots`` the knot vector of every block, so new points can be expanded
    with :meth:`evaluate`.
    """

    Pi: np.ndarray
    spec: SplineSpec
    lower: np.ndarray
    upper: np.ndarray
    knots: Tuple[np.ndarray, ...]
    blocks: Tuple[slice, ...] = field(default=())

    @property
    def n_cols(self) -> int:
        return self.Pi.shape[1]

    @property
    def d(self) -> int:
        return len(self.knots)

    def rank(self) -> int:
        return int(np.linalg.matrix_rank(self.Pi))

    def to_unit(self, Z, warn=True):
        """Map covariates onto [0, 1] with the training transform and clamp."""
        Z = np.atleast_2d(np.asarray(Z, dtype=float))
        if Z.shape[1] != self.d:
            raise ValueError(f"expected {self.d} nonparametric columns, got {Z.shape[1]}")
        U = (Z - self.lower) / (self.upper - self.lower)
        outside = (U < 0) | (U > 1)
        if warn and outside.any():
            warnings.warn(f"{int(outside.sum())} nonparametric value(s) outside the training "
                          "range were clamped to the boundary", stacklevel=2)
        return np.clip(U, 0.0, 1.0)

    def raw_block(self, j: int, u) -> np.ndarray:
        return basis_matrix(u, self.knots[j], self.spec.order)

    def evaluate(self, Z, warn=True) -> np.ndarray:
        """Rows of ``Pi`` for new covariate values."""
        U = self.to_unit(Z, warn=warn)
        return _assemble(U, self.knots, self.spec)


def _assemble(U, knots, spec: SplineSpec) -> np.ndarray:
    cols = [np.ones((U.shape[0], 1))]
    start = 1 if spec.drop_first else 0
    for j, kv in enumerate(knots):
        cols.append(basis_matrix(U[:, j], kv, spec.order)[:, start:])
    return np.hstack(cols)


def build_design(Z, spec: SplineSpec = SplineSpec()) -> DesignMatrix:
    """Expand the nonparametric covariates ``Z`` (n x d) into ``Pi`` (n x D_n)."""
    Z = np.asarray(Z, dtype=float)
    if Z.ndim == 1:
        Z = Z[:, None]
    if Z.shape[1] < 1:
        raise ValueError("need at least one nonparametric covariate")
    lower, upper = Z.min(axis=0), Z.max(axis=0)
    if np.any(upper <= lower):
        bad = np.flatnonzero(upper <= lower).tolist()
        raise ValueError(f"degenerate nonparametric column(s) {bad}: all values equal")
    U = (Z - lower) / (upper - lower)
    knots = tuple(make_knots(U[:, j], spec) for j in range(Z.shape[1]))
    Pi = _assemble(U, knots, spec)
    J = spec.n_basis
    blocks = tuple(slice(1 + j * J, 1 + (j + 1) * J) for j in range(Z.shape[1]))
    return DesignMatrix(Pi=Pi, spec=spec, lower=lower, upper=upper, knots=knots, blocks=blocks)


def center_fit(xi, design: DesignMatrix):
    """Split ``Pi @ xi`` into an intercept and mean-zero additive components.

    Parameters
    ----------
    xi : ndarray of shape (D_n,)
    design : DesignMatrix

    Returns
    -------
    mu : float
    G : ndarray of shape (n, d)
        Centered component evaluations; every column has sample mean zero.
    g : ndarray of shape (n,)
        ``mu + G.sum(axis=1)``, equal to ``Pi @ xi``.
    """
    xi = np.asarray(xi, dtype=float)
    if xi.shape != (design.n_cols,):
        raise ValueError(f"xi has shape {xi.shape}, expected ({design.n_cols},)")
    raw = np.column_stack([design.Pi[:, b] @ xi[b] for b in design.blocks])
    means = raw.mean(axis=0)
    G = raw - means
    mu = float(xi[0] + means.sum())
    return mu, G, mu + G.sum(axis=1)


def component_means(xi, design: DesignMatrix) -> List[float]:
    """Training-sample means of the uncentered components (centering constants)."""
    return [float(np.mean(design.Pi[:, b] @ xi[b])) for b in design.blocks]
