"""Selection of the penalty level by a held-out tuning set or k-fold CV."""

from __future__ import annotations

import warnings
from dataclasses import dataclass, replace
from typing import List, Optional

import numpy as np

from .loss import expectile_grad, expectile_loss
from .solver import (Dataset, FitResult, SolverConfig, fit_nonparametric, lipschitz_estimate,
                     predict, two_step_fit)
from .spline import DesignMatrix, SplineSpec, build_design


@dataclass(frozen=True)
class TuneResult:
    lam: float
    index: int
    grid: np.ndarray
    losses: np.ndarray
    fit: Optional[FitResult] = None
    fold_losses: Optional[np.ndarray] = None


def lambda_max(dataset: Dataset, design: DesignMatrix, alpha: float,
               config: Optional[SolverConfig] = None) -> float:
    """Smallest level at which the first L1 step keeps every coefficient at zero."""
    cfg = config or SolverConfig(alpha=alpha)
    cfg = replace(cfg, alpha=alpha)
    xi = fit_nonparametric(dataset.y, dataset.X, np.zeros(dataset.p), design, cfg)
    psi = expectile_grad(dataset.y - design.Pi @ xi, alpha)
    s = dataset.X.T @ psi / dataset.n
    return float(np.max(np.abs(s))) if s.size else 0.0


def lambda_grid(lmax: float, n_lambda: int = 50, eps: float = 0.01) -> np.ndarray:
    """Descending geometric grid from ``lmax`` down to ``eps * lmax``."""
    if not lmax > 0:
        raise ValueError(f"lambda_max must be positive to build a grid, got {lmax}")
    if n_lambda < 1:
        raise ValueError("grid needs at least one value")
    if n_lambda == 1:
        return np.array([float(lmax)])
    return float(lmax) * np.geomspace(1.0, eps, n_lambda)


def _check_grid(grid) -> np.ndarray:
    grid = np.asarray(grid, dtype=float).ravel()
    if grid.size == 0:
        raise ValueError("empty lambda grid")
    if np.any(grid <= 0) or not np.all(np.isfinite(grid)):
        raise ValueError("lambda grid values must be positive and finite")
    return np.sort(grid)[::-1]


def fit_path(dataset: Dataset, design: DesignMatrix, grid, config: SolverConfig,
             max_active: Optional[int] = None, warm_start: bool = True) -> List[FitResult]:
    """Fit along a descending grid, warm-starting each level from the previous one.

    The first level uses ``config.init``. With ``max_active`` set, the path
    stops after the first fit whose active set exceeds it.
    """
    grid = _check_grid(grid)
    lip = lipschitz_estimate(dataset.X, config.alpha)
    fits: List[FitResult] = []
    prev = None
    for lam in grid:
        cfg = config.with_lam(lam)
        xi0 = None
        if warm_start and prev is not None:
            cfg = replace(cfg, init="user", beta_init=prev.beta)
            xi0 = prev.xi
        fit = two_step_fit(dataset, design, cfg, xi_init=xi0, lipschitz=lip)
        fits.append(fit)
        prev = fit
        if max_active is not None and fit.size > max_active:
            break
    return fits


def prediction_loss(fit: FitResult, design: DesignMatrix, data: Dataset) -> float:
    with warnings.catch_warnings():
        warnings.simplefilter("ignore")
        pred = predict(fit, design, data.X, data.Z, warn=False)
    return float(np.mean(expectile_loss(data.y - pred, fit.config.alpha)))


def _select(losses: np.ndarray) -> int:
    # descending grid: argmin returns the first minimizer, i.e. the sparser model on ties
    return int(np.argmin(losses))


def tune_by_validation(train: Dataset, tune_set: Dataset, grid, config: SolverConfig,
                       spline: SplineSpec = SplineSpec(), design: Optional[DesignMatrix] = None,
                       max_active: Optional[int] = None) -> TuneResult:
    """Pick the level minimizing the mean expectile loss on ``tune_set``."""
    grid = _check_grid(grid)
    design = design or build_design(train.Z, spline)
    fits = fit_path(train, design, grid, config, max_active=max_active)
    losses = np.full(grid.size, np.inf)
    for k, fit in enumerate(fits):
        losses[k] = prediction_loss(fit, design, tune_set)
    best = _select(losses)
    return TuneResult(lam=float(grid[best]), index=best, grid=grid, losses=losses,
                      fit=fits[best])


def make_folds(n: int, k: int, seed) -> np.ndarray:
    """Fold label per row: a seeded shuffle split into ``k`` near-equal parts."""
    if k < 2:
        raise ValueError(f"need k >= 2 folds, got {k}")
    if k > n:
        raise ValueError(f"cannot split {n} rows into {k} folds")
    perm = np.random.default_rng(seed).permutation(n)
    labels = np.empty(n, dtype=int)
    for f, idx in enumerate(np.array_split(perm, k)):
        labels[idx] = f
    return labels


def tune_by_cv(dataset: Dataset, k: int, grid, config: SolverConfig, seed=0,
               spline: SplineSpec = SplineSpec(), folds=None,
               max_active: Optional[int] = None) -> TuneResult:
    """k-fold cross-validation of the penalty level.

    Each fold builds its own spline design from its training rows; held-out
    rows are mapped with that fold's transform. The score per level is the
    mean over folds of the held-out mean expectile loss. Pass ``folds`` (a
    label per row) to fix the partition.
    """
    grid = _check_grid(grid)
    labels = make_folds(dataset.n, k, seed) if folds is None else np.asarray(folds, dtype=int)
    if labels.shape != (dataset.n,):
        raise ValueError("folds must give one label per row")
    ids = np.unique(labels)
    fold_losses = np.full((ids.size, grid.size), np.inf)
    for f, lab in enumerate(ids):
        tr, te = dataset.subset(labels != lab), dataset.subset(labels == lab)
        design = build_design(tr.Z, spline)
        fits = fit_path(tr, design, grid, config, max_active=max_active)
        for j, fit in enumerate(fits):
            fold_losses[f, j] = prediction_loss(fit, design, te)
    losses = fold_losses.mean(axis=0)
    best = _select(losses)
    return TuneResult(lam=float(grid[best]), index=best, grid=grid, losses=losses,
                      fold_losses=fold_losses)
