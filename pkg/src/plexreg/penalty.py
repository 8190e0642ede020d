"""Folded-concave penalties (SCAD, MCP), the L1 penalty, and their DC parts.

All functions accept scalars or arrays and broadcast elementwise.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional

import numpy as np

FAMILIES = ("scad", "mcp", "l1", "none")
DEFAULT_SHAPE = {"scad": 3.7, "mcp": 1.0}


@dataclass(frozen=True)
class PenaltySpec:
    """Penalty family with level ``lam`` and shape parameter.

    ``shape`` is SCAD's ``a`` (> 2, default 3.7) or MCP's ``b`` (> 0,
    default 1); it is ignored for ``l1`` and ``none``.
    """

    family: str = "scad"
    lam: float = 0.0
    shape: Optional[float] = None

    def __post_init__(self):
        family = str(self.family).lower()
        if family not in FAMILIES:
            raise ValueError(f"unknown penalty family {self.family!r}; expected one of {FAMILIES}")
        object.__setattr__(self, "family", family)
        if not np.isfinite(self.lam) or self.lam < 0:
            raise ValueError(f"penalty level must be finite and >= 0, got {self.lam}")
        object.__setattr__(self, "lam", float(self.lam))
        shape = self.shape
        if shape is None:
            shape = DEFAULT_SHAPE.get(family)
        if family == "scad" and not shape > 2:
            raise ValueError(f"SCAD requires a > 2, got {shape}")
        if family == "mcp" and not shape > 0:
            raise ValueError(f"MCP requires b > 0, got {shape}")
        object.__setattr__(self, "shape", None if shape is None else float(shape))

    def with_lam(self, lam: float) -> "PenaltySpec":
        return PenaltySpec(self.family, lam, self.shape)


def penalty_value(theta, spec: PenaltySpec):
    """P_lambda(|theta|)."""
    t = np.abs(np.asarray(theta, dtype=float))
    lam = spec.lam
    if spec.family == "none" or lam == 0.0:
        return np.zeros_like(t)
    if spec.family == "l1":
        return lam * t
    if spec.family == "scad":
        a = spec.shape
        mid = (a * lam * t - 0.5 * (t * t + lam * lam)) / (a - 1.0)
        return np.where(t <= lam, lam * t,
                        np.where(t <= a * lam, mid, 0.5 * (a + 1.0) * lam * lam))
    b = spec.shape
    return np.where(t <= lam * b, lam * t - t * t / (2.0 * b), 0.5 * lam * lam * b)


def penalty_deriv_abs(t, spec: PenaltySpec):
    """P'_lambda(t) for t >= 0, with the right limit P'(0+) = lambda at zero."""
    t = np.abs(np.asarray(t, dtype=float))
    lam = spec.lam
    if spec.family == "none" or lam == 0.0:
        return np.zeros_like(t)
    if spec.family == "l1":
        return np.full_like(t, lam)
    if spec.family == "scad":
        a = spec.shape
        return np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1.0))
    b = spec.shape
    return np.maximum(lam - t / b, 0.0)


def penalty_deriv(theta, spec: PenaltySpec):
    """Signed derivative P'_lambda(|theta|) sgn(theta).

    The derivative is set-valued at zero; there the right limit ``lambda`` is
    returned (the convention LLA needs), with sign taken as +1.
    """
    theta = np.asarray(theta, dtype=float)
    sgn = np.where(theta < 0, -1.0, 1.0)
    return sgn * penalty_deriv_abs(theta, spec)


def lla_weights(beta, spec: PenaltySpec):
    """Local linear approximation weights w_j = P'_lambda(|beta_j|)."""
    return penalty_deriv_abs(beta, spec)


def dc_h_value(theta, lam, shape, family="scad"):
    """Concave part H_lambda with lambda|theta| - H_lambda(theta) = P_lambda(theta).

    H is convex, even and continuously differentiable; it vanishes on
    ``|theta| <= lambda`` for SCAD.
    """
    t = np.abs(np.asarray(theta, dtype=float))
    if family == "scad":
        a = shape
        return np.where(t < lam, 0.0,
                        np.where(t <= a * lam,
                                 (t * t - 2.0 * lam * t + lam * lam) / (2.0 * (a - 1.0)),
                                 lam * t - 0.5 * (a + 1.0) * lam * lam))
    if family == "mcp":
        b = shape
        return np.where(t <= lam * b, t * t / (2.0 * b), lam * t - 0.5 * lam * lam * b)
    raise ValueError(f"DC decomposition defined for scad and mcp, not {family!r}")


def dc_h_deriv(theta, lam, shape, family="scad"):
    """Derivative of :func:`dc_h_value`; continuous with H'(0) = 0."""
    theta = np.asarray(theta, dtype=float)
    t = np.abs(theta)
    sgn = np.sign(theta)
    if family == "scad":
        a = shape
        return np.where(t < lam, 0.0,
                        np.where(t <= a * lam, (theta - lam * sgn) / (a - 1.0), lam * sgn))
    if family == "mcp":
        b = shape
        return np.where(t <= lam * b, theta / b, lam * sgn)
    raise ValueError(f"DC decomposition defined for scad and mcp, not {family!r}")
