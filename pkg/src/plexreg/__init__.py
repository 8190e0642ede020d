"""Penalized partially linear additive expectile regression."""

from .loss import (ExpectileLevel, empirical_grad, empirical_loss, expectile_grad,
                   expectile_loss, sample_expectile)
from .penalty import (PenaltySpec, dc_h_deriv, dc_h_value, lla_weights, penalty_deriv,
                      penalty_value)
from .solver import (ConvergenceError, Dataset, FitResult, KKTReport, SolverConfig,
                     fit_linear_lla, fit_nonparametric, kkt_report, oracle_fit, predict,
                     two_step_fit)
from .spline import DesignMatrix, SplineSpec, basis_eval, build_design, center_fit, make_knots

__version__ = "0.1.0"
