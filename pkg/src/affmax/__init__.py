"""Separable solutions of the affine maximal type equation.

Builds the two radial factors (an entire 1-D factor from a closed-form
curvature quadrature, and a bounded n-dimensional factor from a
calibrated phase-plane fixed point), reconstructs profiles, assembles
u(x, y) = kappa*phi + psi on R x B_{R_inf}, and verifies the equation,
convexity, growth bounds, blow-up radius and completeness numerically.
"""

__version__ = "0.1.0"
SCHEMA_VERSION = 1

from .core import (ModelParams, PhaseCurve, RadialProfile, SeparableSolution,
                   TaylorData, VerificationReport, effective_lambda_fit,
                   profile_to_phase, radial_residual)
from .negative_pair import (LocalSolve, blowup_time, calibrate_lambda,
                            extend_global, fixed_point_solve,
                            growth_bounds_check, taylor_coeffs)
from .phase_plane import (bernstein_radial_check, phase_rhs,
                          power_solution_residual, stationary_eta)
from .positive_pair import (PositivePairConfig, build_phi, integrate_direct,
                            quadrature_r_of_v, v_of_r)
from .reconstruct import etabar_of_r, large_condition_check, rebuild_profile, t_of_eta
from .verify import (assemble, bernstein_1d_check, completeness_check,
                     convexity_check, full_residual)

__all__ = [
    "__version__", "SCHEMA_VERSION",
    "ModelParams", "TaylorData", "PhaseCurve", "RadialProfile",
    "SeparableSolution", "VerificationReport",
    "radial_residual", "profile_to_phase", "effective_lambda_fit",
    "phase_rhs", "stationary_eta", "bernstein_radial_check",
    "power_solution_residual",
    "PositivePairConfig", "quadrature_r_of_v", "v_of_r", "integrate_direct",
    "build_phi",
    "taylor_coeffs", "calibrate_lambda", "fixed_point_solve", "LocalSolve",
    "extend_global", "growth_bounds_check", "blowup_time",
    "t_of_eta", "etabar_of_r", "rebuild_profile", "large_condition_check",
    "assemble", "full_residual", "convexity_check", "completeness_check",
    "bernstein_1d_check",
]
