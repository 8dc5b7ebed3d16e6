"""The autonomous phase-plane ODE and the radial Bernstein-type checks.

In phase variables (eta = r v'/v as a function of t = log r, and
zeta(eta) = eta') the radial equation becomes first order:

    -zeta zeta' + (th+1) zeta^2/eta + zeta * A(eta) + B(eta)
        = lambda3 * eta^2 * exp(I),      I = int_{eta0}^eta (s+1)/zeta ds,

with A(eta) = [2n th - (2n-1)] eta - [2n th - 1] and
B(eta) = n eta (eta-1) { [n th - (n-1)] eta - [n th - 1] }.
lambda3 = 0 is the source (non-eigenvalue) equation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core import ModelParams, RadialProfile, AnalyticEvaluator, radial_residual
from .errors import DomainError, ParameterError

__all__ = [
    "PhaseRHS", "coef_linear", "coef_zero", "phase_rhs", "phase_residual",
    "stationary_eta", "bernstein_radial_check", "power_solution_residual",
]


def coef_linear(eta, n: int, theta: float):
    """Coefficient of zeta in the phase equation."""
    return (2 * n * theta - (2 * n - 1)) * np.asarray(eta) - (2 * n * theta - 1)


def coef_zero(eta, n: int, theta: float):
    """Zero-order term n eta (eta-1) {[n th-(n-1)] eta - [n th-1]}."""
    eta = np.asarray(eta)
    return n * eta * (eta - 1) * ((n * theta - (n - 1)) * eta - (n * theta - 1))


@dataclass
class PhaseRHS:
    """Right-hand side of the coupled (zeta, I) system in eta."""

    params: ModelParams

    def __call__(self, eta: float, zeta: float, I: float):
        return phase_rhs(eta, zeta, I, self.params)


def phase_rhs(eta: float, zeta: float, I: float, params: ModelParams):
    """(dzeta/deta, dI/deta) at a phase point.

    Solving the phase equation for zeta' places the exponential term at
    -lambda3 * eta^2 * e^I / zeta, so a negative lambda3 pushes the
    curve upward.
    """
    if zeta <= 0:
        raise DomainError(f"zeta must be positive, got {zeta}")
    if eta <= 1:
        raise DomainError(f"eta must exceed 1, got {eta}")
    n, theta = params.n, params.theta
    dzeta = ((theta + 1) * zeta / eta + coef_linear(eta, n, theta)
             + coef_zero(eta, n, theta) / zeta
             - params.lambda3 * eta * eta * math.exp(I) / zeta)
    return float(dzeta), (eta + 1) / zeta


def phase_residual(eta, zeta, dzeta, I, params: ModelParams):
    """Residual of the phase equation given samples of zeta' and I."""
    n, theta = params.n, params.theta
    eta = np.asarray(eta, dtype=float)
    return (-zeta * dzeta + (theta + 1) * zeta**2 / eta
            + zeta * coef_linear(eta, n, theta) + coef_zero(eta, n, theta)
            - params.lambda3 * eta**2 * np.exp(I))


def stationary_eta(n: int, theta: float) -> set:
    """Stationary values of eta: always 1, plus the root of the cubic factor.

    The second value (n th - 1)/(n th - (n-1)) corresponds to the power
    profile u ~ r^(eta*+1); it is returned when defined and positive.
    """
    out = {1.0}
    den = n * theta - (n - 1)
    if den != 0:
        root = (n * theta - 1) / den
        if root > 0:
            out.add(float(root))
    return out


def bernstein_radial_check(n: int, theta: float, eta_window, samples: int = 50,
                           trial_phis=(0.0, 1e-6, 1e-3, 1e-1)) -> dict:
    """Sign check behind the radial uniqueness theorem (dimension >= 3).

    With phi = eta^(-2(th+1)) zeta^2, the lambda3 = 0 phase equation
    forces   phi' = 2 sqrt(phi) eta^(-(th+1)) A(eta)
                    + 2 n eta^(-(2 th+1)) (eta-1) q(eta)
    on the zeta > 0 branch (eta > 1), and the same with the sqrt term
    negated on the zeta < 0 branch (eta < 1).  Near eta = 1 both
    coefficients are negative (resp. force phi' > 0 below 1), which
    contradicts phi >= 0 vanishing at the window edge; any non-trivial
    solution family is therefore excluded.  Samples where the
    zero-order coefficient changes sign (a stationary crossing) are
    reported separately, not as failures.
    """
    if n < 3:
        raise ParameterError(f"radial uniqueness check requires n >= 3, got {n}")
    lo, hi = float(eta_window[0]), float(eta_window[1])
    if not lo < hi:
        raise ParameterError("empty window")
    if lo < 1.0 < hi:
        raise ParameterError("window must not contain eta = 1")
    above = lo > 1.0
    etas = np.linspace(lo, hi, samples)
    etas = etas[np.abs(etas - 1.0) > 1e-12]
    witnesses = []
    crossings = []
    all_contradict = True
    want = -1 if above else +1
    for e in etas:
        c_sqrt = 2.0 * e ** (-(theta + 1)) * float(coef_linear(e, n, theta))
        if not above:
            c_sqrt = -c_sqrt
        term0 = 2.0 * n * e ** (-(2 * theta + 1)) * (e - 1) \
            * ((n * theta - (n - 1)) * e - (n * theta - 1))
        forced = [c_sqrt * math.sqrt(p) + term0 for p in trial_phis]
        sign = want if all(want * f > 0 for f in forced) else -want
        # zero-order coefficient changing sign marks a stationary value inside
        if term0 * want < 0 or (term0 == 0 and c_sqrt == 0):
            crossings.append(float(e))
            continue
        if sign != want:
            all_contradict = False
        witnesses.append({"eta": float(e), "forced_sign": "-" if sign < 0 else "+"})
    return {
        "n": n, "theta": theta, "window": [lo, hi], "samples": samples,
        "pass": bool(all_contradict and witnesses),
        "witnesses": witnesses, "stationary_crossings": crossings,
    }


def power_solution_residual(k: int, theta: float, C: float, nodes):
    """Residual of u = C r^(2 k^2) at the self-similar exponent.

    These power profiles solve the source equation in dimension N = 2k
    exactly when theta = (N+1)/(N+2); the parameter check enforces that.
    """
    if k < 2:
        raise ParameterError(f"power solutions need k >= 2, got {k}")
    N = 2 * k
    theta_star = (N + 1) / (N + 2)
    if abs(theta - theta_star) > 1e-12:
        raise ParameterError(
            f"theta must equal (N+1)/(N+2) = {theta_star!r} for N = {N}, got {theta}")
    p = 2 * k * k
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    if np.any(nodes <= 0):
        raise ParameterError("nodes must exclude the origin")

    def mono(j):
        # d^j/dr^j of C p r^(p-1)  (v = u')
        coef = C * p
        for i in range(j):
            coef *= (p - 1 - i)
        return lambda r, c=coef, q=p - 1 - j: c * r**q

    ev = AnalyticEvaluator(mono(0), [mono(1), mono(2), mono(3)])
    r = np.linspace(min(nodes) / 2, max(nodes) * 2, 16)
    prof = RadialProfile(r=r, v=mono(0)(r), u=C * r**p, n=N, evaluator=ev)
    return radial_residual(prof, theta, N, 0.0, nodes=nodes)
