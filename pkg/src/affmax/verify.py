"""Assemble u(x, y) = kappa*phi(|x|) + psi(|y|) (+ |z|^2/2 cylinder factors)
and verify the original equation u^{ij} D_ij w = 0, w = (det D^2 u)^(-theta),
by independent finite differences at sample points, together with
convexity and completeness checks.

The scaling law behind the assembly: u -> kappa u sends the factor
eigenvalue to lambda/kappa (w scales by kappa^(-n theta) and u^{ij} by
kappa^(-1)), so kappa = lambda_phi / (-lambda_psi) makes the two factor
eigenvalues exactly opposite and the sum solves the source equation.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.interpolate import make_interp_spline

from .core import (ProfileEvaluator, RadialProfile, SeparableSolution,
                   VerificationReport, effective_lambda_fit,
                   eigenvalue_from_lambda_prime)
from .errors import NearSingular, ParameterError, SignError
from .reconstruct import large_condition_check

__all__ = [
    "DataEvaluator", "assemble", "full_residual", "convexity_check",
    "completeness_check", "bernstein_1d_check", "residual_at",
    "hessian_eigenvalues_at", "factor_residual_phi", "factor_residual_psi",
]


class DataEvaluator(ProfileEvaluator):
    """Quintic-spline evaluator over stored (r, v, u) columns.

    Used when a profile arrives from CSV/JSON without its construction;
    derivative accuracy is then limited by the stored grid density.
    """

    def __init__(self, profile: RadialProfile):
        self._S = make_interp_spline(profile.r, profile.v, k=5)
        self._U = make_interp_spline(profile.r, profile.u, k=5)
        self._d = [self._S.derivative(k) for k in (1, 2, 3)]
        self._lo, self._hi = float(profile.r[0]), float(profile.r[-1])

    def _clip(self, r):
        return min(max(abs(r), self._lo), self._hi)

    def v(self, r):
        return float(self._S(self._clip(r))) * (1.0 if r >= 0 else -1.0)

    def u(self, r):
        return float(self._U(self._clip(r)))

    def deriv(self, r, k):
        if 1 <= k <= 3:
            val = float(self._d[k - 1](self._clip(r)))
            return val if (k % 2 == 1 or r >= 0) else -val
        return None

    def max_order(self):
        return 3


def _fit_nodes(profile: RadialProfile):
    """Interior radii for eigenvalue fits: away from 0 and the grid edge."""
    r = profile.r
    r_lo, r_hi = 0.1 * r[-1], 0.75 * r[-1]
    lo = max(r_lo, r[0] + 0.05 * (r[-1] - r[0]), 1e-2)
    return np.linspace(lo, r_hi, 9)


def assemble(phi: RadialProfile, psi: RadialProfile, m_cylinder: int = 0,
             theta: float | None = None, R_inf: float | None = None,
             spread_tol: float = 1e-3) -> SeparableSolution:
    """Scale phi so the factor eigenvalues are opposite and combine.

    Requires the fitted eigenvalues to have strictly opposite signs
    (SignError otherwise) and theta inside (1/2, n/(n+1)) for the
    psi dimension n (the range on which both factor constructions are
    available and complete).
    """
    if theta is None:
        theta = psi.meta.get("theta")
        if theta is None:
            raise ParameterError("theta is required")
    if m_cylinder < 0 or int(m_cylinder) != m_cylinder:
        raise ParameterError("m_cylinder must be a nonnegative integer")
    n = psi.n
    if not 0.5 < theta < n / (n + 1):
        raise ParameterError(
            f"assembly needs theta in (1/2, {n/(n+1)}) for the {n}-dimensional factor")
    lp_phi, _ = effective_lambda_fit(phi, theta, phi.n, nodes=_fit_nodes(phi),
                                     spread_tol=spread_tol)
    lp_psi, _ = effective_lambda_fit(psi, theta, n, nodes=_fit_nodes(psi),
                                     spread_tol=spread_tol)
    lam_phi = eigenvalue_from_lambda_prime(lp_phi, theta)
    lam_psi = eigenvalue_from_lambda_prime(lp_psi, theta)
    if lam_phi * lam_psi >= 0:
        raise SignError(
            f"factor eigenvalues {lam_phi:.4g}, {lam_psi:.4g} do not have opposite signs")
    if lam_phi < 0:
        raise SignError("expected the 1-D factor to carry the positive eigenvalue")
    kappa = lam_phi / (-lam_psi)
    if R_inf is None:
        R_inf = psi.meta.get("R_inf", math.inf)
    return SeparableSolution(phi=phi.scaled(kappa), psi=psi, kappa=kappa,
                             theta=theta, R_inf=R_inf, m_cylinder=int(m_cylinder),
                             lambda_phi=lam_phi / kappa, lambda_psi=lam_psi)


# ---------------------------------------------------------------------------
# pointwise machinery


def _det_parts(sol: SeparableSolution, xq: float, rho: float):
    phi2 = sol.phi.v_deriv_at(xq, 1)       # phi''
    psi1 = sol.psi.v_at(rho)               # psi'
    psi2 = sol.psi.v_deriv_at(rho, 1)      # psi''
    return phi2, psi1, psi2


def _w_value(sol: SeparableSolution, xq: float, rho: float) -> float:
    phi2, psi1, psi2 = _det_parts(sol, xq, rho)
    det = phi2 * psi2 * (psi1 / rho) ** (sol.psi.n - 1)
    if det < 1e-12:
        raise NearSingular(f"det D^2 u = {det:.3e} at (x={xq:.3g}, rho={rho:.3g})")
    return det ** (-sol.theta)


def _hessian_fd(f, p: np.ndarray, h: np.ndarray) -> np.ndarray:
    N = len(p)
    H = np.empty((N, N))
    f0 = f(p)
    for i in range(N):
        ei = np.zeros(N); ei[i] = h[i]
        H[i, i] = (f(p + ei) - 2.0 * f0 + f(p - ei)) / h[i] ** 2
        for j in range(i):
            ej = np.zeros(N); ej[j] = h[j]
            H[i, j] = H[j, i] = (f(p + ei + ej) - f(p + ei - ej)
                                 - f(p - ei + ej) + f(p - ei - ej)) / (4 * h[i] * h[j])
    return H


def _inverse_hessian(sol: SeparableSolution, xq: float, y: np.ndarray) -> np.ndarray:
    """Block-diagonal u^{ij}: 1/phi'' + radial inverse + identity."""
    n, m = sol.psi.n, sol.m_cylinder
    rho = float(np.linalg.norm(y))
    phi2, psi1, psi2 = _det_parts(sol, xq, rho)
    N = 1 + n + m
    inv = np.zeros((N, N))
    inv[0, 0] = 1.0 / phi2
    yy = np.outer(y, y)
    inv[1:1 + n, 1:1 + n] = (rho / psi1) * (np.eye(n)
                                            - (rho * psi2 - psi1) / (rho**3 * psi2) * yy)
    for k in range(m):
        inv[1 + n + k, 1 + n + k] = 1.0
    return inv


def residual_at(sol: SeparableSolution, point: np.ndarray,
                h_rel: float = 1e-3, richardson: bool = True) -> float:
    """u^{ij} D_ij w at one point, with w differentiated by nested FD."""
    p = np.asarray(point, dtype=float)
    N = 1 + sol.psi.n + sol.m_cylinder
    if len(p) != N:
        raise ParameterError(f"point must have {N} coordinates")

    def w_of(q):
        rho = float(np.linalg.norm(q[1:1 + sol.psi.n]))
        return _w_value(sol, float(q[0]), rho)

    h = h_rel * np.maximum(np.abs(p), 1.0)
    H = _hessian_fd(w_of, p, h)
    if richardson:
        H2 = _hessian_fd(w_of, p, h / 2.0)
        H = (4.0 * H2 - H) / 3.0
    inv = _inverse_hessian(sol, float(p[0]), p[1:1 + sol.psi.n])
    return float(np.sum(inv * H))


def hessian_eigenvalues_at(sol: SeparableSolution, point: np.ndarray) -> np.ndarray:
    """Eigenvalues of the assembled D^2 u at one point."""
    p = np.asarray(point, dtype=float)
    n, m = sol.psi.n, sol.m_cylinder
    y = p[1:1 + n]
    rho = float(np.linalg.norm(y))
    phi2, psi1, psi2 = _det_parts(sol, float(p[0]), rho)
    N = 1 + n + m
    hess = np.zeros((N, N))
    hess[0, 0] = phi2
    hess[1:1 + n, 1:1 + n] = (psi1 / rho) * np.eye(n) \
        + (psi2 - psi1 / rho) * np.outer(y, y) / rho**2
    for k in range(m):
        hess[1 + n + k, 1 + n + k] = 1.0
    return np.linalg.eigvalsh(hess)


def _sample_points(sol: SeparableSolution, n_points: int, seed: int,
                   h_rel: float = 1e-3):
    """Interior samples: |x| inside the phi table, rho away from 0 and R_inf."""
    rng = np.random.default_rng(seed)
    n, m = sol.psi.n, sol.m_cylinder
    x_max = 0.8 * float(sol.phi.r[-1])
    r_lo = max(10.0 * h_rel, 20.0 * sol.psi.meta.get("r_min", sol.psi.r[0] + 1e-9))
    r_hi = 0.95 * float(sol.psi.meta.get("r_max", sol.psi.r[-1]))
    pts = np.empty((n_points, 1 + n + m))
    pts[:, 0] = rng.uniform(-x_max, x_max, n_points)
    rho = np.exp(rng.uniform(math.log(r_lo), math.log(r_hi), n_points))
    dirs = rng.normal(size=(n_points, n))
    dirs /= np.linalg.norm(dirs, axis=1)[:, None]
    pts[:, 1:1 + n] = rho[:, None] * dirs
    if m:
        pts[:, 1 + n:] = rng.uniform(-1.0, 1.0, (n_points, m))
    return pts


def full_residual(sol: SeparableSolution, n_points: int = 1000, seed: int = 0,
                  h_rel: float = 1e-3) -> VerificationReport:
    """Residual statistics of the source equation at random interior points."""
    pts = _sample_points(sol, n_points, seed, h_rel)
    res = np.array([residual_at(sol, p, h_rel=h_rel) for p in pts])
    eigs = np.array([hessian_eigenvalues_at(sol, p).min() for p in pts])
    blow = {"T_inf": math.log(sol.R_inf) if np.isfinite(sol.R_inf) else None,
            "R_inf": sol.R_inf if np.isfinite(sol.R_inf) else None}
    report = VerificationReport(
        residual_max=float(np.max(np.abs(res))),
        residual_mean=float(np.mean(np.abs(res))),
        convexity_margin=float(np.min(eigs)),
        bounds=[],
        blowup=blow,
        effective_lambda={"lambda_phi": sol.lambda_phi,
                          "lambda_psi": sol.lambda_psi, "kappa": sol.kappa},
    )
    report.residuals = res.tolist()
    return report


def convexity_check(sol: SeparableSolution, points=None, n_points: int = 200,
                    seed: int = 1) -> float:
    """Minimum eigenvalue of D^2 u over the sampled points."""
    if points is None:
        points = _sample_points(sol, n_points, seed)
    return float(min(hessian_eigenvalues_at(sol, p).min() for p in points))


def factor_residual_phi(sol: SeparableSolution, xq: float, h: float = 1e-4) -> float:
    """phi^{ij} D_ij w_phi = w_phi''/phi'' at a 1-D factor point."""
    def w_phi(x):
        return sol.phi.v_deriv_at(x, 1) ** (-sol.theta)
    d2 = (w_phi(xq + h) - 2 * w_phi(xq) + w_phi(xq - h)) / h**2
    return d2 / sol.phi.v_deriv_at(xq, 1)


def factor_residual_psi(sol: SeparableSolution, rho: float, h: float = 1e-4) -> float:
    """psi^{ij} D_ij w_psi via the radial operator (r/v)[(v/(r v')) d2 + (n-1)/r d1]."""
    n = sol.psi.n

    def w_psi(r):
        v1 = sol.psi.v_at(r)
        v2 = sol.psi.v_deriv_at(r, 1)
        return (v2 * (v1 / r) ** (n - 1)) ** (-sol.theta)

    d1 = (w_psi(rho + h) - w_psi(rho - h)) / (2 * h)
    d2 = (w_psi(rho + h) - 2 * w_psi(rho) + w_psi(rho - h)) / h**2
    v1 = sol.psi.v_at(rho)
    v2 = sol.psi.v_deriv_at(rho, 1)
    return (rho / v1) * ((v1 / (rho * v2)) * d2 + (n - 1) / rho * d1)


def completeness_check(sol: SeparableSolution, ceiling: float = 1e6) -> dict:
    """u -> infinity toward every boundary direction of R x B_{R_inf} x R^m.

    The phi side grows at least linearly for large |x| (its curvature is
    positive and u' increasing), so u exceeds any ceiling at a finite,
    reported |x|.  The psi side delegates to the boundary blow-up check.
    """
    phi = sol.phi
    xs = phi.r[-1] * np.array([0.25, 0.5, 1.0])
    u_vals = np.array([phi.evaluator.u(x) if phi.evaluator is not None
                       and phi.evaluator.u(x) is not None
                       else np.interp(x, phi.r, phi.u) for x in xs])
    increasing = bool(u_vals[0] < u_vals[1] < u_vals[2])
    slope = (u_vals[2] - u_vals[1]) / (xs[2] - xs[1])
    x_ceiling = xs[2] + max(ceiling - u_vals[2], 0.0) / slope if slope > 0 else math.inf
    phi_ok = increasing and slope > 0
    psi_rep = large_condition_check(sol.psi, sol.R_inf, ceiling=ceiling)
    return {
        "pass": bool(phi_ok and psi_rep["pass"]),
        "phi": {"increasing": increasing, "slope": float(slope),
                "u_reaches_ceiling_at": float(x_ceiling)},
        "psi": psi_rep,
        "backs": "u -> inf as |x| -> inf and as |y| -> R_inf",
    }


# ---------------------------------------------------------------------------
# the 1-D uniqueness check


def bernstein_1d_check(theta: float,
                       c2_values=(-2.0, -0.5, 0.5, 2.0),
                       c3_values=(0.0, 0.7, 1.5)) -> dict:
    """Every non-quadratic 1-D branch violates convexity or the large condition.

    The general solution family has (u'')^(-theta) = -theta C2 x + C3.
    For each sampled (C2, C3) with C2 != 0 and each normalised domain
    (the line, the unit interval, the half-line) the case analysis
    p(x) = -theta C2 x + C3 shows convexity (p > 0 on the domain) and
    largeness (u -> inf at every finite boundary point) cannot both
    hold; only C2 = 0 (the quadratic) survives on the line.
    """
    if theta <= 0:
        raise ParameterError("theta must be positive")
    cases = []

    def boundary_large(pb: float) -> bool:
        # u'' ~ p^(-1/theta); at a boundary point with p(b) > 0 the
        # integral is finite.  With p(b) = 0 it diverges only for
        # theta <= 1/2 (u' ~ (b-x)^(1-1/theta) otherwise integrable).
        if pb > 0:
            return False
        return theta <= 0.5

    for C2 in c2_values:
        for C3 in c3_values:
            p0, p1 = C3, C3 - theta * C2

            # the line: p must be positive everywhere
            convex_line = C2 == 0 and C3 > 0
            cases.append({"C2": C2, "C3": C3, "domain": "line",
                          "convex": convex_line, "large": None,
                          "excluded": not convex_line,
                          "reason": "linear p changes sign on the line"})

            # the unit interval [0, 1]
            convex_int = (min(p0, p1) > 0) or (p0 == 0 and p1 > 0) or (p1 == 0 and p0 > 0)
            large_int = convex_int and boundary_large(p0) and boundary_large(p1)
            cases.append({"C2": C2, "C3": C3, "domain": "interval",
                          "convex": bool(convex_int), "large": bool(large_int),
                          "excluded": not (convex_int and large_int),
                          "reason": "u finite at an endpoint with p > 0"})

            # the half-line [0, inf)
            slope = -theta * C2
            convex_half = (slope > 0 and p0 >= 0 and (p0 > 0 or slope > 0)) or \
                          (slope == 0 and p0 > 0) or (slope >= 0 and p0 > 0)
            large_half = bool(convex_half) and boundary_large(p0)
            cases.append({"C2": C2, "C3": C3, "domain": "halfline",
                          "convex": bool(convex_half), "large": bool(large_half),
                          "excluded": not (convex_half and large_half),
                          "reason": "u finite at x = 0"})

    nonquad = [c for c in cases if c["C2"] != 0]
    all_excluded = all(c["excluded"] for c in nonquad)
    quad_ok = True  # C2 = 0, C3 > 0 is convex and entire on the line
    return {"theta": theta, "pass": bool(all_excluded and quad_ok), "cases": cases}
