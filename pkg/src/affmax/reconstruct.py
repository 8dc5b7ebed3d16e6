"""Rebuild the radial profile (etabar(r), v(r), u(r)) from a phase curve.

All reconstruction integrals are taken in eta with the singular parts
split off analytically.  With x = eta - 1, d1 = zeta'(1) and anchor
r0 = 1 at eta0 (so t(eta0) = 0, t = log r):

    t(eta) = (1/d1) log(x/x0) + tau(eta),   tau' = 1/zeta - 1/(d1 x)
    log v  = log v0 + t + W(eta),           W'   = (eta-1)/zeta  (regular)
    u(eta) = int_1^eta  e^(W + 2 tau) (x/x0)^(2/d1) * [x/zeta] / x  deta

so r ~ x^(1/d1), v ~ e^(W(1)) r near the origin, and every integrand is
regular at the singular endpoint.  Derivatives of the rebuilt profile
come from the exact chain

    v' = v etabar / r,
    v'' = v (etabar^2 + zeta - etabar) / r^2,
    v''' = v [ (etabar-2) G + zeta (2 etabar + zeta' - 1) ] / r^3,
           G = etabar^2 + zeta - etabar,  zeta' = d(log zeta)/dt,

rather than finite differences.
"""

from __future__ import annotations

import math

import numpy as np
from scipy.integrate import cumulative_simpson
from scipy.interpolate import make_interp_spline

from .core import PhaseCurve, ProfileEvaluator, RadialProfile
from .errors import ParameterError, PositivityLoss
from .negative_pair import _ratio_x_over_phi

__all__ = ["t_of_eta", "etabar_of_r", "rebuild_profile", "large_condition_check",
           "paraboloid_profile", "origin_compatibility", "PhaseProfileEvaluator"]


def _tau_integrand(x, zeta, taylor):
    """1/zeta - 1/(d1 x), regular at x = 0."""
    d, a, b, g = taylor.d1, taylor.alpha, taylor.beta, taylor.gamma
    out = np.empty_like(x)
    small = x < 1e-4
    xs = x[small]
    a1, a2, a3 = a / (2 * d), b / (6 * d), g / (24 * d)
    out[small] = -(a1 + a2 * xs + a3 * xs * xs) / (
        d * (1 + a1 * xs + a2 * xs**2 + a3 * xs**3))
    out[~small] = 1.0 / zeta[~small] - 1.0 / (d * x[~small])
    return out


def _tables(curve: PhaseCurve, v0: float, r0: float = 1.0):
    """Cumulative t, W, log v, u on the curve grid, anchored at eta0."""
    if r0 != 1.0:
        raise ParameterError("the reconstruction anchor is fixed at r0 = 1")
    eta, zeta = curve.eta, curve.zeta
    x = eta - 1.0
    x0 = curve.params.eta0 - 1.0
    i0 = int(np.argmin(np.abs(eta - curve.params.eta0)))
    if abs(eta[i0] - curve.params.eta0) > 1e-9 * curve.params.eta0:
        raise ParameterError("curve grid must contain eta0 (the anchor)")
    tay = curve.taylor
    d1 = tay.d1
    tau_i = _tau_integrand(x, zeta, tay)
    ratio = _ratio_x_over_phi(x, zeta, tay)          # x/zeta, stable
    ctau = cumulative_simpson(tau_i, x=eta, initial=0.0)
    tau = ctau - ctau[i0]
    cW = cumulative_simpson(ratio, x=eta, initial=0.0)
    W = cW - cW[i0]
    t = tau + np.log(x / x0) / d1
    logv = math.log(v0) + W + t
    u_int = np.exp(W + 2.0 * tau) * np.power(x / x0, 2.0 / d1) * ratio / x
    u = cumulative_simpson(u_int, x=eta, initial=0.0) * v0
    u += v0 * u_int[0] * x[0] * (d1 / 2.0)           # analytic piece over (1, eta[0])
    return {"eta": eta, "x": x, "zeta": zeta, "t": t, "W": W,
            "logv": logv, "u": u, "i0": i0, "v0": v0, "d1": d1}


def t_of_eta(curve: PhaseCurve, eta0: float | None = None):
    """Sampled t(eta) = int_{eta0}^eta ds/zeta on the curve grid.

    t(eta0) = 0; t -> -inf logarithmically at eta -> 1+ and increases
    toward the blow-up time as eta grows.
    """
    if eta0 is not None and abs(eta0 - curve.params.eta0) > 1e-12:
        raise ParameterError("eta0 must match the curve anchor")
    tab = _tables(curve, v0=1.0)
    return tab["eta"], tab["t"]


class PhaseProfileEvaluator(ProfileEvaluator):
    """Point evaluation of the rebuilt profile through quintic splines in t."""

    def __init__(self, tab):
        t = tab["t"]
        self.t_min, self.t_max = float(t[0]), float(t[-1])
        self.r_min, self.r_max = math.exp(self.t_min), math.exp(self.t_max)
        self.d1 = tab["d1"]
        self._LX = make_interp_spline(t, np.log(tab["x"]), k=5)
        self._LZ = make_interp_spline(t, np.log(tab["zeta"]), k=5)
        self._LV = make_interp_spline(t, tab["logv"], k=5)
        self._U = make_interp_spline(t, tab["u"], k=5)
        self._dLZ = self._LZ.derivative()
        # slope of v at the origin: v ~ vp0 * r below the grid
        self.vp0 = math.exp(float(tab["logv"][0]) - self.t_min)
        self._x_min = float(tab["x"][0])

    # -- scalar helpers ----------------------------------------------------
    def _state(self, r):
        t = min(max(math.log(r), self.t_min), self.t_max)
        x = math.exp(float(self._LX(t)))
        return t, 1.0 + x, math.exp(float(self._LZ(t)))

    def etabar(self, r):
        if r < self.r_min:
            # etabar - 1 ~ r^d1 below the table
            return 1.0 + self._x_min * (r / self.r_min) ** self.d1
        return self._state(r)[1]

    def v(self, r):
        r = abs(r)
        if r < self.r_min:
            return self.vp0 * r
        return math.exp(float(self._LV(min(math.log(r), self.t_max))))

    def u(self, r):
        r = abs(r)
        if r < self.r_min:
            return 0.5 * self.vp0 * r * r
        return float(self._U(min(math.log(r), self.t_max)))

    def deriv(self, r, k):
        r = abs(r)
        if r < self.r_min:
            return self.vp0 if k == 1 else 0.0
        t, etab, zeta = self._state(r)
        vv = math.exp(float(self._LV(t)))
        if k == 1:
            return vv * etab / r
        G = etab * etab + zeta - etab
        if k == 2:
            return vv * G / (r * r)
        if k == 3:
            zp = float(self._dLZ(t))
            return vv * ((etab - 2.0) * G + zeta * (2.0 * etab + zp - 1.0)) / r**3
        return None

    def max_order(self):
        return 3


def etabar_of_r(curve: PhaseCurve, r_grid):
    """etabar(r) with etabar(1) = eta0, plus near-origin bound witnesses.

    The flow d etabar/dr = zeta(etabar)/r is integrated via the
    monotone time change t = log r (both directions from r0 = 1).
    Asserts 0 < etabar - 1 with the scan-extracted quadratic bound
    etabar - 1 <= C r^2 and the weaker etabar - 1 <= C_a r^(2a), a < 1.
    """
    r_grid = np.atleast_1d(np.asarray(r_grid, dtype=float))
    tab = _tables(curve, v0=1.0)
    ev = PhaseProfileEvaluator(tab)
    if np.any(r_grid < ev.r_min) or np.any(r_grid > ev.r_max):
        raise ParameterError(
            f"r grid must lie in [{ev.r_min:.3g}, {ev.r_max:.3g}] covered by the curve")
    etab = np.array([ev.etabar(r) for r in r_grid])
    if np.any(etab <= 1.0):
        raise PositivityLoss("etabar dropped to 1 at positive radius")
    small = r_grid <= 0.1
    report = {}
    if np.any(small):
        ratio2 = (etab[small] - 1.0) / r_grid[small] ** 2
        alpha_p = 0.9
        ratio_a = (etab[small] - 1.0) / r_grid[small] ** (2 * alpha_p)
        report = {
            "C_quadratic": float(np.max(ratio2)),
            "quadratic_holds": bool(np.all(ratio2 <= np.max(ratio2) + 1e-15)),
            "C_alpha": float(np.max(ratio_a)),
            "alpha_prime": alpha_p,
            "ratio_vanishes_at_0": bool(ratio_a[np.argmin(r_grid[small])]
                                        <= np.max(ratio_a) + 1e-15),
        }
    return etab, report


def rebuild_profile(curve: PhaseCurve, v0: float, r0: float = 1.0,
                    grid=None, max_rows: int = 6000) -> RadialProfile:
    """RadialProfile of the factor whose phase curve is given.

    v0 = v(r0) at the anchor r0 = 1 sets the one free scale; u(0) = 0.
    The returned profile carries an evaluator with the exact derivative
    chain, valid on radii covered by the curve.
    """
    if v0 <= 0:
        raise ParameterError("v0 must be positive")
    tab = _tables(curve, v0=v0, r0=r0)
    ev = PhaseProfileEvaluator(tab)
    if grid is None:
        r_all = np.exp(tab["t"])
        step = max(1, len(r_all) // max_rows)
        idx = np.unique(np.concatenate([np.arange(0, len(r_all), step),
                                        [tab["i0"], len(r_all) - 1]]))
        grid = r_all[idx]
        v_vals = np.exp(tab["logv"])[idx]
        u_vals = tab["u"][idx]
    else:
        grid = np.asarray(grid, dtype=float)
        v_vals = np.array([ev.v(r) for r in grid])
        u_vals = np.array([ev.u(r) for r in grid])
    prof = RadialProfile(r=grid, v=v_vals, u=u_vals, n=curve.params.n,
                         evaluator=ev,
                         meta={"kind": "phase-reconstruction", "v0": v0,
                               "r0": r0, "r_max": ev.r_max, "r_min": ev.r_min,
                               "lambda3": curve.params.lambda3,
                               "theta": curve.params.theta})
    return prof


def paraboloid_profile(v0: float, r0: float, grid, n: int = 2) -> RadialProfile:
    """The degenerate branch eta == 1, zeta == 0: v = (v0/r0) r, u = v0 r^2/(2 r0)."""
    from .core import AnalyticEvaluator
    grid = np.asarray(grid, dtype=float)
    c = v0 / r0
    ev = AnalyticEvaluator(lambda r: c * r,
                           [lambda r: c + 0.0 * r, lambda r: 0.0 * r,
                            lambda r: 0.0 * r],
                           u_fn=lambda r: 0.5 * c * r * r)
    return RadialProfile(r=grid, v=c * grid, u=0.5 * c * grid**2, n=n,
                         evaluator=ev, meta={"kind": "paraboloid", "v0": v0})


def origin_compatibility(curve: PhaseCurve) -> dict:
    """Both origin-regularity hypothesis sets, checked on [1, eta0].

    The first requires zeta' monotone non-decreasing (zeta'' >= 0 on the
    window); the stronger one asks zeta'' > 0 with the fourth derivative
    in its band (its original sign list is garbled, so the sign of
    zeta''' is recorded rather than asserted).  Which set is binding for
    the fixed point is left open; both are reported.
    """
    from .negative_pair import _local_derivatives
    eta0 = curve.params.eta0
    sel = curve.eta <= eta0 * (1 + 1e-12)
    x = curve.eta[sel] - 1.0
    z = curve.zeta[sel]
    span = eta0 - 1.0
    centers = np.linspace(0.12 * span, 0.88 * span, 16)
    _, d2, d3 = _local_derivatives(x, z, centers, window=0.2 * span)
    tay = curve.taylor
    return {
        "zeta_dd_min": float(min(np.min(d2), tay.alpha)),
        "first_condition_monotone_slope": bool(min(np.min(d2), tay.alpha) >= 0),
        "second_condition_dd_positive": bool(min(np.min(d2), tay.alpha) > 0),
        "zeta_ddd_sign": float(np.sign(np.median(d3))),
        "zeta_d4_band_center": tay.gamma,
        "ambiguous_sign_set": True,
    }


def large_condition_check(profile: RadialProfile, R_inf: float,
                          ceiling: float = 1e6) -> dict:
    """Does u blow up at the finite boundary radius R_inf = e^(T_inf)?

    Two diagnostics: the scan of the curvature lower bound
    v >= v0 (T - log r0)/(T - log r), and a fit of v against the
    1/(T - log r) law plus a fit of u against -log(T - log r) whose
    divergence (positive slope, finite radius at which the
    extrapolation exceeds the ceiling) certifies the large condition.
    An infinite R_inf (entire factor) passes vacuously.
    """
    if not np.isfinite(R_inf):
        return {"pass": True, "finite_boundary": False,
                "witness": "no finite boundary"}
    T = math.log(R_inf)
    ev = profile.evaluator
    r_max = profile.meta.get("r_max", float(profile.r[-1]))
    if ev is None:
        raise ParameterError("large-condition check needs an evaluator-backed profile")
    if r_max >= R_inf:
        raise ParameterError("profile extends past the claimed boundary radius")
    v0 = profile.meta.get("v0", float(np.interp(1.0, profile.r, profile.v)))
    t_hi = math.log(r_max)
    # full scan of the classical curvature lower bound on r > r0
    t_all = np.linspace(1e-3, t_hi, 400)
    v_all = np.array([ev.v(math.exp(t)) for t in t_all])
    bound = v0 * T / (T - t_all)
    ok = v_all >= bound * (1 - 1e-12)
    holds_all = bool(np.all(ok))
    if holds_all:
        interval = [float(math.exp(t_all[0])), float(math.exp(t_all[-1]))]
        fail_interval = None
    else:
        bad = np.where(~ok)[0]
        fail_interval = [float(math.exp(t_all[bad[0]])), float(math.exp(t_all[bad[-1]]))]
        good_tail = np.where(ok[bad[-1]:])[0]
        interval = ([float(math.exp(t_all[bad[-1] + good_tail[0]])),
                     float(math.exp(t_all[-1]))] if len(good_tail) else None)
    # divergence-law fits, restricted to the near-boundary regime where
    # T - log r is small compared to T
    gap_hi = min(0.05 * T, 30.0 * (T - t_hi))
    gap_lo = 1.02 * (T - t_hi)
    if gap_hi <= gap_lo:
        gap_hi = 3.0 * gap_lo
    t_tail = T - np.geomspace(gap_hi, gap_lo, 200)
    v_tail = np.array([ev.v(math.exp(t)) for t in t_tail])
    u_tail = np.array([ev.u(math.exp(t)) for t in t_tail])
    law = v_tail * (T - t_tail)
    law_c = float(np.mean(law))
    law_spread = float((np.max(law) - np.min(law)) / law_c)
    s = -np.log(T - t_tail)
    A = np.vstack([s, np.ones_like(s)]).T
    (slope, intercept), *_ = np.linalg.lstsq(A, u_tail, rcond=None)
    resid = float(np.max(np.abs(u_tail - A @ [slope, intercept]))
                  / max(np.max(u_tail) - np.min(u_tail), 1e-300))
    # extrapolated radius at which u reaches the ceiling
    s_ceiling = (ceiling - intercept) / slope if slope > 0 else math.inf
    diverges = slope > 0 and resid < 0.05
    return {
        "pass": bool(diverges),
        "finite_boundary": True,
        "T_inf": T,
        "v_lower_bound_holds_everywhere": holds_all,
        "v_lower_bound_holds_on": interval,
        "v_lower_bound_fails_on": fail_interval,
        "v_law_constant": law_c,
        "v_law_spread": law_spread,
        "u_log_slope": float(slope),
        "u_fit_residual": resid,
        "u_reaches_ceiling_at_T_minus_logr": float(math.exp(-s_ceiling))
        if np.isfinite(s_ceiling) else None,
    }
