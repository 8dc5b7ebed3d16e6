"""Closed-form 1-D factor from the curvature quadrature.

With v = u'' > 0, the 1-D eigen-equation integrates once to

    (v')^2 = a (v^3 - v0^(1-2*theta) v^(2(theta+1))),   a = 2*lambda/(2*theta - 1),

for theta > 1/2, with v decreasing from v(0) = v0 to 0 as r -> infinity.
Inverting the resulting quadrature gives v(r) with all derivatives in
closed form, and u by double integration is smooth, strictly convex and
tends to +infinity (linear growth with unbounded u), so the factor is
entire and complete.

Note the convention clash: in this module v denotes u'' (the quadrature
variable), while RadialProfile.v stores u'.  Internally u'' is always
called vpp; profiles returned from here respect the RadialProfile
contract.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy.integrate import cumulative_simpson, quad, solve_ivp
from scipy.interpolate import make_interp_spline

from .core import AnalyticEvaluator, ProfileEvaluator, RadialProfile
from .errors import ConvergenceError, DomainError, ParameterError, StepFailure

__all__ = [
    "PositivePairConfig", "quadrature_r_of_v", "v_of_r", "integrate_direct",
    "build_phi", "lower_bound_v", "negative_pair_blowup_1d",
]


@dataclass
class PositivePairConfig:
    """Initial curvature v0, eigenvalue lam > 0 and exponent theta > 1/2."""

    v0: float
    lam: float
    theta: float

    def __post_init__(self):
        if not self.v0 > 0:
            raise ParameterError(f"v0 must be positive, got {self.v0}")
        if not self.lam > 0:
            raise ParameterError(f"lambda must be positive, got {self.lam}")
        if not self.theta > 0.5:
            raise ParameterError(f"theta must exceed 1/2, got {self.theta}")

    @property
    def a(self) -> float:
        return 2.0 * self.lam / (2.0 * self.theta - 1.0)

    def radicand(self, v):
        """v^3 - v0^(1-2 theta) v^(2 theta + 2), stable near v = v0."""
        v = np.asarray(v, dtype=float)
        return v**3 * (-np.expm1((2 * self.theta - 1.0) * np.log(v / self.v0)))

    # closed-form derivative chain for v = v(r) (the curvature u'')
    def vpp_prime(self, v):
        return -np.sqrt(np.maximum(self.a * self.radicand(v), 0.0))

    def vpp_second(self, v):
        th, v0, a = self.theta, self.v0, self.a
        return 1.5 * a * v * v - (th + 1) * a * v0 ** (1 - 2 * th) * v ** (2 * th + 1)

    def vpp_third(self, v):
        th, v0, a = self.theta, self.v0, self.a
        return a * (3 * v - (th + 1) * (2 * th + 1) * v0 ** (1 - 2 * th) * v ** (2 * th)) \
            * self.vpp_prime(v)


def _integrand_factory(config: PositivePairConfig):
    """Integrand of r(v) after the substitution s = v0 (1 - t^2).

    The 1/sqrt endpoint singularity at s = v0 cancels against the
    Jacobian; h(t) -> (2 theta - 1) as t -> 0.
    """
    th, v0 = config.theta, config.v0

    def integrand(t):
        z = 1.0 - t * t
        if t == 0.0:
            h = 2 * th - 1.0
        else:
            h = -math.expm1((2 * th - 1.0) * math.log1p(-t * t)) / (t * t)
        return 2.0 / (math.sqrt(v0) * z ** 1.5 * math.sqrt(h))

    return integrand


def quadrature_r_of_v(v: float, config: PositivePairConfig,
                      epsabs: float = 1e-12) -> float:
    """Radius at which the curvature has decayed to v (0 < v < v0).

    Adaptive quadrature on two desingularised pieces: s = v0 (1 - t^2)
    near the upper endpoint, and w = 1/sqrt(s) for the far tail (where
    the integrand tends to the constant 2).
    """
    if not 0.0 < v < config.v0:
        raise DomainError(f"v must lie in (0, v0) = (0, {config.v0}), got {v}")
    v0, th = config.v0, config.theta
    v_cut = max(v, v0 / 2.0)
    t_up = math.sqrt(1.0 - v_cut / v0)
    val, _ = quad(_integrand_factory(config), 0.0, t_up,
                  epsabs=epsabs, epsrel=1e-12, limit=200)
    if v < v0 / 2.0:
        def tail_integrand(w):
            return 2.0 / math.sqrt(-math.expm1((2 * th - 1.0)
                                               * 2.0 * math.log(1.0 / (w * math.sqrt(v0)))))
        lo, hi = math.sqrt(2.0 / v0), 1.0 / math.sqrt(v)
        part, _ = quad(tail_integrand, lo, hi, epsabs=epsabs, epsrel=1e-12,
                       limit=200)
        val += part
    return val / math.sqrt(config.a)


def v_of_r(r: float, config: PositivePairConfig, tol: float = 1e-10,
           max_iter: int = 200) -> float:
    """Invert the quadrature by bisection on the monotone map v -> r(v)."""
    if r < 0:
        raise DomainError(f"r must be nonnegative, got {r}")
    if r == 0.0:
        return config.v0
    eps = 1e-14 * config.v0
    lo, hi = eps, config.v0 - eps
    if quadrature_r_of_v(hi, config) > r:
        return config.v0 - eps  # r below resolvable scale; v ~ v0
    for _ in range(max_iter):
        mid = 0.5 * (lo + hi)
        rm = quadrature_r_of_v(mid, config)
        if abs(rm - r) < tol:
            return mid
        if rm > r:      # r(v) decreasing: too-far radius means v too small
            lo = mid
        else:
            hi = mid
        if hi - lo < 1e-16 * config.v0:
            return 0.5 * (lo + hi)
    raise ConvergenceError(f"bisection for v(r={r}) did not reach tol={tol}")


def integrate_direct(config: PositivePairConfig, r_max: float,
                     n_nodes: int = 2001) -> RadialProfile:
    """Independent oracle: integrate v' = -sqrt(a * radicand(v)) directly.

    The start is degenerate (v'(0) = 0); the first step uses the Taylor
    expansion of v about 0 through fourth order.  Returns a profile
    with v-column u' and u-column from cumulative integration of the
    computed curvature.
    """
    if not r_max > 0:
        raise ParameterError("r_max must be positive")
    v0, a, th = config.v0, config.a, config.theta
    scale = 1.0 / math.sqrt(a * v0)
    h0 = 1e-4 * min(scale, r_max)
    v2 = a * v0 * v0 * (0.5 - th)                       # v''(0)
    v4 = a * v0 * (3 - (th + 1) * (2 * th + 1)) * v2    # v''''(0)
    v_start = v0 + 0.5 * v2 * h0 * h0 + v4 * h0**4 / 24.0

    def rhs(r, y):
        return [-math.sqrt(max(a * float(config.radicand(min(y[0], v0 * (1 - 1e-16)))), 0.0))]

    sol = solve_ivp(rhs, (h0, r_max), [v_start], method="DOP853",
                    rtol=1e-12, atol=1e-14, dense_output=True)
    if not sol.success:
        raise StepFailure(f"curvature integration failed: {sol.message}")
    r = np.linspace(0.0, r_max, n_nodes)
    vpp = np.empty_like(r)
    small = r <= h0
    vpp[small] = v0 + 0.5 * v2 * r[small] ** 2 + v4 * r[small] ** 4 / 24.0
    vpp[~small] = sol.sol(r[~small])[0]
    v_up = cumulative_simpson(vpp, x=r, initial=0.0)    # u'
    u = cumulative_simpson(v_up, x=r, initial=0.0)
    prof = RadialProfile(r=r, v=v_up, u=u, n=1)
    prof.meta["vpp"] = vpp
    prof.meta["config"] = config
    return prof


class PositivePairEvaluator(ProfileEvaluator):
    """Spline-backed evaluator with the closed-form curvature chain.

    v(r) = u' comes from an antiderivative table of the curvature;
    derivatives of order 1..3 (u'', u''', u'''') use the exact algebraic
    chain evaluated at the splined curvature value.
    """

    def __init__(self, config: PositivePairConfig, r: np.ndarray, vpp: np.ndarray,
                 v_up: np.ndarray, u: np.ndarray):
        self.config = config
        self.r_max = float(r[-1])
        s = np.log1p(r)
        self._logvpp = make_interp_spline(s, np.log(vpp), k=5)
        self._vup = make_interp_spline(s, v_up, k=5)
        self._u = make_interp_spline(s, u, k=5)

    def _s(self, r):
        # clamp to the table; the factor is even in r
        return np.log1p(np.minimum(np.abs(r), self.r_max))

    def _vpp(self, r):
        return np.exp(self._logvpp(self._s(r)))

    def v(self, r):
        return np.sign(r) * self._vup(self._s(r))

    def u(self, r):
        return self._u(self._s(r))

    def deriv(self, r, k):
        vpp = self._vpp(r)
        if k == 1:
            return vpp
        if k == 2:
            return self.config.vpp_prime(vpp) * np.sign(r)
        if k == 3:
            return self.config.vpp_second(vpp)
        return None

    def max_order(self):
        return 3


def _curvature_table(config: PositivePairConfig, r_max: float):
    """Dense (r, v) table of the curvature by cumulative integration of dr/dv.

    Two pieces: the endpoint-substituted variable t (s = v0 (1 - t^2))
    down to v0/2, then log v down to the value reached at r_max.  Both
    integrands are smooth, so cumulative Simpson reaches ~1e-12 without
    any adaptive quadrature calls.
    """
    v0, a = config.v0, config.a
    integrand = _integrand_factory(config)
    # piece A: v from v0 down to v0/2
    tA = np.concatenate([[0.0], np.geomspace(1e-8, math.sqrt(0.5), 8000)])
    fA = np.array([integrand(t) for t in tA]) / math.sqrt(a)
    rA = cumulative_simpson(fA, x=tA, initial=0.0)
    vA = v0 * (1.0 - tA * tA)
    # piece B: descend in y = -log v from v0/2 down to v_min(r_max)
    v_min = min(v0 / 4.0, 1.0 / (a * (2.0 / math.sqrt(v0 * a) + r_max) ** 2))
    y = np.linspace(-math.log(v0 / 2.0), -math.log(v_min), 8000)
    vB = np.exp(-y)
    fB = vB / np.sqrt(a * config.radicand(vB))        # dr/dy > 0
    rB = rA[-1] + cumulative_simpson(fB, x=y, initial=0.0)
    r = np.concatenate([rA, rB[1:]])
    v = np.concatenate([vA, vB[1:]])
    return r, v


def build_phi(config: PositivePairConfig, grid) -> RadialProfile:
    """Profile of the entire 1-D factor on the given radii (grid[0] = 0).

    The curvature table comes from cumulative integration of the
    quadrature (cross-checked against quadrature_r_of_v / v_of_r in the
    test suite); u' and u follow by cumulative integration, so
    u(0) = u'(0) = 0 and u is even.
    """
    grid = np.asarray(grid, dtype=float)
    if grid[0] != 0.0:
        raise ParameterError("grid must start at r = 0")
    r_max = float(grid[-1])
    r_q, v_q = _curvature_table(config, r_max)
    if r_q[-1] < r_max:
        raise ParameterError("curvature table fell short of r_max")
    # spline the quadrature table directly: any intermediate resampling
    # would plant C^1 kinks that downstream Hessian differencing amplifies
    keep = np.concatenate([[True], np.diff(r_q) > 1e-11])
    r_tab, vpp = r_q[keep], v_q[keep]
    v_up = cumulative_simpson(vpp, x=r_tab, initial=0.0)
    u = cumulative_simpson(v_up, x=r_tab, initial=0.0)
    ev = PositivePairEvaluator(config, r_tab, vpp, v_up, u)
    prof = RadialProfile(
        r=grid,
        v=np.asarray(ev.v(grid), dtype=float),
        u=np.asarray(ev.u(grid), dtype=float),
        n=1, evaluator=ev,
        meta={"config": config, "kind": "positive-pair"},
    )
    return prof


def lower_bound_v(r, config: PositivePairConfig):
    """Curvature lower bound 4 / (2/sqrt(v0) + sqrt(a) r)^2."""
    r = np.asarray(r, dtype=float)
    return 4.0 / (2.0 / math.sqrt(config.v0) + math.sqrt(config.a) * r) ** 2


def negative_pair_blowup_1d(v0: float, theta: float, lam: float,
                            vmax_factor: float = 1e8, n_nodes: int = 60000,
                            return_profile: bool = False) -> dict:
    """The 1-D factor with the opposite eigenvalue sign: curvature blows up
    at a finite radius R, but u stays bounded there (no large condition).

    Returns {"R", "u_at_R", "tail_r", "tail_u"}; the tails are analytic
    bounds for the truncated v-integrals beyond vmax_factor * v0.  With
    return_profile, a RadialProfile of (r, u', u) on [0, r_trunc] is
    attached under "profile".
    """
    if not theta > 0.5:
        raise ParameterError("construction needs theta > 1/2")
    a = 2.0 * lam / (2.0 * theta - 1.0)
    t_max = math.sqrt(vmax_factor - 1.0)
    t = np.concatenate([[0.0], np.geomspace(1e-8, t_max, n_nodes - 1)])
    vv = v0 * (1.0 + t * t)
    with np.errstate(divide="ignore"):
        h = np.where(t > 0,
                     np.expm1((2 * theta - 1.0) * np.log1p(t * t)) / np.maximum(t * t, 1e-300),
                     2 * theta - 1.0)
    # dr/dt = 2 v0 t / sqrt(a * v0^3 (1+t^2)^3 * h * t^2)
    drdt = 2.0 / (math.sqrt(a * v0) * (1.0 + t * t) ** 1.5 * np.sqrt(h))
    r = cumulative_simpson(drdt, x=t, initial=0.0)
    c = v0 ** (theta - 0.5) / math.sqrt(a)
    vmax = v0 * vmax_factor
    tail_r = c * vmax ** (-theta) / theta
    R = float(r[-1]) + tail_r
    # u(R) = int (R - r(v)) v dr
    integ = (R - r) * vv * drdt
    u_main = float(np.trapezoid(integ, t))
    tail_u = (c * c / (theta * (2 * theta - 1.0))) * vmax ** (1.0 - 2 * theta)
    out = {"R": R, "u_at_R": u_main + tail_u, "tail_r": tail_r, "tail_u": tail_u}
    if return_profile:
        u_prime = cumulative_simpson(vv * drdt, x=t, initial=0.0)
        u = cumulative_simpson(u_prime * drdt, x=t, initial=0.0)
        keep = np.concatenate([[True], np.diff(r) > 1e-13])
        rr, up, uu = r[keep], u_prime[keep], u[keep]
        s = np.log1p(rr)
        v_sp = make_interp_spline(s, up, k=3)
        u_sp = make_interp_spline(s, uu, k=3)
        ev = AnalyticEvaluator(lambda x: float(v_sp(np.log1p(abs(x)))),
                               u_fn=lambda x: float(u_sp(np.log1p(abs(x)))))
        out["profile"] = RadialProfile(
            r=rr[:: max(1, len(rr) // 2000)], v=up[:: max(1, len(rr) // 2000)],
            u=uu[:: max(1, len(rr) // 2000)], n=1, evaluator=ev,
            meta={"v0": up[np.searchsorted(rr, 1.0)] if rr[-1] > 1 else v0,
                  "r_max": float(rr[-1]), "kind": "negative-pair-1d"})
    return out
