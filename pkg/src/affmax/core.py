"""Domain types and the radial/phase transformation chain.

The central objects are radial profiles (r, v = u', u) of rotationally
symmetric convex functions and phase curves (eta, zeta(eta), I(eta)).
The fourth-order radial operator

    L[u] = -u'''' + (th+1) (u''')^2/u''
           + 2(n-1) u''' [ (th-1) u''/u' - th/r ]
           + (n-1) u'' (u''/u' - 1/r) [ ((n-1)th-(n-2)) u''/u' - ((n-1)th-1)/r ]

equals lambda' (u'')^2 exactly when u solves the radial eigenvalue
problem; lambda' = 0 recovers the source equation.  The eigenvalue of
the second-order formulation u^{ij} D_ij w = lambda w is lambda =
theta * lambda' (derived from the radial reduction identity
L[u] = (u'')^2 * (u^{ij} D_ij w)/(theta w)).
"""

from __future__ import annotations

import io
import math
from dataclasses import dataclass, field

import numpy as np

from . import fd
from .errors import (DegenerateProfile, GridTooCoarse, InconsistentProfile,
                     NonConvexProfile, ParameterError)

__all__ = [
    "ModelParams", "TaylorData", "PhaseCurve", "RadialProfile",
    "SeparableSolution", "BoundCheck", "VerificationReport",
    "radial_lhs", "radial_residual", "profile_to_phase",
    "effective_lambda_fit", "eigenvalue_from_lambda_prime",
]


# ---------------------------------------------------------------------------
# parameters and Taylor data


@dataclass
class ModelParams:
    """Problem parameters for one radial factor / phase curve.

    lambda3 is the coefficient of the exponential forcing term in the
    phase-plane equation; it is negative for the bounded-domain factor
    and positive for the entire one.  eta0 anchors the exponential
    integral I(eta) = int_{eta0}^eta (s+1)/zeta ds.
    """

    n: int
    theta: float
    lambda3: float = 0.0
    eta0: float = 1.05

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 1:
            raise ParameterError(f"n must be an integer >= 1, got {self.n}")
        self.n = int(self.n)
        if not self.theta > 0:
            raise ParameterError(f"theta must be positive, got {self.theta}")
        if not self.eta0 > 1:
            raise ParameterError(f"eta0 must exceed 1, got {self.eta0}")

    def require_negative_pair(self, want_upper_bound: bool = False):
        """Extra hypotheses for the bounded-factor construction."""
        if not 2 <= self.n <= 5:
            raise ParameterError(f"negative-pair solve needs 2 <= n <= 5, got {self.n}")
        if not self.theta > (self.n - 7) / self.n**2:
            raise ParameterError(
                f"global extension needs theta > (n-7)/n^2 = {(self.n - 7) / self.n ** 2}")
        if want_upper_bound and not (1 / self.n <= self.theta < self.n / (self.n + 1)):
            raise ParameterError(
                f"quadratic upper bound needs theta in [1/n, n/(n+1)) = "
                f"[{1 / self.n}, {self.n / (self.n + 1)}), got {self.theta}")


@dataclass
class TaylorData:
    """Behaviour of zeta at the singular endpoint eta = 1.

    d1 = zeta'(1) (= 2 for admissible curves), alpha = zeta''(1),
    beta = zeta'''(1), gamma = centre of the fourth-derivative band.
    """

    d1: float
    alpha: float
    beta: float
    gamma: float

    def seed(self, x: np.ndarray) -> np.ndarray:
        """Cubic model d1*x + alpha/2 x^2 + beta/6 x^3 (x = eta - 1)."""
        return x * (self.d1 + x * (self.alpha / 2 + x * self.beta / 6))

    def quartic(self, x: np.ndarray) -> np.ndarray:
        return x * (self.d1 + x * (self.alpha / 2 + x * (self.beta / 6 + x * self.gamma / 24)))


# ---------------------------------------------------------------------------
# phase curves


def fit_taylor(x, y, n_terms: int, window: float, y0: float = 0.0):
    """Constrained least-squares fit y - y0 = sum c_k x^k / k! on (0, window]."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    sel = (x > 0) & (x <= window)
    xs = x[sel]
    if len(xs) < n_terms + 2:
        raise GridTooCoarse("too few samples inside the Taylor-fit window")
    cols = np.vstack([xs ** (k + 1) / math.factorial(k + 1)
                      for k in range(n_terms)]).T
    norm = np.linalg.norm(cols, axis=0)
    c, *_ = np.linalg.lstsq(cols / norm, y[sel] - y0, rcond=None)
    return c / norm


def measure_taylor(eta, zeta, eta0: float) -> "TaylorData":
    """Estimate (d1, alpha, beta, gamma) of a sampled curve at eta -> 1+."""
    x = np.asarray(eta, dtype=float) - 1.0
    w = min(1e-2, (eta0 - 1.0) / 2.0)
    c = fit_taylor(x, np.asarray(zeta, dtype=float), 5, w)
    return TaylorData(d1=float(c[0]), alpha=float(c[1]), beta=float(c[2]),
                      gamma=float(c[3]))


@dataclass
class PhaseCurve:
    """Sampled (eta, zeta, I) with eta > 1 strictly increasing.

    I(eta) = int_{eta0}^{eta} (s+1)/zeta(s) ds, so I vanishes at eta0,
    is negative below it and positive above.  The Taylor data describes
    the eta -> 1+ limit, where zeta -> 0 linearly with slope d1.
    """

    params: ModelParams
    taylor: TaylorData
    eta: np.ndarray
    zeta: np.ndarray
    I: np.ndarray

    def __post_init__(self):
        self.eta = np.asarray(self.eta, dtype=float)
        self.zeta = np.asarray(self.zeta, dtype=float)
        self.I = np.asarray(self.I, dtype=float)
        if not np.all(np.diff(self.eta) > 0):
            raise ParameterError("eta samples must be strictly increasing")
        if self.eta[0] <= 1.0:
            raise ParameterError("curve samples start strictly above eta = 1")
        if not np.all(self.zeta > 0):
            raise ParameterError("zeta must be positive on the sampled range")

    @property
    def eta_max(self) -> float:
        return float(self.eta[-1])

    def limit_check(self, tol: float = 1e-2) -> bool:
        """zeta -> 0 and zeta/(eta-1) -> d1 as eta -> 1+ (on the first samples)."""
        k = min(8, len(self.eta))
        ratio = self.zeta[:k] / (self.eta[:k] - 1.0)
        return bool(self.zeta[0] < tol and np.all(np.abs(ratio - self.taylor.d1)
                                                  < tol * max(1.0, self.taylor.d1)))

    def zeta_at(self, e):
        """Interpolated zeta, using the Taylor model below the first sample."""
        e = np.asarray(e, dtype=float)
        out = np.interp(e, self.eta, self.zeta)
        small = e < self.eta[0]
        if np.any(small):
            out = np.where(small, self.taylor.quartic(e - 1.0), out)
        return out if out.shape else float(out)

    def to_csv(self, path):
        write_columns(path, ["eta", "zeta", "I"], [self.eta, self.zeta, self.I])

    @classmethod
    def from_csv(cls, path, n: int = 2, theta: float = 0.55,
                 params: ModelParams | None = None,
                 taylor: TaylorData | None = None) -> "PhaseCurve":
        names, cols = read_columns(path)
        if names != ["eta", "zeta", "I"]:
            raise ParameterError(f"expected header eta,zeta,I, got {names}")
        eta, zeta, I = cols
        eta0 = float(np.interp(0.0, I, eta))
        if taylor is None:
            taylor = measure_taylor(eta, zeta, eta0)
        if params is None:
            params = ModelParams(n=n, theta=theta, eta0=eta0)
        return cls(params=params, taylor=taylor, eta=eta, zeta=zeta, I=I)


# ---------------------------------------------------------------------------
# radial profiles


class ProfileEvaluator:
    """Point evaluation of v = u' and its derivatives for a profile.

    Subclasses implement v(r); deriv(r, k) returns d^k v / dr^k or None
    when no accurate rule is available (the caller then falls back to
    finite differences on v).
    """

    def v(self, r):
        raise NotImplementedError

    def u(self, r):
        return None

    def deriv(self, r, k: int):
        return None

    def max_order(self) -> int:
        return 0


class AnalyticEvaluator(ProfileEvaluator):
    """Closed-form profile: v_fn plus optional derivative callables."""

    def __init__(self, v_fn, derivs=(), u_fn=None):
        self._v = v_fn
        self._derivs = list(derivs)
        self._u = u_fn

    def v(self, r):
        return self._v(r)

    def u(self, r):
        return self._u(r) if self._u is not None else None

    def deriv(self, r, k):
        if 1 <= k <= len(self._derivs):
            return self._derivs[k - 1](r)
        return None

    def max_order(self):
        return len(self._derivs)


@dataclass
class RadialProfile:
    """One radial factor: grid r >= 0 with v = u'(r) and u(r).

    Normalisation u(0) = 0.  An attached evaluator, when present, gives
    high-accuracy point values between (and beyond) the stored nodes;
    CSV round-trips keep only the three columns.
    """

    r: np.ndarray
    v: np.ndarray
    u: np.ndarray
    n: int
    evaluator: ProfileEvaluator | None = None
    meta: dict = field(default_factory=dict)

    def __post_init__(self):
        self.r = np.asarray(self.r, dtype=float)
        self.v = np.asarray(self.v, dtype=float)
        self.u = np.asarray(self.u, dtype=float)
        if not np.all(np.diff(self.r) > 0):
            raise ParameterError("r grid must be strictly increasing")
        if self.r[0] < 0:
            raise ParameterError("radii must be nonnegative")

    # -- point evaluation -------------------------------------------------
    def v_at(self, r):
        if self.evaluator is not None:
            return self.evaluator.v(r)
        return np.interp(r, self.r, self.v)

    def v_deriv_at(self, r, k: int, h_rel: float | None = None):
        """d^k v/dr^k at scalar r; analytic chain if available, else FD."""
        if self.evaluator is not None and self.evaluator.max_order() >= k:
            return self.evaluator.deriv(r, k)
        if self.evaluator is not None:
            h = (h_rel or fd.DEFAULT_H_REL[k]) * max(abs(r), 1e-2)
            return fd.derivative_from_callable(self.evaluator.v, r, k, h=h)
        i = int(np.searchsorted(self.r, r))
        i = min(max(i, 0), len(self.r) - 1)
        return fd.grid_derivative(self.r, self.v, k)[i]

    def derivative_samples(self, orders=(1, 2, 3, 4)) -> dict:
        """Estimates of v', v'', v''', v'''' at every node (and one-sided at 0)."""
        out = {}
        for k in orders:
            if self.evaluator is not None:
                out[k] = np.array([self.v_deriv_at(ri, k) for ri in self.r])
            else:
                out[k] = fd.grid_derivative(self.r, self.v, k)
        return out

    def origin_derivative(self, k: int, h: float = 1e-3) -> float:
        """One-sided estimate of d^k v/dr^k at r = 0 (never uses r < 0)."""
        return fd.one_sided_derivative(self.v_at, 0.0, k, h, points=k + 5)

    def scaled(self, kappa: float) -> "RadialProfile":
        """The profile of kappa * u (v and u scale linearly)."""
        ev = None
        if self.evaluator is not None:
            base = self.evaluator
            mo = base.max_order()
            ev = AnalyticEvaluator(
                lambda r, b=base, k=kappa: k * b.v(r),
                [(lambda r, b=base, k=kappa, j=j: k * b.deriv(r, j)) for j in range(1, mo + 1)],
                u_fn=(lambda r, b=base, k=kappa: None if b.u(r) is None else k * b.u(r)),
            )
        return RadialProfile(r=self.r.copy(), v=kappa * self.v, u=kappa * self.u,
                             n=self.n, evaluator=ev, meta=dict(self.meta))

    def to_csv(self, path):
        write_columns(path, ["r", "v", "u"], [self.r, self.v, self.u])

    @classmethod
    def from_csv(cls, path, n: int) -> "RadialProfile":
        names, cols = read_columns(path)
        if names != ["r", "v", "u"]:
            raise ParameterError(f"expected header r,v,u, got {names}")
        return cls(r=cols[0], v=cols[1], u=cols[2], n=n)


# ---------------------------------------------------------------------------
# assembled solutions and reports


@dataclass
class SeparableSolution:
    """u(x, y, z) = phi(|x|) + psi(|y|) + |z|^2/2 on R x B_{R_inf} x R^m."""

    phi: RadialProfile           # 1-D factor, already rescaled by kappa
    psi: RadialProfile           # n-D factor on the ball of radius R_inf
    kappa: float
    theta: float
    R_inf: float | None = None
    m_cylinder: int = 0
    lambda_phi: float = 0.0      # eigenvalues of the scaled factors
    lambda_psi: float = 0.0

    @property
    def N(self) -> int:
        return 1 + self.psi.n + self.m_cylinder


@dataclass
class BoundCheck:
    bound_id: str
    holds: bool
    witness: dict

    def as_dict(self):
        return {"bound_id": self.bound_id, "holds": self.holds, "witness": self.witness}


@dataclass
class VerificationReport:
    residual_max: float
    residual_mean: float
    convexity_margin: float
    bounds: list
    blowup: dict
    effective_lambda: dict

    def __post_init__(self):
        if self.residual_max < 0 or self.residual_mean < 0:
            raise ParameterError("residual statistics must be nonnegative")

    def as_dict(self):
        return {
            "residual_max": self.residual_max,
            "residual_mean": self.residual_mean,
            "convexity_margin": self.convexity_margin,
            "bounds": [b.as_dict() if isinstance(b, BoundCheck) else b for b in self.bounds],
            "blowup": self.blowup,
            "effective_lambda": self.effective_lambda,
        }


# ---------------------------------------------------------------------------
# the radial operator


def radial_lhs(r, u1, u2, u3, u4, theta: float, n: int):
    """The fourth-order radial operator applied to u, from its derivatives."""
    r = np.asarray(r, dtype=float)
    t1 = -u4 + (theta + 1.0) * u3 * u3 / u2
    t2 = 2.0 * (n - 1) * u3 * ((theta - 1.0) * u2 / u1 - theta / r)
    q = u2 / u1 - 1.0 / r
    t3 = (n - 1) * u2 * q * (((n - 1) * theta - (n - 2)) * u2 / u1
                             - ((n - 1) * theta - 1.0) / r)
    return t1 + t2 + t3


def _profile_derivatives(profile: RadialProfile, nodes, need=(0, 1, 2, 3)):
    """(u', u'', u''', u'''') = (v, v', v'', v''') at the given radii."""
    nodes = np.asarray(nodes, dtype=float)
    ev = profile.evaluator
    if ev is not None and ev.max_order() >= 3:
        vals = [np.array([ev.v(x) for x in nodes])]
        for k in (1, 2, 3):
            vals.append(np.array([ev.deriv(x, k) for x in nodes]))
        return vals
    if ev is not None:
        vals = [np.array([ev.v(x) for x in nodes])]
        for k in (1, 2, 3):
            vals.append(np.array([fd.derivative_from_callable(
                ev.v, x, k, h=fd.DEFAULT_H_REL[k] * max(abs(x), 1e-2)) for x in nodes]))
        return vals
    # stored-grid fallback
    interior = np.sum(profile.r > 0)
    if interior < 5 or len(profile.r) < 6:
        raise GridTooCoarse("need at least 5 positive-radius nodes for stencil estimates")
    idx = np.searchsorted(profile.r, nodes)
    idx = np.clip(idx, 0, len(profile.r) - 1)
    out = [profile.v[idx]]
    for k in (1, 2, 3):
        out.append(fd.grid_derivative(profile.r, profile.v, k)[idx])
    return out


def radial_residual(profile: RadialProfile, theta: float, n: int,
                    lambda_prime: float, nodes=None):
    """L[u] - lambda' (u'')^2 at the requested nodes (default: grid nodes r > 0).

    Zero (within the derivative-estimation error) exactly when the
    profile solves the radial eigenvalue ODE with that lambda'.
    """
    if nodes is None:
        nodes = profile.r[profile.r > 0]
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    u1, u2, u3, u4 = _profile_derivatives(profile, nodes)
    if np.any(u2 <= 0):
        bad = nodes[np.asarray(u2) <= 0]
        raise NonConvexProfile(f"u'' <= 0 at r = {bad[:3]}")
    return radial_lhs(nodes, u1, u2, u3, u4, theta, n) - lambda_prime * u2 * u2


def effective_lambda_fit(profile: RadialProfile, theta: float, n: int,
                         nodes=None, spread_tol: float = 1e-3):
    """Least-squares lambda' with L[u] = lambda' (u'')^2 across nodes.

    Returns (lambda_prime, fit_residual).  fit_residual is the relative
    spread of the per-node ratios; above spread_tol the profile is not
    an eigenprofile and InconsistentProfile is raised.
    """
    if nodes is None:
        nodes = profile.r[profile.r > 0]
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    u1, u2, u3, u4 = _profile_derivatives(profile, nodes)
    if np.any(u2 <= 0):
        raise NonConvexProfile("u'' <= 0 inside the fitted range")
    lhs = radial_lhs(nodes, u1, u2, u3, u4, theta, n)
    w = u2 * u2
    lam = float(np.sum(lhs * w) / np.sum(w * w))
    ratios = lhs / w
    scale = max(abs(lam), np.max(np.abs(ratios)), 1e-12)
    spread = float((np.max(ratios) - np.min(ratios)) / scale)
    if spread > spread_tol:
        raise InconsistentProfile(
            f"lambda' ratios spread {spread:.3e} exceeds {spread_tol:.1e}")
    return lam, spread


def eigenvalue_from_lambda_prime(lambda_prime: float, theta: float) -> float:
    """Eigenvalue of u^{ij} D_ij w = lambda w from the radial coefficient."""
    return theta * lambda_prime


def profile_to_phase(profile: RadialProfile, r_floor: float = 1e-3,
                     nodes=None):
    """Sampled (eta, zeta) of the profile: eta = r v'/v, zeta = r deta/dr.

    Radii below r_floor are excluded (the ratio is 0/0 at the origin).
    Returns (eta, zeta) ordered by increasing r; callers may
    reparametrise by eta when it is strictly monotone.
    """
    if nodes is None:
        nodes = profile.r[profile.r >= r_floor]
    nodes = np.atleast_1d(np.asarray(nodes, dtype=float))
    if len(nodes) == 0:
        raise GridTooCoarse("no nodes above the r floor")
    v = np.array([profile.v_at(x) for x in nodes], dtype=float)
    if np.any(v == 0):
        raise DegenerateProfile("v vanishes at an interior node")
    ev = profile.evaluator
    if ev is not None:
        r_hi = float(profile.r[-1])
        # local variation scale of v, from the stored columns; stencils
        # shrink with it and with the distance to the domain edge
        # (self-limiting under nesting: reach <= 0.4 * gap)
        dv = np.gradient(profile.v, profile.r)
        with np.errstate(divide="ignore", invalid="ignore"):
            ell = np.where(dv != 0, np.abs(profile.v / dv), np.inf)
        ell[:2] = np.inf

        def hcap(x, base):
            h = base * max(abs(x), 1e-2)
            h = min(h, 0.04 * float(np.interp(x, profile.r, ell)))
            gap = r_hi - x
            return min(h, 0.1 * gap) if gap > 0 else h

        use_chain = ev.max_order() >= 1

        def vprime(x):
            if use_chain:
                return ev.deriv(x, 1)
            # tighter than the standalone default: the outer derivative
            # amplifies any truncation error left in v'
            return fd.derivative_from_callable(ev.v, x, 1, h=hcap(x, 2e-3))

        def eta_fn(x):
            return x * vprime(x) / ev.v(x)

        eta = np.array([eta_fn(x) for x in nodes])
        zeta = np.array([x * fd.derivative_from_callable(eta_fn, x, 1,
                                                         h=hcap(x, 5e-4))
                         for x in nodes])
    else:
        sel = profile.r >= r_floor
        rr, vv = profile.r[sel], profile.v[sel]
        if np.any(vv == 0):
            raise DegenerateProfile("v vanishes at an interior node")
        v1 = fd.grid_derivative(rr, vv, 1)
        eta_all = rr * v1 / vv
        zeta_all = rr * fd.grid_derivative(rr, eta_all, 1)
        idx = np.searchsorted(rr, nodes)
        idx = np.clip(idx, 0, len(rr) - 1)
        eta, zeta = eta_all[idx], zeta_all[idx]
    return eta, zeta


# ---------------------------------------------------------------------------
# deterministic column IO (CSV with full double precision)


def write_columns(path, names, cols):
    cols = [np.asarray(c, dtype=float) for c in cols]
    buf = io.StringIO()
    buf.write(",".join(names) + "\n")
    for row in zip(*cols):
        buf.write(",".join(repr(float(x)) for x in row) + "\n")
    if hasattr(path, "write"):
        path.write(buf.getvalue())
    else:
        with open(path, "w") as fh:
            fh.write(buf.getvalue())


def read_columns(path):
    if hasattr(path, "read"):
        text = path.read()
    else:
        with open(path) as fh:
            text = fh.read()
    lines = [ln for ln in text.strip().splitlines() if ln.strip()]
    names = [s.strip() for s in lines[0].split(",")]
    data = np.array([[float(x) for x in ln.split(",")] for ln in lines[1:]])
    return names, [data[:, j] for j in range(data.shape[1])]
