"""Shared fixtures: the flagship (n, theta) = (2, 0.55) construction."""

import numpy as np
import pytest

from affmax import (PositivePairConfig, assemble, blowup_time, build_phi,
                    extend_global, fixed_point_solve, rebuild_profile)
from affmax.core import PhaseCurve

N, THETA, ETA0 = 2, 0.55, 1.05


@pytest.fixture(scope="session")
def local_solve():
    return fixed_point_solve(N, THETA, ETA0)


@pytest.fixture(scope="session")
def curve_1e3(local_solve):
    return extend_global(local_solve, eta_max=1e3)


@pytest.fixture(scope="session")
def curve_1e5(local_solve):
    return extend_global(local_solve, eta_max=1e5)


@pytest.fixture(scope="session")
def curve_2e3(local_solve):
    return extend_global(local_solve, eta_max=2e3)


@pytest.fixture(scope="session")
def psi_profile(curve_1e3):
    T_inf, _ = blowup_time(curve_1e3)
    psi = rebuild_profile(curve_1e3, v0=1.0)
    psi.meta["R_inf"] = float(np.exp(T_inf))
    psi.meta["T_inf"] = float(T_inf)
    return psi


@pytest.fixture(scope="session")
def phi_config():
    return PositivePairConfig(v0=1.0, lam=1.0, theta=THETA)


@pytest.fixture(scope="session")
def phi_profile(phi_config):
    return build_phi(phi_config, np.linspace(0.0, 10.0, 1001))


@pytest.fixture(scope="session")
def solution(phi_profile, psi_profile):
    return assemble(phi_profile, psi_profile, m_cylinder=0, theta=THETA)


def restrict(curve: PhaseCurve, eta_max: float) -> PhaseCurve:
    sel = curve.eta <= eta_max
    return PhaseCurve(params=curve.params, taylor=curve.taylor,
                      eta=curve.eta[sel], zeta=curve.zeta[sel], I=curve.I[sel])
