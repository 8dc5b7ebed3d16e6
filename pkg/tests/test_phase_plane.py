import numpy as np
import pytest

from affmax.core import AnalyticEvaluator, ModelParams, RadialProfile, radial_residual
from affmax.errors import DomainError, ParameterError
from affmax.phase_plane import (bernstein_radial_check, coef_zero, phase_rhs,
                                phase_residual, power_solution_residual,
                                stationary_eta)


def brute_force_field(eta, zeta, n, theta):
    """zeta' from the unforced phase equation, evaluated term by term."""
    A = (2 * n * theta - (2 * n - 1)) * eta - (2 * n * theta - 1)
    B = n * eta * (eta - 1) * ((n * theta - (n - 1)) * eta - (n * theta - 1))
    return ((theta + 1) * zeta**2 / eta + zeta * A + B) / zeta


class TestPhaseRHS:
    def test_frozen_value(self):
        # n = 2, theta = 3/4 at (eta, zeta) = (2, 1): dzeta/deta = 7/8
        p = ModelParams(n=2, theta=0.75, lambda3=0.0)
        dz, dI = phase_rhs(2.0, 1.0, 0.0, p)
        assert dz == pytest.approx(7.0 / 8.0, abs=1e-14)
        assert dI == pytest.approx(3.0, abs=1e-14)

    def test_unforced_reduction_identity(self):
        # lambda3 = 0 reproduces the source field at every sampled point
        rng = np.random.default_rng(7)
        for n in (1, 2, 3, 5):
            for theta in (0.55, 0.75, 1.0, 1.6):
                p = ModelParams(n=n, theta=theta, lambda3=0.0)
                for _ in range(20):
                    eta = 1.0 + 3.0 * rng.random()
                    zeta = 0.05 + 2.0 * rng.random()
                    dz, _ = phase_rhs(eta, zeta, rng.normal(), p)
                    assert dz == pytest.approx(
                        brute_force_field(eta, zeta, n, theta), rel=1e-14)

    def test_eta_one_kills_cubic_term(self):
        # the zero-order term carries an (eta - 1) factor
        for n in (2, 3, 4):
            assert coef_zero(1.0, n, 0.66) == 0.0

    def test_forcing_term_sign(self):
        # negative lambda3 pushes the field up by |lambda3| eta^2 e^I / zeta
        base = ModelParams(n=2, theta=0.55, lambda3=0.0)
        forced = ModelParams(n=2, theta=0.55, lambda3=-0.5)
        dz0, _ = phase_rhs(1.5, 0.8, 0.2, base)
        dz1, _ = phase_rhs(1.5, 0.8, 0.2, forced)
        assert dz1 - dz0 == pytest.approx(0.5 * 1.5**2 * np.exp(0.2) / 0.8, rel=1e-14)

    def test_domain_errors(self):
        p = ModelParams(n=2, theta=0.55)
        with pytest.raises(DomainError):
            phase_rhs(2.0, 0.0, 0.0, p)
        with pytest.raises(DomainError):
            phase_rhs(1.0, 0.5, 0.0, p)

    def test_callable_wrapper(self):
        from affmax.phase_plane import PhaseRHS
        p = ModelParams(n=2, theta=0.55, lambda3=-0.3)
        rhs = PhaseRHS(p)
        assert rhs(1.5, 0.8, 0.2) == phase_rhs(1.5, 0.8, 0.2, p)

    def test_residual_form_consistency(self):
        p = ModelParams(n=2, theta=0.55, lambda3=-0.4)
        dz, _ = phase_rhs(1.7, 0.6, -0.3, p)
        assert phase_residual(1.7, 0.6, dz, -0.3, p) == pytest.approx(0.0, abs=1e-13)


class TestStationaryEta:
    def test_power_value(self):
        vals = sorted(stationary_eta(4, 5.0 / 6.0))
        assert vals == pytest.approx([1.0, 7.0], abs=1e-12)

    def test_coincident_roots(self):
        assert stationary_eta(2, 0.75) == {1.0}

    def test_n1_degenerate(self):
        for theta in (0.5, 0.75, 1.0):
            assert stationary_eta(1, theta) == {1.0}

    def test_zero_order_term_vanishes_at_stationary_points(self):
        for n in (2, 3, 4, 5):
            for theta in (0.6, 5.0 / 6.0, 1.2):
                for star in stationary_eta(n, theta):
                    assert abs(coef_zero(star, n, theta)) < 1e-12 * max(1.0, star**3)


class TestBernsteinRadial:
    @pytest.mark.parametrize("n", [3, 4, 5])
    @pytest.mark.parametrize("theta", [0.6, 0.75, 1.0, 1.5])
    def test_lattice_passes(self, n, theta):
        rep = bernstein_radial_check(n, theta, (1.0001, 1.05), samples=50)
        assert rep["pass"]
        assert all(w["forced_sign"] == "-" for w in rep["witnesses"])

    def test_below_one_branch(self):
        rep = bernstein_radial_check(3, 0.6, (0.95, 0.9999), samples=40)
        assert rep["pass"]
        assert all(w["forced_sign"] == "+" for w in rep["witnesses"])

    def test_stationary_crossing_reported(self):
        rep = bernstein_radial_check(4, 5.0 / 6.0, (6.9, 7.1), samples=30)
        assert rep["stationary_crossings"]  # eta* = 7 sits inside the window
        assert rep["pass"]

    def test_dimension_guard(self):
        with pytest.raises(ParameterError):
            bernstein_radial_check(2, 1.0, (1.001, 1.05))

    def test_window_must_exclude_one(self):
        with pytest.raises(ParameterError):
            bernstein_radial_check(3, 1.0, (0.99, 1.01))

    def test_report_is_json_ready(self):
        import json
        rep = bernstein_radial_check(3, 1.0, (1.001, 1.05), samples=10)
        json.dumps(rep)


class TestPowerSolutions:
    def test_k2(self):
        res = power_solution_residual(2, 5.0 / 6.0, 1.0, [0.5, 1.0, 2.0])
        assert np.max(np.abs(res)) < 1e-6

    def test_k3_scaled(self):
        res = power_solution_residual(3, 7.0 / 8.0, 2.0, [1.0])
        assert np.max(np.abs(res)) < 1e-6

    def test_theta_guard(self):
        with pytest.raises(ParameterError):
            power_solution_residual(2, 5.0 / 6.0 + 1e-2, 1.0, [1.0])

    def test_perturbed_theta_residual_nonzero(self):
        # same power profile, evaluated off the self-similar exponent
        p = 8

        def mono(j):
            c = 1.0
            for i in range(j):
                c *= (p - 1 - i)
            return lambda r, c=c, q=p - 1 - j: p * c * r**q

        ev = AnalyticEvaluator(mono(0), [mono(1), mono(2), mono(3)])
        r = np.linspace(0.25, 4.0, 17)
        prof = RadialProfile(r=r, v=mono(0)(r), u=r**p, n=4, evaluator=ev)
        res = radial_residual(prof, 5.0 / 6.0 + 1e-2, 4, 0.0, nodes=[1.0])
        assert abs(res[0]) > 0.1

    def test_origin_excluded(self):
        with pytest.raises(ParameterError):
            power_solution_residual(2, 5.0 / 6.0, 1.0, [0.0, 1.0])
