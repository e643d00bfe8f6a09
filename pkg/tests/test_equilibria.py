import math

import numpy as np
import pytest
from scipy.optimize import brentq

from coopmanip.control import OuterGains
from coopmanip.equilibria import (
    AlphaRange,
    attainable_alpha_range,
    attainable_beta_range,
    controller_equilibrium_attitude,
    steady_state_input,
)
from coopmanip.errors import (
    InfeasibleEquilibriumError,
    InvariantError,
    OutOfRangeError,
    SingularEquilibriumError,
)
from coopmanip.model import ActuatorLimits


def _feasible_thetas(alpha, p, lim, n=200_001):
    """Relative attitudes holding ``alpha`` with 0 <= u1 <= U_max, by brute force."""
    th = np.linspace(-math.pi, 2 * math.pi, n)
    s = np.sin(th)
    load = p.M * p.g * math.cos(alpha)
    with np.errstate(divide="ignore", invalid="ignore"):
        u1 = load / s
    ok = (u1 >= 0) & (u1 <= lim.U_max) & (np.abs(s) > 1e-9)
    return th[ok]


class TestAlphaRange:
    def test_strong_thrust_allows_everything(self, params):
        r = attainable_alpha_range(params, ActuatorLimits(10.0, 1.0, 1.0))
        assert (r.alpha_min, r.alpha_max) == (0.0, math.pi)

    def test_default_params(self, params, limits):
        r = attainable_alpha_range(params, limits)
        expected = math.acos(5 / (0.7 * 9.81))
        assert r.alpha_min == pytest.approx(expected, abs=1e-12)
        assert r.alpha_max == pytest.approx(math.acos(-5 / (0.7 * 9.81)), abs=1e-12)
        assert r.alpha_min == pytest.approx(0.7552, abs=1e-4)
        assert r.alpha_max == pytest.approx(2.3864, abs=1e-4)

    def test_vanishing_thrust_collapses_to_vertical(self, params):
        r = attainable_alpha_range(params, ActuatorLimits(1e-12, 1.0, 1.0))
        assert r.alpha_min == pytest.approx(math.pi / 2)
        assert r.alpha_max == pytest.approx(math.pi / 2)

    def test_larger_thrust_gives_superset(self, params):
        ranges = [attainable_alpha_range(params, ActuatorLimits(u, 1, 1)) for u in (1, 2, 4, 6, 6.8)]
        for small, big in zip(ranges, ranges[1:]):
            assert big.alpha_min <= small.alpha_min and big.alpha_max >= small.alpha_max

    def test_invariants(self):
        with pytest.raises(InvariantError):
            AlphaRange(0.5, 2.0)
        assert 1.0 in AlphaRange(0.5, math.pi - 0.5)


class TestBetaRange:
    def test_vertical(self, params, limits):
        r = attainable_beta_range(math.pi / 2, params, limits)
        assert (r.beta_min, r.beta_max) == pytest.approx((math.pi / 2, 3 * math.pi / 2))

    def test_lowest_inclination(self, params, limits):
        a_min = attainable_alpha_range(params, limits).alpha_min
        r = attainable_beta_range(a_min, params, limits)
        assert r.beta_min == pytest.approx(math.pi / 2 + a_min)

    def test_first_branch_against_root_solve(self, params, limits):
        a = 1.0
        f = lambda b: limits.U_max * math.sin(b - a) - params.M * params.g * math.cos(a)
        lo = brentq(f, a, a + math.pi / 2, xtol=1e-14)
        hi = brentq(f, a + math.pi / 2, a + math.pi, xtol=1e-14)
        r = attainable_beta_range(a, params, limits)
        assert (r.beta_min, r.beta_max) == pytest.approx((lo, hi), abs=1e-10)

    @pytest.mark.parametrize("alpha", [0.8, 1.2, 1.5, 1.7, 2.0, 2.3])
    def test_matches_brute_force(self, params, limits, alpha):
        th = _feasible_thetas(alpha, params, limits)
        r = attainable_beta_range(alpha, params, limits)
        step = 3 * math.pi / 200_000
        assert r.beta_min - alpha == pytest.approx(th.min(), abs=2 * step)
        assert r.beta_max - alpha == pytest.approx(th[th <= th.min() + math.pi].max(), abs=2 * step)

    def test_contains_controller_equilibrium(self, params, limits, cfg):
        rng = attainable_alpha_range(params, limits)
        for a in np.linspace(rng.alpha_min, rng.alpha_max, 201):
            b = controller_equilibrium_attitude(float(a), cfg, params)
            r = attainable_beta_range(float(a), params, limits)
            assert r.beta_min - 1e-9 <= b <= r.beta_max + 1e-9

    def test_out_of_range(self, params, limits):
        with pytest.raises(OutOfRangeError):
            attainable_beta_range(0.3, params, limits)


class TestSteadyStateInput:
    def test_vertical_needs_no_thrust(self, params, limits):
        u = steady_state_input(math.pi / 2, math.pi / 2, params, limits)
        assert (u.u1, u.u2, u.u3) == (0.0, 0.0, 0.0)

    def test_lowest_inclination_needs_full_thrust(self, params, limits):
        a = attainable_alpha_range(params, limits).alpha_min
        assert steady_state_input(a, a + math.pi / 2, params, limits).u1 == pytest.approx(limits.U_max)

    def test_residual_of_static_balance(self, params, limits):
        # needs about 5.17 N: beyond the default 5 N limit, so check both
        with pytest.raises(InfeasibleEquilibriumError):
            steady_state_input(1.0, 1.8, params, limits)
        u = steady_state_input(1.0, 1.8, params, ActuatorLimits(6.0, 1.3, 10.0))
        assert u.u1 == pytest.approx(0.7 * 9.81 * math.cos(1.0) / math.sin(0.8))
        assert u.u1 * math.sin(0.8) - params.M * params.g * math.cos(1.0) == pytest.approx(0, abs=1e-12)

    def test_too_much_thrust(self, params, limits):
        with pytest.raises(InfeasibleEquilibriumError):
            steady_state_input(1.0, 1.05, params, limits)

    def test_negative_thrust(self, params, limits):
        with pytest.raises(InfeasibleEquilibriumError):
            steady_state_input(1.0, 0.2, params, limits)

    def test_singular(self, params, limits):
        with pytest.raises(SingularEquilibriumError):
            steady_state_input(1.0, 1.0, params, limits)


class TestControllerEquilibrium:
    def test_vertical(self, params, cfg):
        assert controller_equilibrium_attitude(math.pi / 2, cfg, params) == pytest.approx(math.pi / 2)

    def test_lowest_inclination(self, params, limits, cfg):
        a = attainable_alpha_range(params, limits).alpha_min
        assert controller_equilibrium_attitude(a, cfg, params) == pytest.approx(a + math.pi / 2)

    def test_past_vertical(self, params, limits, cfg):
        a = 2 * math.pi / 3
        b = controller_equilibrium_attitude(a, cfg, params)
        assert b == pytest.approx(a + cfg.outer.gamma * math.atan(-params.M * params.g / 2))
        assert 0 <= steady_state_input(a, b, params, limits).u1 <= limits.U_max

    @pytest.mark.parametrize("eps", [0.01, 0.1, 1.0, 10.0, 100.0])
    def test_steady_thrust_within_limits(self, params, limits, cfg, eps):
        import dataclasses

        c = dataclasses.replace(cfg, outer=OuterGains.tuned(20, 5, eps, limits.U_max))
        rng = attainable_alpha_range(params, limits)
        for a in np.linspace(rng.alpha_min, rng.alpha_max, 1000):
            u1 = steady_state_input(float(a), controller_equilibrium_attitude(float(a), c, params),
                                    params, limits).u1
            assert 0 <= u1 <= limits.U_max
