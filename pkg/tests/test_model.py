import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from coopmanip.errors import IntegrationDivergedError, InvariantError
from coopmanip.model import (
    Accel,
    ActuatorLimits,
    ControlInput,
    PhysicalParams,
    State,
    energy,
    energy_series,
    full_dynamics,
    pos_sat,
    rk4_step,
    sat,
    simplified_dynamics,
)

reals = st.floats(-1e6, 1e6, allow_nan=False)
levels = st.floats(0, 1e6, allow_nan=False)


class TestSaturation:
    @pytest.mark.parametrize("v, lam, expected", [(3, 2, 2), (-3, 2, -2), (1, 2, 1)])
    def test_sat_examples(self, v, lam, expected):
        assert sat(float(v), float(lam)) == expected

    @pytest.mark.parametrize("v, lam, expected", [(-1, 5, 0), (7, 5, 5), (3, 5, 3)])
    def test_pos_sat_examples(self, v, lam, expected):
        assert pos_sat(float(v), float(lam)) == expected

    @given(reals, levels)
    def test_sat_matches_clip_and_is_odd(self, v, lam):
        assert sat(v, lam) == np.clip(v, -lam, lam)
        assert sat(-v, lam) == -sat(v, lam)

    @given(reals, levels)
    def test_sat_idempotent(self, v, lam):
        once = sat(v, lam)
        assert sat(once, lam) == once

    @given(reals, levels)
    def test_pos_sat_range_and_idempotent(self, v, lam):
        r = pos_sat(v, lam)
        assert 0 <= r <= lam
        assert pos_sat(r, lam) == r
        assert r == (sat(v, lam) if v >= 0 else 0.0)


class TestParams:
    def test_derived_quantities(self, params):
        assert params.M_tot == pytest.approx(3.2)
        assert params.M == pytest.approx(0.7)
        assert params.I_0 == pytest.approx((1.0 * 0.25 + 0.33) / 1.0 + 0.2)

    @pytest.mark.parametrize("field", ["m_u", "I_u", "m_c", "m_b", "I_b", "L", "d_G", "g"])
    def test_nonpositive_rejected(self, params, field):
        with pytest.raises(InvariantError, match=field):
            params.replace(**{field: 0.0})

    def test_center_of_mass_beyond_tip_rejected(self, params):
        with pytest.raises(InvariantError, match="d_G"):
            params.replace(d_G=1.5)

    def test_limits_positive(self):
        with pytest.raises(InvariantError):
            ActuatorLimits(5.0, 0.0, 10.0)

    def test_state_must_be_finite(self):
        with pytest.raises(InvariantError):
            State(0, 0, math.nan, 0, 0, 0)

    def test_theta_is_relative_attitude(self):
        assert State(beta=1.0, alpha=0.25).theta == 0.75

    def test_control_input_clamped_construction(self, limits):
        u = ControlInput.saturated(-1.0, 5.0, -20.0, limits)
        assert (u.u1, u.u2, u.u3) == (0.0, 1.3, -10.0)
        assert u.within(limits)
        assert not ControlInput(6.0, 0, 0).within(limits)


def _oracle_full(s, u, p):
    """Solve the coupled mass-matrix system directly."""
    sa, ca = math.sin(s.alpha), math.cos(s.alpha)
    A = np.array([[p.M_tot, -p.M * p.L * sa], [-p.M * sa, p.I_0]])
    b = np.array([u.u3 + p.M * p.L * s.alpha_dot**2 * ca,
                  u.u1 * math.sin(s.beta - s.alpha) - p.M * p.g * ca])
    xdd, add = np.linalg.solve(A, b)
    return xdd, add, u.u2 / p.I_u


class TestDynamics:
    def test_vertical_rest_is_equilibrium(self, params):
        acc = full_dynamics(State(alpha=math.pi / 2), ControlInput(), params)
        assert acc.x_ddot == pytest.approx(0, abs=1e-15)
        assert acc.alpha_ddot == pytest.approx(0, abs=1e-15)
        assert acc.beta_ddot == 0

    def test_horizontal_rest_falls(self, params):
        acc = full_dynamics(State(alpha=0.0), ControlInput(), params)
        assert acc.x_ddot == pytest.approx(0, abs=1e-15)
        assert acc.alpha_ddot == pytest.approx(-params.M * params.g / params.I_0)
        assert acc.alpha_ddot == pytest.approx(-8.804, abs=1e-3)

    @pytest.mark.parametrize("alpha", [0.0, 0.7, 2.0])
    def test_attitude_row_decoupled(self, params, alpha):
        acc = full_dynamics(State(alpha=alpha), ControlInput(u2=0.1), params)
        assert acc.beta_ddot == pytest.approx(0.1 / 0.881e-3)

    @pytest.mark.parametrize("seed", range(5))
    def test_matches_linear_solve(self, params, seed):
        rng = np.random.default_rng(seed)
        s = State(*rng.uniform(-3, 3, 6))
        u = ControlInput(*rng.uniform([0, -1, -10], [5, 1, 10]))
        acc = full_dynamics(s, u, params)
        np.testing.assert_allclose((acc.x_ddot, acc.alpha_ddot, acc.beta_ddot),
                                   _oracle_full(s, u, params), rtol=1e-12, atol=1e-12)

    def test_simplified_examples(self, params):
        acc = simplified_dynamics(State(alpha=math.pi / 2), ControlInput(), params)
        assert (acc.x_ddot, acc.alpha_ddot) == pytest.approx((0, 0), abs=1e-15)
        acc = simplified_dynamics(State(alpha=math.pi / 2), ControlInput(u3=2.0), params)
        assert acc.x_ddot == pytest.approx(1.0)
        assert acc.alpha_ddot == pytest.approx(params.M * 1.0 / params.I_0)
        acc = simplified_dynamics(State(alpha=0.0), ControlInput(), params)
        assert acc.alpha_ddot == pytest.approx(-params.M * params.g / params.I_0)

    @pytest.mark.parametrize("alpha", [0.0, math.pi])
    def test_models_agree_when_bar_is_flat_and_still(self, params, alpha):
        s = State(0.3, 0.5, alpha, 0.0, 1.0, 2.0)
        u = ControlInput(3.0, 0.2, 0.0)
        a, b = full_dynamics(s, u, params), simplified_dynamics(s, u, params)
        assert a.x_ddot == pytest.approx(b.x_ddot, abs=1e-15)
        assert a.alpha_ddot == pytest.approx(b.alpha_ddot)
        assert a.beta_ddot == b.beta_ddot

    def test_cart_force_accelerates_whole_chain_in_full_model(self, params):
        # the two models differ in the cart inertia they see: M_tot vs m_c
        s, u = State(alpha=0.0), ControlInput(u3=4.0)
        assert full_dynamics(s, u, params).x_ddot == pytest.approx(4.0 / params.M_tot)
        assert simplified_dynamics(s, u, params).x_ddot == pytest.approx(4.0 / params.m_c)
        assert full_dynamics(s, u, params).alpha_ddot == pytest.approx(
            simplified_dynamics(s, u, params).alpha_ddot)

    def test_mass_matrix_determinant_bounded_below(self, params):
        a = np.linspace(-4, 4, 1001)
        det = params.M_tot * params.I_0 - params.M**2 * params.L * np.sin(a) ** 2
        assert det.min() >= params.M_tot * params.I_0 - params.M**2 * params.L > 0


class TestEnergy:
    def test_flat_rest(self, params):
        assert energy(State(alpha=0.0), params) == (0.0, 0.0)

    def test_vertical_rest(self, params):
        T, V = energy(State(alpha=math.pi / 2), params)
        assert T == 0
        assert V == pytest.approx((params.m_b * params.d_G + params.m_u * params.L) * params.g)

    def test_translation_only(self, params):
        T, _ = energy(State(x_dot=1.0, alpha=0.4), params)
        assert T == pytest.approx(0.5 * params.M_tot)

    def test_series_matches_scalar(self, params):
        rng = np.random.default_rng(0)
        y = rng.uniform(-2, 2, (20, 6))
        expected = [sum(energy(State(*row), params)) for row in y]
        np.testing.assert_allclose(energy_series(y, params), expected, rtol=1e-13)


class TestRk4:
    def test_equilibrium_is_fixed_point(self, params):
        a, b = math.pi / 3, math.pi / 3 + 1.2
        u1 = params.M * params.g * math.cos(a) / math.sin(b - a)
        s = State(0.1, 0.0, a, 0.0, b, 0.0)
        s1 = rk4_step(s, lambda _: ControlInput(u1, 0, 0), "full", params, 1e-2)
        np.testing.assert_allclose(s1.as_array(), s.as_array(), atol=1e-12)

    def test_attitude_under_constant_torque_is_exact(self, params):
        u2, dt = 0.02, 0.05
        s = State(alpha=math.pi / 2, beta=0.3, beta_dot=0.1)
        s1 = rk4_step(s, lambda _: ControlInput(0, u2, 0), "full", params, dt)
        expected = 0.3 + 0.1 * dt + 0.5 * u2 / params.I_u * dt**2
        assert s1.beta == pytest.approx(expected, abs=1e-12)

    def test_short_run_conserves_energy(self, params):
        s = State(0, 0.2, 1.0, 0.5, 0.7, 1.0)
        e0 = sum(energy(s, params))
        for _ in range(200):
            s = rk4_step(s, lambda _: ControlInput(), "full", params, 1e-3)
        assert abs(sum(energy(s, params)) - e0) / max(abs(e0), 1) < 1e-9

    def test_divergence_reported(self, params):
        def blow_up(s, u, p):
            return Accel(math.inf, 0.0, 0.0)

        with pytest.raises(IntegrationDivergedError):
            rk4_step(State(alpha=1.0), lambda _: ControlInput(), blow_up, params, 1e-3)

    def test_rejects_nonpositive_step(self, params):
        with pytest.raises(ValueError):
            rk4_step(State(), lambda _: ControlInput(), "full", params, 0.0)
