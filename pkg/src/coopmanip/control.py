"""
Feedback laws of the decentralized controller.

* cart: nested saturated PD on the position error;
* UAV outer loop: PD on the bar inclination with gravity compensation, giving
  the tangential force ``f_t`` the UAV must exert on the bar tip;
* force-to-attitude map ``theta_ref = sat_{pi/2}(gamma * atan(eps * f_t))``
  with ``gamma = pi / (2 atan(eps U_max))`` and thrust either
  ``f_t / sin(theta_ref)`` (basic) or ``pos_sat(f_t / sin(theta), U_max)``
  using the measured relative attitude (improved);
* UAV inner loop: PD on the attitude error ``beta - (theta_ref + alpha)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum

import numpy as np
from numba import njit

from .errors import InvariantError
from .model import P_G, P_M, ActuatorLimits, ControlInput, PhysicalParams, State, pos_sat, sat

F_TOL = 1e-9
HALF_PI = 0.5 * math.pi

BASIC = 0
IMPROVED = 1

# Layout of the flat gain vector handed to compiled kernels.
G_KPX, G_KDX, G_L1, G_L2, G_KPA, G_KDA, G_EPS, G_GAMMA, G_KPB, G_KDB = range(10)


class ThrustLaw(str, Enum):
    BASIC = "basic"
    IMPROVED = "improved"

    @property
    def code(self) -> int:
        return BASIC if self is ThrustLaw.BASIC else IMPROVED


def gamma_for(epsilon: float, u_max: float) -> float:
    """Map gain that makes ``theta_ref(U_max) = pi/2``."""
    return math.pi / (2.0 * math.atan(epsilon * u_max))


@dataclass(frozen=True)
class UgvGains:
    k_p_x: float
    k_d_x: float
    lambda_1: float
    lambda_2: float

    def __post_init__(self):
        if not (self.k_p_x > 0 and self.k_d_x > 0):
            raise InvariantError("UgvGains: k_p_x and k_d_x must be > 0")
        if not (self.lambda_1 > 0 and self.lambda_2 > 0):
            raise InvariantError("UgvGains: saturation levels must be > 0")
        if not self.lambda_2 < 0.5 * self.lambda_1 * self.k_d_x:
            raise InvariantError(
                "UgvGains: lambda_2 must be < lambda_1*k_d_x/2 for global asymptotic "
                f"stability of the cart loop (got lambda_2={self.lambda_2}, "
                f"lambda_1*k_d_x/2={0.5 * self.lambda_1 * self.k_d_x})"
            )


@dataclass(frozen=True)
class OuterGains:
    k_p_alpha: float
    k_d_alpha: float
    epsilon: float
    gamma: float

    def __post_init__(self):
        for name in ("k_p_alpha", "k_d_alpha", "epsilon", "gamma"):
            if not getattr(self, name) > 0:
                raise InvariantError(f"OuterGains.{name} must be > 0")

    @classmethod
    def tuned(cls, k_p_alpha: float, k_d_alpha: float, epsilon: float, u_max: float) -> "OuterGains":
        """Gains with ``gamma`` chosen so the thrust map reaches ``pi/2`` at ``U_max``."""
        return cls(k_p_alpha, k_d_alpha, epsilon, gamma_for(epsilon, u_max))

    @property
    def zero_force_thrust(self) -> float:
        """Limit of ``f_t / sin(theta_ref)`` as ``f_t -> 0``, i.e. ``1/(gamma*eps)``."""
        return 1.0 / (self.gamma * self.epsilon)


@dataclass(frozen=True)
class InnerGains:
    k_p_beta: float
    k_d_beta: float

    def __post_init__(self):
        if not (self.k_p_beta > 0 and self.k_d_beta > 0):
            raise InvariantError("InnerGains: k_p_beta and k_d_beta must be > 0")


@dataclass(frozen=True)
class ControllerConfig:
    ugv: UgvGains
    outer: OuterGains
    inner: InnerGains
    thrust_law: ThrustLaw = ThrustLaw.BASIC

    def __post_init__(self):
        object.__setattr__(self, "thrust_law", ThrustLaw(self.thrust_law))

    def validate(self, lim: ActuatorLimits) -> None:
        """Check the invariants that depend on the actuator limits."""
        if self.ugv.lambda_1 > lim.F_max:
            raise InvariantError(
                f"UgvGains.lambda_1 ({self.ugv.lambda_1}) must not exceed F_max ({lim.F_max})"
            )
        expected = gamma_for(self.outer.epsilon, lim.U_max)
        if not math.isclose(self.outer.gamma, expected, rel_tol=1e-12):
            raise InvariantError(
                f"OuterGains.gamma ({self.outer.gamma}) must equal pi/(2 atan(eps*U_max)) = {expected}"
            )

    def as_array(self) -> np.ndarray:
        u, o, i = self.ugv, self.outer, self.inner
        return np.array(
            [u.k_p_x, u.k_d_x, u.lambda_1, u.lambda_2,
             o.k_p_alpha, o.k_d_alpha, o.epsilon, o.gamma,
             i.k_p_beta, i.k_d_beta],
            dtype=np.float64,
        )


@dataclass(frozen=True)
class ControlDebug:
    f_t: float
    theta_ref: float
    beta_ref: float
    u1_pre_clamp: float
    u2_pre_clamp: float
    u3_pre_clamp: float


# -- compiled scalar laws ---------------------------------------------------


@njit(cache=True)
def _ugv_force(x, x_dot, x_ref, k_p, k_d, lambda_1, lambda_2):
    return -sat(k_d * x_dot + sat(k_p * (x - x_ref), lambda_2), lambda_1)


@njit(cache=True)
def _tangential_force(alpha, alpha_dot, alpha_ref, k_p, k_d, M, g):
    return -k_p * (alpha - alpha_ref) - k_d * alpha_dot + M * g * math.cos(alpha)


@njit(cache=True)
def _theta_ref(f_t, epsilon, gamma):
    return sat(gamma * math.atan(epsilon * f_t), HALF_PI)


@njit(cache=True)
def _thrust_basic(f_t, theta_ref, epsilon, gamma):
    if abs(f_t) <= F_TOL:
        return 1.0 / (gamma * epsilon)
    return f_t / math.sin(theta_ref)


@njit(cache=True)
def _thrust_improved(f_t, theta, u_max, epsilon, gamma):
    s = math.sin(theta)
    if s == 0.0:
        if abs(f_t) <= F_TOL:
            return 1.0 / (gamma * epsilon)
        # quotient diverges; the positive saturation picks one of its ends
        return u_max if f_t > 0 else 0.0
    return pos_sat(f_t / s, u_max)


@njit(cache=True)
def _inner_torque(beta, beta_dot, beta_ref, k_p, k_d):
    return -k_p * (beta - beta_ref) - k_d * beta_dot


@njit(cache=True)
def cascade(x, x_dot, alpha, alpha_dot, beta, beta_dot, x_ref, alpha_ref, pv, lv, gv, law):
    """Full controller on raw state scalars.

    Returns ``(u1, u2, u3, u1_cmd, u2_cmd, u3_cmd, f_t, theta_ref, beta_ref)``
    where the first three are clamped to the actuator box ``lv``.
    """
    f_t = _tangential_force(alpha, alpha_dot, alpha_ref, gv[G_KPA], gv[G_KDA], pv[P_M], pv[P_G])
    th_ref = _theta_ref(f_t, gv[G_EPS], gv[G_GAMMA])
    b_ref = th_ref + alpha
    if law == BASIC:
        c1 = _thrust_basic(f_t, th_ref, gv[G_EPS], gv[G_GAMMA])
    else:
        c1 = _thrust_improved(f_t, beta - alpha, lv[0], gv[G_EPS], gv[G_GAMMA])
    c2 = _inner_torque(beta, beta_dot, b_ref, gv[G_KPB], gv[G_KDB])
    c3 = _ugv_force(x, x_dot, x_ref, gv[G_KPX], gv[G_KDX], gv[G_L1], gv[G_L2])
    return (pos_sat(c1, lv[0]), sat(c2, lv[1]), sat(c3, lv[2]), c1, c2, c3, f_t, th_ref, b_ref)


# -- public API -------------------------------------------------------------


def ugv_control(s: State, x_ref: float, g: UgvGains) -> float:
    """Cart force ``-sat_l1(k_d*xd + sat_l2(k_p*(x - x_ref)))``."""
    return _ugv_force(s.x, s.x_dot, x_ref, g.k_p_x, g.k_d_x, g.lambda_1, g.lambda_2)


def tangential_force(s: State, alpha_ref: float, g: OuterGains, p: PhysicalParams) -> float:
    return _tangential_force(s.alpha, s.alpha_dot, alpha_ref, g.k_p_alpha, g.k_d_alpha, p.M, p.g)


def theta_ref(f_t: float, g: OuterGains) -> float:
    """Desired relative attitude for a requested tangential force."""
    return _theta_ref(float(f_t), g.epsilon, g.gamma)


def thrust_basic(f_t: float, theta_ref: float, g: OuterGains) -> float:
    """Thrust ``f_t / sin(theta_ref)``; returns ``1/(gamma*eps)`` for ``|f_t| <= F_TOL``."""
    return _thrust_basic(float(f_t), float(theta_ref), g.epsilon, g.gamma)


def thrust_improved(f_t: float, theta_actual: float, lim: ActuatorLimits, g: OuterGains) -> float:
    """Thrust ``pos_sat(f_t / sin(theta), U_max)`` using the measured relative attitude.

    ``g`` only supplies the zero-force value ``1/(gamma*eps)`` used when both
    ``f_t`` and ``sin(theta)`` vanish.
    """
    return _thrust_improved(float(f_t), float(theta_actual), lim.U_max, g.epsilon, g.gamma)


def inner_control(s: State, beta_ref: float, g: InnerGains) -> float:
    return _inner_torque(s.beta, s.beta_dot, beta_ref, g.k_p_beta, g.k_d_beta)


def cascade_step(
    s: State,
    refs: tuple[float, float],
    cfg: ControllerConfig,
    p: PhysicalParams,
    lim: ActuatorLimits,
) -> tuple[ControlInput, ControlDebug]:
    """Evaluate the whole controller for references ``(x_ref, alpha_ref)``."""
    x_ref, alpha_ref = refs
    out = cascade(
        s.x, s.x_dot, s.alpha, s.alpha_dot, s.beta, s.beta_dot, float(x_ref), float(alpha_ref),
        p.as_array(), lim.as_array(), cfg.as_array(), cfg.thrust_law.code,
    )
    u1, u2, u3, c1, c2, c3, f_t, th, b = out
    return ControlInput(u1, u2, u3), ControlDebug(f_t, th, b, c1, c2, c3)


def make_controller(refs, cfg: ControllerConfig, p: PhysicalParams, lim: ActuatorLimits):
    """Closure ``State -> ControlInput`` for use with :func:`coopmanip.model.rk4_step`."""

    def controller(s: State) -> ControlInput:
        return cascade_step(s, refs, cfg, p, lim)[0]

    return controller
