"""
Planar model of a cart (UGV), a rigid bar and a planar quadrotor (UAV).

Generalized coordinates are the cart position ``x``, the bar inclination
``alpha`` and the UAV attitude ``beta``; all angles are measured from the
horizon and stored unwrapped. The coupled equations of motion are

    M_tot*xdd - M*L*(sin(a)*add + ad**2*cos(a)) = u3
    M*(-sin(a)*xdd + g*cos(a)) + I_0*add       = u1*sin(b - a)
    I_u*bdd                                    = u2

with ``M_tot = m_c + m_b + m_u``, ``M = m_b*d_G/L + m_u`` and
``I_0 = (m_b*d_G**2 + I_b)/L + m_u*L``. The simplified model drops the
reaction of the bar on the cart (``m_c*xdd = u3``).

The scalar kernels (``sat``, ``pos_sat``, ``accel``) are compiled with numba
so the closed-loop simulator can call them without leaving machine code.
"""

from __future__ import annotations

import math
from dataclasses import astuple, dataclass
from typing import Callable, Union

import numpy as np
from numba import njit

from .errors import DegenerateMassMatrixError, IntegrationDivergedError, InvariantError

FULL = 0
SIMPLIFIED = 1
DYNAMICS_MODELS = {"full": FULL, "simplified": SIMPLIFIED}

DET_EPS = 1e-12

# Layout of the flat parameter vector handed to compiled kernels.
P_M_U, P_I_U, P_M_C, P_M_B, P_I_B, P_L, P_D_G, P_G, P_M_TOT, P_M, P_I_0 = range(11)


@njit(cache=True)
def sat(v, lam):
    """Symmetric saturation ``sign(v) * min(|v|, lam)`` with ``lam >= 0``."""
    if v > lam:
        return lam
    if v < -lam:
        return -lam
    return v


@njit(cache=True)
def pos_sat(v, lam):
    """Positive saturation: ``sat(v, lam)`` for ``v >= 0`` and 0 otherwise."""
    if v < 0:
        return 0.0
    if v > lam:
        return lam
    return v


@njit(cache=True)
def accel(model, x_dot, alpha, alpha_dot, beta, u1, u2, u3, pv):
    """Generalized accelerations ``(xdd, add, bdd, det)``.

    ``det`` is the determinant of the 2x2 mass matrix for the full model and
    ``m_c * I_0`` for the simplified one.
    """
    sa = math.sin(alpha)
    ca = math.cos(alpha)
    M = pv[P_M]
    L = pv[P_L]
    I_0 = pv[P_I_0]
    g = pv[P_G]
    tangential = u1 * math.sin(beta - alpha) - M * g * ca
    if model == FULL:
        M_tot = pv[P_M_TOT]
        # [[M_tot, -M L sa], [-M sa, I_0]] [xdd, add]^T = [r1, r2]^T
        r1 = u3 + M * L * alpha_dot * alpha_dot * ca
        det = M_tot * I_0 - M * M * L * sa * sa
        xdd = (I_0 * r1 + M * L * sa * tangential) / det
        add = (M * sa * r1 + M_tot * tangential) / det
    else:
        det = pv[P_M_C] * I_0
        xdd = u3 / pv[P_M_C]
        add = (tangential + M * sa * xdd) / I_0
    return xdd, add, u2 / pv[P_I_U], det


@dataclass(frozen=True)
class PhysicalParams:
    """Masses [kg], inertias [kg m^2], lengths [m] and gravity [m/s^2]."""

    m_u: float
    I_u: float
    m_c: float
    m_b: float
    I_b: float
    L: float
    d_G: float
    g: float = 9.81

    def __post_init__(self):
        for name, value in zip(
            ("m_u", "I_u", "m_c", "m_b", "I_b", "L", "d_G", "g"), astuple(self)
        ):
            if not (math.isfinite(value) and value > 0):
                raise InvariantError(f"PhysicalParams.{name} must be finite and > 0, got {value}")
        if self.d_G > self.L:
            raise InvariantError(f"PhysicalParams.d_G ({self.d_G}) must not exceed L ({self.L})")
        if not self.M_tot * self.I_0 > self.M**2 * self.L:
            raise InvariantError("PhysicalParams violate M_tot*I_0 > M^2*L (singular mass matrix)")

    @property
    def M_tot(self) -> float:
        return self.m_c + self.m_b + self.m_u

    @property
    def M(self) -> float:
        """Apparent mass of the bar and UAV seen at the bar tip."""
        return self.m_b * self.d_G / self.L + self.m_u

    @property
    def I_0(self) -> float:
        """Inertia of bar and UAV about the cart joint, divided by ``L``."""
        return (self.m_b * self.d_G**2 + self.I_b) / self.L + self.m_u * self.L

    def replace(self, **changes) -> "PhysicalParams":
        values = {**self.__dict__, **changes}
        return PhysicalParams(**values)

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self) + (self.M_tot, self.M, self.I_0), dtype=np.float64)


@dataclass(frozen=True)
class ActuatorLimits:
    """Thrust ``0 <= u1 <= U_max``, torque ``|u2| <= T_max``, cart force ``|u3| <= F_max``."""

    U_max: float
    T_max: float
    F_max: float

    def __post_init__(self):
        for name, value in zip(("U_max", "T_max", "F_max"), astuple(self)):
            if not (math.isfinite(value) and value > 0):
                raise InvariantError(f"ActuatorLimits.{name} must be finite and > 0, got {value}")

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)


@dataclass(frozen=True)
class State:
    x: float = 0.0
    x_dot: float = 0.0
    alpha: float = 0.0
    alpha_dot: float = 0.0
    beta: float = 0.0
    beta_dot: float = 0.0

    def __post_init__(self):
        if not all(math.isfinite(v) for v in astuple(self)):
            raise InvariantError(f"State has non-finite entries: {astuple(self)}")

    @property
    def theta(self) -> float:
        """Relative attitude of the UAV with respect to the bar, ``beta - alpha``."""
        return self.beta - self.alpha

    def as_array(self) -> np.ndarray:
        return np.array(astuple(self), dtype=np.float64)

    @classmethod
    def from_array(cls, y) -> "State":
        return cls(*(float(v) for v in y))


@dataclass(frozen=True)
class ControlInput:
    """Thrust ``u1`` [N], UAV torque ``u2`` [N m] and cart force ``u3`` [N]."""

    u1: float = 0.0
    u2: float = 0.0
    u3: float = 0.0

    @classmethod
    def saturated(cls, u1, u2, u3, lim: ActuatorLimits) -> "ControlInput":
        """Build an input clamped to the actuator box."""
        return cls(pos_sat(float(u1), lim.U_max), sat(float(u2), lim.T_max), sat(float(u3), lim.F_max))

    def within(self, lim: ActuatorLimits) -> bool:
        return 0.0 <= self.u1 <= lim.U_max and abs(self.u2) <= lim.T_max and abs(self.u3) <= lim.F_max


@dataclass(frozen=True)
class Accel:
    x_ddot: float
    alpha_ddot: float
    beta_ddot: float


def _accel(model: int, s: State, u: ControlInput, p: PhysicalParams) -> Accel:
    xdd, add, bdd, det = accel(
        model, s.x_dot, s.alpha, s.alpha_dot, s.beta, u.u1, u.u2, u.u3, p.as_array()
    )
    if det <= DET_EPS:
        raise DegenerateMassMatrixError(f"mass matrix determinant {det:.3e} <= {DET_EPS}")
    return Accel(xdd, add, bdd)


def full_dynamics(s: State, u: ControlInput, p: PhysicalParams) -> Accel:
    """Accelerations of the coupled cart/bar/UAV model."""
    return _accel(FULL, s, u, p)


def simplified_dynamics(s: State, u: ControlInput, p: PhysicalParams) -> Accel:
    """Accelerations when the bar's reaction on the cart is neglected (``m_c >> m_b, m_u``)."""
    return _accel(SIMPLIFIED, s, u, p)


def energy(s: State, p: PhysicalParams) -> tuple[float, float]:
    """Kinetic and potential energy ``(T, V)`` in joules."""
    xd, a, ad, bd = s.x_dot, s.alpha, s.alpha_dot, s.beta_dot
    sa = math.sin(a)
    kinetic = (
        0.5 * p.m_c * xd**2
        + 0.5 * p.m_b * (xd**2 - 2 * xd * p.d_G * ad * sa + p.d_G**2 * ad**2)
        + 0.5 * p.m_u * (xd**2 - 2 * xd * p.L * ad * sa + p.L**2 * ad**2)
        + 0.5 * p.I_b * ad**2
        + 0.5 * p.I_u * bd**2
    )
    potential = (p.m_b * p.d_G + p.m_u * p.L) * sa * p.g
    return kinetic, potential


def energy_series(states: np.ndarray, p: PhysicalParams) -> np.ndarray:
    """Total energy ``T + V`` for each row of an ``(N, 6)`` state array."""
    y = np.asarray(states, dtype=np.float64)
    xd, a, ad, bd = y[:, 1], y[:, 2], y[:, 3], y[:, 5]
    sa = np.sin(a)
    kinetic = (
        0.5 * p.m_c * xd**2
        + 0.5 * p.m_b * (xd**2 - 2 * xd * p.d_G * ad * sa + p.d_G**2 * ad**2)
        + 0.5 * p.m_u * (xd**2 - 2 * xd * p.L * ad * sa + p.L**2 * ad**2)
        + 0.5 * p.I_b * ad**2
        + 0.5 * p.I_u * bd**2
    )
    return kinetic + (p.m_b * p.d_G + p.m_u * p.L) * sa * p.g


Dynamics = Union[str, Callable[[State, ControlInput, PhysicalParams], Accel]]


def _resolve_dynamics(dynamics: Dynamics):
    if callable(dynamics):
        return dynamics
    try:
        return {FULL: full_dynamics, SIMPLIFIED: simplified_dynamics}[DYNAMICS_MODELS[dynamics]]
    except KeyError:
        raise ValueError(f"unknown dynamics model {dynamics!r}; use 'full' or 'simplified'") from None


def rk4_step(
    s: State,
    controller: Callable[[State], ControlInput],
    dynamics: Dynamics,
    p: PhysicalParams,
    dt: float,
) -> State:
    """Advance ``s`` by one classical Runge-Kutta step of length ``dt``.

    The controller is evaluated at every stage. This is the general,
    pure-Python path; closed-loop runs of the built-in cascade controller go
    through the compiled kernel in :mod:`coopmanip.simulation`.
    """
    if not dt > 0:
        raise ValueError(f"dt must be positive, got {dt}")
    f = _resolve_dynamics(dynamics)

    def deriv(y):
        st = State(*y)
        acc = f(st, controller(st), p)
        return np.array([y[1], acc.x_ddot, y[3], acc.alpha_ddot, y[5], acc.beta_ddot])

    y0 = s.as_array()
    try:
        k1 = deriv(y0)
        k2 = deriv(y0 + 0.5 * dt * k1)
        k3 = deriv(y0 + 0.5 * dt * k2)
        k4 = deriv(y0 + dt * k3)
    except InvariantError as exc:
        raise IntegrationDivergedError(f"non-finite stage state: {exc}") from exc
    y1 = y0 + dt / 6.0 * (k1 + 2 * k2 + 2 * k3 + k4)
    if not np.all(np.isfinite(y1)):
        raise IntegrationDivergedError("RK4 step produced a non-finite state")
    return State.from_array(y1)
