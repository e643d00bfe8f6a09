"""
Closed-loop simulation: compiled RK4 kernels and the ``Trajectory`` container.

The kernels integrate the 6-state model under the cascade controller with
fixed references, re-evaluating the controller at every RK4 stage. They come
in two flavours: ``integrate`` records every sample, ``predict`` only
reports whether the run stays admissible (used by the reference governor).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np
from numba import njit

from .control import ControlDebug, ControllerConfig, cascade
from .errors import IntegrationDivergedError
from .model import DYNAMICS_MODELS, ActuatorLimits, ControlInput, PhysicalParams, State, accel

# status codes returned by ``predict``
OK = 0
ACTUATOR_VIOLATION = 1
ALPHA_VIOLATION = 2
NOT_SETTLED = 3
DIVERGED = 4

STATUS_NAMES = {
    OK: "ok",
    ACTUATOR_VIOLATION: "actuator limits violated",
    ALPHA_VIOLATION: "inclination left the admissible band",
    NOT_SETTLED: "not settled at horizon end",
    DIVERGED: "integration diverged",
}


@njit(cache=True)
def _deriv(x, xd, a, ad, b, bd, x_ref, a_ref, pv, lv, gv, law, model):
    c = cascade(x, xd, a, ad, b, bd, x_ref, a_ref, pv, lv, gv, law)
    xdd, add, bdd, _ = accel(model, xd, a, ad, b, c[0], c[1], c[2], pv)
    return xd, xdd, ad, add, bd, bdd


@njit(cache=True)
def rk4(y, dt, x_ref, a_ref, pv, lv, gv, law, model):
    """One RK4 step from the state tuple ``y``; the controller runs at every stage."""
    x, xd, a, ad, b, bd = y
    h = 0.5 * dt
    k1 = _deriv(x, xd, a, ad, b, bd, x_ref, a_ref, pv, lv, gv, law, model)
    k2 = _deriv(x + h * k1[0], xd + h * k1[1], a + h * k1[2], ad + h * k1[3], b + h * k1[4], bd + h * k1[5],
                x_ref, a_ref, pv, lv, gv, law, model)
    k3 = _deriv(x + h * k2[0], xd + h * k2[1], a + h * k2[2], ad + h * k2[3], b + h * k2[4], bd + h * k2[5],
                x_ref, a_ref, pv, lv, gv, law, model)
    k4 = _deriv(x + dt * k3[0], xd + dt * k3[1], a + dt * k3[2], ad + dt * k3[3], b + dt * k3[4],
                bd + dt * k3[5], x_ref, a_ref, pv, lv, gv, law, model)
    w = dt / 6.0
    return (
        x + w * (k1[0] + 2.0 * k2[0] + 2.0 * k3[0] + k4[0]),
        xd + w * (k1[1] + 2.0 * k2[1] + 2.0 * k3[1] + k4[1]),
        a + w * (k1[2] + 2.0 * k2[2] + 2.0 * k3[2] + k4[2]),
        ad + w * (k1[3] + 2.0 * k2[3] + 2.0 * k3[3] + k4[3]),
        b + w * (k1[4] + 2.0 * k2[4] + 2.0 * k3[4] + k4[4]),
        bd + w * (k1[5] + 2.0 * k2[5] + 2.0 * k3[5] + k4[5]),
    )


@njit(cache=True)
def _finite(y):
    for v in y:
        if not math.isfinite(v):
            return False
    return True


@njit(cache=True)
def integrate(y0, n_steps, dt, x_ref, a_ref, pv, lv, gv, law, model):
    """Run ``n_steps`` RK4 steps, logging state, inputs and controller internals.

    Returns ``(states, inputs, debug, n_valid)``; ``debug`` columns are
    ``u1_cmd, u2_cmd, u3_cmd, f_t, theta_ref, beta_ref``. ``n_valid`` is the
    number of finite samples (``n_steps + 1`` unless the run diverged).
    """
    states = np.empty((n_steps + 1, 6))
    inputs = np.empty((n_steps + 1, 3))
    debug = np.empty((n_steps + 1, 6))
    y = (y0[0], y0[1], y0[2], y0[3], y0[4], y0[5])
    for k in range(n_steps + 1):
        if not _finite(y):
            return states, inputs, debug, k
        for j in range(6):
            states[k, j] = y[j]
        c = cascade(y[0], y[1], y[2], y[3], y[4], y[5], x_ref, a_ref, pv, lv, gv, law)
        for j in range(3):
            inputs[k, j] = c[j]
        for j in range(6):
            debug[k, j] = c[3 + j]
        if k < n_steps:
            y = rk4(y, dt, x_ref, a_ref, pv, lv, gv, law, model)
    return states, inputs, debug, n_steps + 1


@njit(cache=True)
def integrate_open_loop(y0, n_steps, dt, u, pv, model):
    """RK4 under a constant input ``u = (u1, u2, u3)``; returns the state history."""
    states = np.empty((n_steps + 1, 6))
    y = y0.copy()
    states[0] = y
    ks = np.empty((4, 6))
    for k in range(n_steps):
        for stage in range(4):
            if stage == 0:
                z = y
            elif stage == 3:
                z = y + dt * ks[2]
            else:
                z = y + 0.5 * dt * ks[stage - 1]
            xdd, add, bdd, _ = accel(model, z[1], z[2], z[3], z[4], u[0], u[1], u[2], pv)
            ks[stage, 0] = z[1]
            ks[stage, 1] = xdd
            ks[stage, 2] = z[3]
            ks[stage, 3] = add
            ks[stage, 4] = z[5]
            ks[stage, 5] = bdd
        y = y + (dt / 6.0) * (ks[0] + 2.0 * ks[1] + 2.0 * ks[2] + ks[3])
        states[k + 1] = y
    return states


@njit(cache=True)
def _admissible(alpha, c, lv, a_lo, a_hi, check_act, check_alpha):
    if check_act:
        if c[3] < 0.0 or c[3] > lv[0] or abs(c[4]) > lv[1] or abs(c[5]) > lv[2]:
            return ACTUATOR_VIOLATION
    if check_alpha:
        if alpha < a_lo or alpha > a_hi:
            return ALPHA_VIOLATION
    return OK


@njit(cache=True)
def predict(y0, n_steps, dt, x_ref, a_ref, pv, lv, gv, law, model,
            a_lo, a_hi, check_act, check_alpha, settle_tol, beta_eq):
    """Simulate with constant references and stop at the first violation.

    Every sample (including the initial one) is checked against the actuator
    box on the pre-clamp commands and against ``a_lo <= alpha <= a_hi``. If
    ``settle_tol > 0`` the final state must also lie within ``settle_tol``
    (max-norm) of the equilibrium ``(x_ref, 0, a_ref, 0, beta_eq, 0)``.
    """
    y = (y0[0], y0[1], y0[2], y0[3], y0[4], y0[5])
    for k in range(n_steps + 1):
        if not _finite(y):
            return DIVERGED
        c = cascade(y[0], y[1], y[2], y[3], y[4], y[5], x_ref, a_ref, pv, lv, gv, law)
        status = _admissible(y[2], c, lv, a_lo, a_hi, check_act, check_alpha)
        if status != OK:
            return status
        if k < n_steps:
            y = rk4(y, dt, x_ref, a_ref, pv, lv, gv, law, model)
    if settle_tol > 0.0:
        err = max(abs(y[0] - x_ref), abs(y[1]), abs(y[2] - a_ref), abs(y[3]),
                  abs(y[4] - beta_eq), abs(y[5]))
        if err > settle_tol:
            return NOT_SETTLED
    return OK


class Sample(NamedTuple):
    t: float
    state: State
    input: ControlInput
    debug: ControlDebug
    applied: tuple[float, float]


@dataclass
class Trajectory:
    """Uniformly sampled closed-loop run, stored column-wise.

    ``debug`` columns: ``u1_cmd, u2_cmd, u3_cmd, f_t, theta_ref, beta_ref``.
    ``applied`` columns: ``x_ref, alpha_ref`` in force at each sample.
    """

    t: np.ndarray
    states: np.ndarray
    inputs: np.ndarray
    debug: np.ndarray
    applied: np.ndarray
    meta: dict = field(default_factory=dict)

    def __len__(self) -> int:
        return len(self.t)

    def __getitem__(self, i: int) -> Sample:
        d = self.debug[i]
        return Sample(
            float(self.t[i]),
            State.from_array(self.states[i]),
            ControlInput(*(float(v) for v in self.inputs[i])),
            ControlDebug(float(d[3]), float(d[4]), float(d[5]), float(d[0]), float(d[1]), float(d[2])),
            (float(self.applied[i, 0]), float(self.applied[i, 1])),
        )

    @classmethod
    def empty(cls) -> "Trajectory":
        return cls(np.empty(0), np.empty((0, 6)), np.empty((0, 3)), np.empty((0, 6)), np.empty((0, 2)))

    @classmethod
    def concatenate(cls, parts: list["Trajectory"]) -> "Trajectory":
        if not parts:
            return cls.empty()
        return cls(*(np.concatenate([getattr(p, f) for p in parts])
                      for f in ("t", "states", "inputs", "debug", "applied")))

    # convenience columns
    @property
    def x(self):
        return self.states[:, 0]

    @property
    def alpha(self):
        return self.states[:, 2]

    @property
    def beta(self):
        return self.states[:, 4]

    @property
    def theta(self):
        return self.states[:, 4] - self.states[:, 2]

    @property
    def commands(self):
        return self.debug[:, :3]


def _model_code(dynamics_model) -> int:
    return DYNAMICS_MODELS[getattr(dynamics_model, "value", dynamics_model)]


def run_segment(
    s0: State | np.ndarray,
    refs: tuple[float, float],
    cfg: ControllerConfig,
    p: PhysicalParams,
    lim: ActuatorLimits,
    dt: float,
    n_steps: int,
    dynamics_model="full",
    t0: float = 0.0,
) -> Trajectory:
    """Closed loop with constant references for ``n_steps`` steps (``n_steps + 1`` samples)."""
    y0 = s0.as_array() if isinstance(s0, State) else np.asarray(s0, dtype=np.float64)
    x_ref, a_ref = float(refs[0]), float(refs[1])
    states, inputs, debug, n_valid = integrate(
        y0, int(n_steps), float(dt), x_ref, a_ref,
        p.as_array(), lim.as_array(), cfg.as_array(), cfg.thrust_law.code, _model_code(dynamics_model),
    )
    if n_valid < n_steps + 1:
        last = t0 + (n_valid - 1) * dt
        raise IntegrationDivergedError(f"state became non-finite after t = {last:.6g} s", last_time=last)
    t = t0 + dt * np.arange(n_steps + 1)
    applied = np.tile([x_ref, a_ref], (n_steps + 1, 1))
    return Trajectory(t, states, inputs, debug, applied)


def closed_loop(s0, refs, cfg, p, lim, dt, duration, dynamics_model="full") -> Trajectory:
    n_steps = int(round(duration / dt))
    return run_segment(s0, refs, cfg, p, lim, dt, n_steps, dynamics_model)


def accelerations(traj: Trajectory, p: PhysicalParams, dynamics_model="full") -> np.ndarray:
    """Generalized accelerations at each sample, shape ``(N, 3)``."""
    model = _model_code(dynamics_model)
    pv = p.as_array()
    out = np.empty((len(traj), 3))
    for k, (y, u) in enumerate(zip(traj.states, traj.inputs)):
        out[k] = accel(model, y[1], y[2], y[3], y[4], u[0], u[1], u[2], pv)[:3]
    return out
