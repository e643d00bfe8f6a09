"""
Nonlinear reference governor.

Every ``sample_time`` the applied reference ``r_k = (x_ref, alpha_ref)`` moves
toward the desired one, ``r_{k+1} = r_k + c (r_des - r_k)``, with the largest
``c`` in ``[0, 1]`` for which holding ``r_{k+1}`` keeps the predicted closed
loop admissible over the horizon. Admissibility is decided by forward
simulation of the same model and controller as the plant; ``c`` is found by
bisection.
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass

import numpy as np

from .control import ControllerConfig
from .equilibria import attainable_alpha_range, controller_equilibrium_attitude
from .errors import InfeasibleReferenceError, InvariantError
from .model import ActuatorLimits, PhysicalParams, State
from .simulation import OK, STATUS_NAMES, Trajectory, _model_code, predict, run_segment

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class RgConfig:
    """Governor settings.

    ``settle_tol`` is the max-norm radius around the candidate equilibrium the
    predicted state must reach by the end of the horizon (0 disables the
    terminal check). The two ``enforce_*`` flags select the constraint set.
    """

    sample_time: float = 0.2
    horizon: float = 8.0
    bisection_tol: float = 2.0**-10
    max_bisection_iters: int = 12
    margin_mu: float = 0.05
    settle_tol: float = 0.05
    enforce_actuator_limits: bool = True
    enforce_alpha_range: bool = True

    def __post_init__(self):
        if not self.sample_time > 0:
            raise InvariantError("RgConfig.sample_time must be > 0")
        if not self.horizon > 0:
            raise InvariantError("RgConfig.horizon must be > 0")
        if not 0 < self.bisection_tol < 1:
            raise InvariantError("RgConfig.bisection_tol must lie in (0, 1)")
        if not self.max_bisection_iters >= 1:
            raise InvariantError("RgConfig.max_bisection_iters must be >= 1")
        if not self.margin_mu > 0:
            raise InvariantError("RgConfig.margin_mu must be > 0")
        if not self.settle_tol >= 0:
            raise InvariantError("RgConfig.settle_tol must be >= 0")


@dataclass(frozen=True)
class Reference:
    x_ref: float
    alpha_ref: float

    def blend(self, other: "Reference", c: float) -> "Reference":
        """Convex combination ``(1 - c) * self + c * other``."""
        if c == 1.0:
            return other
        if c == 0.0:
            return self
        return Reference(
            self.x_ref + c * (other.x_ref - self.x_ref),
            self.alpha_ref + c * (other.alpha_ref - self.alpha_ref),
        )

    def distance(self, other: "Reference") -> float:
        return math.hypot(self.x_ref - other.x_ref, self.alpha_ref - other.alpha_ref)

    def as_tuple(self) -> tuple[float, float]:
        return (self.x_ref, self.alpha_ref)


def alpha_band(p: PhysicalParams, lim: ActuatorLimits, rg: RgConfig) -> tuple[float, float]:
    """Admissible inclinations ``[alpha_min + mu, alpha_max - mu]``."""
    lo, hi = attainable_alpha_range(p, lim).shrink(rg.margin_mu)
    if lo > hi:
        raise InvariantError(f"margin_mu={rg.margin_mu} leaves no admissible inclination")
    return lo, hi


def constraints_ok(traj: Trajectory, p: PhysicalParams, lim: ActuatorLimits, rg: RgConfig) -> bool:
    """True when every sample respects the enabled constraints.

    Actuator limits are checked on the pre-clamp commands; the inclination
    must stay in :func:`alpha_band`.
    """
    return not np.any(violations(traj, p, lim, rg))


def violations(traj: Trajectory, p: PhysicalParams, lim: ActuatorLimits, rg: RgConfig) -> np.ndarray:
    """Boolean mask of samples that break an enabled constraint."""
    bad = np.zeros(len(traj), dtype=bool)
    if rg.enforce_actuator_limits:
        cmd = traj.commands
        bad |= (cmd[:, 0] < 0) | (cmd[:, 0] > lim.U_max)
        bad |= np.abs(cmd[:, 1]) > lim.T_max
        bad |= np.abs(cmd[:, 2]) > lim.F_max
    if rg.enforce_alpha_range:
        lo, hi = alpha_band(p, lim, rg)
        bad |= (traj.alpha < lo) | (traj.alpha > hi)
    return bad


class Predictor:
    """Admissibility oracle for holding a candidate reference from a given state."""

    def __init__(self, cfg: ControllerConfig, p: PhysicalParams, lim: ActuatorLimits, rg: RgConfig,
                 dt: float = 1e-3, dynamics_model="full"):
        self.cfg, self.p, self.lim, self.rg = cfg, p, lim, rg
        self.dt = dt
        self.n_steps = int(round(rg.horizon / dt))
        self.model = _model_code(dynamics_model)
        self.a_lo, self.a_hi = alpha_band(p, lim, rg)
        self._pv, self._lv, self._gv = p.as_array(), lim.as_array(), cfg.as_array()
        self._law = cfg.thrust_law.code
        self.evaluations = 0

    def status(self, y: np.ndarray, ref: Reference) -> int:
        self.evaluations += 1
        beta_eq = controller_equilibrium_attitude(ref.alpha_ref, self.cfg, self.p)
        return int(predict(
            y, self.n_steps, self.dt, float(ref.x_ref), float(ref.alpha_ref),
            self._pv, self._lv, self._gv, self._law, self.model,
            self.a_lo, self.a_hi, self.rg.enforce_actuator_limits, self.rg.enforce_alpha_range,
            self.rg.settle_tol, beta_eq,
        ))

    def admissible(self, y: np.ndarray, ref: Reference) -> bool:
        return self.status(y, ref) == OK


def _as_vector(s) -> np.ndarray:
    return s.as_array() if isinstance(s, State) else np.asarray(s, dtype=np.float64)


def rg_search(s, applied: Reference, desired: Reference, predictor: Predictor) -> float:
    """Largest admissible blend factor ``c`` (to ``bisection_tol``)."""
    y = _as_vector(s)
    if applied == desired:
        return 1.0
    if predictor.admissible(y, desired):
        return 1.0
    status = predictor.status(y, applied)
    if status != OK:
        raise InfeasibleReferenceError(
            f"holding the applied reference {applied} is not admissible: {STATUS_NAMES[status]}"
        )
    rg = predictor.rg
    lo, hi = 0.0, 1.0
    for _ in range(rg.max_bisection_iters):
        if hi - lo <= rg.bisection_tol:
            break
        mid = 0.5 * (lo + hi)
        if predictor.admissible(y, applied.blend(desired, mid)):
            lo = mid
        else:
            hi = mid
    return lo


def rg_step(
    s,
    applied: Reference,
    desired: Reference,
    cfg: ControllerConfig,
    p: PhysicalParams,
    lim: ActuatorLimits,
    rg: RgConfig,
    *,
    dt: float = 1e-3,
    dynamics_model="full",
    predictor: Predictor | None = None,
) -> Reference:
    """Next applied reference ``(1 - c*) applied + c* desired``."""
    predictor = predictor or Predictor(cfg, p, lim, rg, dt, dynamics_model)
    c = rg_search(s, applied, desired, predictor)
    return applied.blend(desired, c)


def rg_run(
    s0,
    initial_applied: Reference,
    desired: Reference,
    cfg: ControllerConfig,
    p: PhysicalParams,
    lim: ActuatorLimits,
    rg: RgConfig,
    total_time: float,
    *,
    dt: float = 1e-3,
    dynamics_model="full",
    prediction_dt: float | None = None,
) -> Trajectory:
    """Closed loop with the governor updating the reference every ``sample_time``.

    Predictions use step ``prediction_dt`` (default: the plant step ``dt``).
    The returned trajectory carries ``meta["rg"]``, a list of
    ``(t, c, applied)`` tuples, one per governor update.
    """
    per_sample = rg.sample_time / dt
    n_sub = int(round(per_sample))
    if n_sub < 1 or not math.isclose(per_sample, n_sub, rel_tol=1e-9):
        raise InvariantError(f"sample_time ({rg.sample_time}) must be a multiple of dt ({dt})")
    n_total = int(round(total_time / dt))
    predictor = Predictor(cfg, p, lim, rg, prediction_dt or dt, dynamics_model)
    y = _as_vector(s0)
    applied = initial_applied
    parts = []
    trace = []
    k = 0
    while k < n_total:
        t = k * dt
        try:
            c = rg_search(y, applied, desired, predictor)
        except InfeasibleReferenceError:
            if k == 0:
                raise
            log.warning("t=%.3f: applied reference no longer admissible, holding it", t)
            c = 0.0
        applied = applied.blend(desired, c)
        trace.append((t, c, applied))
        steps = min(n_sub, n_total - k)
        seg = run_segment(y, applied.as_tuple(), cfg, p, lim, dt, steps, dynamics_model, t0=t)
        y = seg.states[-1].copy()
        k += steps
        if k < n_total:
            seg = Trajectory(seg.t[:-1], seg.states[:-1], seg.inputs[:-1], seg.debug[:-1], seg.applied[:-1])
        parts.append(seg)
    traj = Trajectory.concatenate(parts)
    traj.meta["rg"] = trace
    traj.meta["predictions"] = predictor.evaluations
    return traj
