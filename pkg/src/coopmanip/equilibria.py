"""
Static equilibria reachable under the thrust limit.

At rest the cart force and UAV torque vanish and the bar is held by
``M g cos(alpha) = u1 sin(beta - alpha)``. With ``u1 <= U_max`` the
inclinations that can be held are those with ``M g |cos(alpha)| <= U_max``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .control import ControllerConfig, _theta_ref
from .errors import InfeasibleEquilibriumError, InvariantError, OutOfRangeError, SingularEquilibriumError
from .model import ActuatorLimits, ControlInput, PhysicalParams

# slack for arcsin/arccos arguments that overshoot 1 by rounding only
ROUND_SLACK = 1e-12


@dataclass(frozen=True)
class AlphaRange:
    alpha_min: float
    alpha_max: float

    def __post_init__(self):
        if not (0.0 <= self.alpha_min <= self.alpha_max <= math.pi):
            raise InvariantError(f"AlphaRange needs 0 <= min <= max <= pi, got {self}")
        if not math.isclose(self.alpha_min + self.alpha_max, math.pi, abs_tol=1e-12):
            raise InvariantError(f"AlphaRange must be symmetric about pi/2, got {self}")

    def shrink(self, mu: float) -> tuple[float, float]:
        """Interval ``[alpha_min + mu, alpha_max - mu]``."""
        return self.alpha_min + mu, self.alpha_max - mu

    def __contains__(self, alpha: float) -> bool:
        return self.alpha_min <= alpha <= self.alpha_max


@dataclass(frozen=True)
class BetaRange:
    beta_min: float
    beta_max: float

    def __post_init__(self):
        if not self.beta_min <= self.beta_max:
            raise InvariantError(f"BetaRange needs min <= max, got {self}")

    def __contains__(self, beta: float) -> bool:
        return self.beta_min <= beta <= self.beta_max


def _clip_unit(v: float) -> float:
    if abs(v) > 1.0 + ROUND_SLACK:
        raise OutOfRangeError(f"argument {v} outside [-1, 1]")
    return max(-1.0, min(1.0, v))


def attainable_alpha_range(p: PhysicalParams, lim: ActuatorLimits) -> AlphaRange:
    """Inclinations that can be held at rest with thrust at most ``U_max``."""
    weight = p.M * p.g
    if lim.U_max >= weight:
        return AlphaRange(0.0, math.pi)
    r = lim.U_max / weight
    # arccos(-r) == pi - arccos(r); the second form keeps the range exactly symmetric
    a_min = math.acos(r)
    return AlphaRange(a_min, math.pi - a_min)


def attainable_beta_range(alpha_bar: float, p: PhysicalParams, lim: ActuatorLimits) -> BetaRange:
    """Attitudes that hold ``alpha_bar`` at rest with ``0 <= u1 <= U_max``.

    For ``alpha_bar <= pi/2`` the bar needs an upward tangential push, so the
    relative attitude lies in ``[asin(k), pi - asin(k)]`` with
    ``k = M g cos(alpha_bar) / U_max``. Past the vertical the push reverses
    and the interval becomes ``[asin(-k) - pi, -asin(-k)]``.
    """
    rng = attainable_alpha_range(p, lim)
    if not (rng.alpha_min - ROUND_SLACK <= alpha_bar <= rng.alpha_max + ROUND_SLACK):
        raise OutOfRangeError(
            f"alpha_bar={alpha_bar} outside attainable range [{rng.alpha_min}, {rng.alpha_max}]"
        )
    k = _clip_unit(p.M * p.g * math.cos(alpha_bar) / lim.U_max)
    if alpha_bar <= 0.5 * math.pi:
        lo = math.asin(k)
        return BetaRange(alpha_bar + lo, alpha_bar + math.pi - lo)
    lo = math.asin(-k)
    return BetaRange(alpha_bar + lo - math.pi, alpha_bar - lo)


def steady_state_input(
    alpha_bar: float, beta_bar: float, p: PhysicalParams, lim: ActuatorLimits
) -> ControlInput:
    """Input holding the configuration ``(alpha_bar, beta_bar)`` at rest."""
    weight_arm = p.M * p.g * math.cos(alpha_bar)
    s = math.sin(beta_bar - alpha_bar)
    if abs(weight_arm) <= ROUND_SLACK * p.M * p.g:
        return ControlInput(0.0, 0.0, 0.0)
    if abs(s) <= ROUND_SLACK:
        raise SingularEquilibriumError(
            f"sin(beta_bar - alpha_bar) = 0 but the bar carries a load ({weight_arm:.6g} N)"
        )
    u1 = weight_arm / s
    tol = ROUND_SLACK * lim.U_max * 1e3
    if u1 < -tol or u1 > lim.U_max + tol:
        raise InfeasibleEquilibriumError(
            f"holding alpha={alpha_bar}, beta={beta_bar} needs u1={u1:.6g} outside [0, {lim.U_max}]"
        )
    return ControlInput(min(max(u1, 0.0), lim.U_max), 0.0, 0.0)


def controller_equilibrium_attitude(alpha_bar: float, cfg: ControllerConfig, p: PhysicalParams) -> float:
    """UAV attitude at which the cascade controller rests for reference ``alpha_bar``."""
    f_t = p.M * p.g * math.cos(alpha_bar)
    return alpha_bar + _theta_ref(f_t, cfg.outer.epsilon, cfg.outer.gamma)
