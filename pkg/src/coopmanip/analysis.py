"""
Numerical checks behind the stability argument of the cascade controller.

Nothing here certifies stability; each function evaluates a bound, a gain or
an admissibility test that can be compared against brute force.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from numba import njit
from scipy.integrate import simpson
from scipy.linalg import expm

from .control import (
    HALF_PI,
    ControllerConfig,
    OuterGains,
    _tangential_force,
    _theta_ref,
    _thrust_basic,
)
from .errors import InvariantError, NoSolutionError, ParameterizationMismatchError
from .model import ActuatorLimits, PhysicalParams, State, pos_sat


@dataclass(frozen=True)
class GainEstimates:
    gamma_in: float
    gamma_out: float
    theta_tilde_max: float

    def __post_init__(self):
        if not (self.gamma_in >= 0 and self.gamma_out >= 0):
            raise InvariantError("GainEstimates: gains must be non-negative")
        if not 0 < self.theta_tilde_max < HALF_PI:
            raise InvariantError("GainEstimates: theta_tilde_max must lie in (0, pi/2)")


@dataclass(frozen=True)
class LyapunovParams:
    """Damping ratio ``xi``, coupling fraction ``nu`` and attitude-error bound.

    ``omega`` only scales the matrix ``Q``; positive definiteness does not
    depend on it.
    """

    xi: float
    nu: float
    theta_tilde_max: float
    omega: float = 1.0

    def __post_init__(self):
        if not self.xi > 0:
            raise InvariantError("LyapunovParams.xi must be > 0")
        if not 0 < self.nu < 1:
            raise InvariantError("LyapunovParams.nu must lie in (0, 1)")
        if not 0 < self.theta_tilde_max < HALF_PI:
            raise InvariantError("LyapunovParams.theta_tilde_max must lie in (0, pi/2)")
        if not self.omega > 0:
            raise InvariantError("LyapunovParams.omega must be > 0")


# -- attitude-error disturbance ---------------------------------------------


@njit(cache=True)
def _u1_cos_theta_ref(f_t, epsilon, gamma):
    th = _theta_ref(f_t, epsilon, gamma)
    return _thrust_basic(f_t, th, epsilon, gamma) * math.cos(th)


@njit(cache=True)
def _delta_theta(f_t, theta_tilde, alpha, epsilon, gamma, weight):
    return (_u1_cos_theta_ref(f_t, epsilon, gamma) * math.sin(theta_tilde)
            - weight * math.cos(alpha) * (1.0 - math.cos(theta_tilde)))


@njit(cache=True)
def _u1_cos_theta_ref_many(f_t, epsilon, gamma):
    out = np.empty(f_t.shape[0])
    for i in range(f_t.shape[0]):
        out[i] = _u1_cos_theta_ref(f_t[i], epsilon, gamma)
    return out


@njit(cache=True)
def _delta_theta_many(f_t, theta_tilde, alpha, epsilon, gamma, weight):
    out = np.empty(f_t.shape[0])
    for i in range(f_t.shape[0]):
        out[i] = _delta_theta(f_t[i], theta_tilde[i], alpha[i], epsilon, gamma, weight)
    return out


def u1_cos_theta_ref(f_t, g: OuterGains):
    """Radial thrust component ``u1 cos(theta_ref)`` of the basic law (scalar or array)."""
    if np.ndim(f_t) == 0:
        return _u1_cos_theta_ref(float(f_t), g.epsilon, g.gamma)
    return _u1_cos_theta_ref_many(np.asarray(f_t, dtype=np.float64), g.epsilon, g.gamma)


def delta_theta(f_t, theta_tilde, alpha, g: OuterGains, p: PhysicalParams):
    """Disturbance ``u1 cos(th_ref) sin(e) - M g cos(alpha) (1 - cos(e))`` for attitude error ``e``.

    Accepts scalars or equal-length arrays.
    """
    weight = p.M * p.g
    if np.ndim(f_t) == 0 and np.ndim(theta_tilde) == 0 and np.ndim(alpha) == 0:
        return _delta_theta(float(f_t), float(theta_tilde), float(alpha), g.epsilon, g.gamma, weight)
    f_t, theta_tilde, alpha = (np.ascontiguousarray(a, dtype=np.float64)
                               for a in np.broadcast_arrays(f_t, theta_tilde, alpha))
    return _delta_theta_many(f_t.ravel(), theta_tilde.ravel(), alpha.ravel(),
                             g.epsilon, g.gamma, weight).reshape(f_t.shape)


def bound_constant(g: OuterGains) -> float:
    """Sharp bound on ``|u1 cos(theta_ref)|``, attained at ``f_t = 0``: ``1/(gamma*eps)``."""
    return 1.0 / (g.gamma * g.epsilon)


def bound_constant_sup(lim: ActuatorLimits) -> float:
    """Supremum of :func:`bound_constant` over all ``eps > 0`` (its ``eps -> 0`` limit)."""
    return 2.0 * lim.U_max / math.pi


def delta_theta_bound(theta_tilde, g: OuterGains, p: PhysicalParams, lim: ActuatorLimits):
    """Upper bound ``c |sin e| + M g |1 - cos e|`` with ``c = 1/(gamma*eps)``.

    ``lim`` is accepted for symmetry with :func:`bound_constant_sup`; the
    sharp constant already encodes ``U_max`` through ``gamma``.
    """
    e = np.asarray(theta_tilde, dtype=np.float64)
    out = bound_constant(g) * np.abs(np.sin(e)) + p.M * p.g * np.abs(1.0 - np.cos(e))
    return float(out) if out.ndim == 0 else out


def class_k_dominator(theta_tilde, g: OuterGains, p: PhysicalParams):
    """``c |e| + M g e^2``, a class-K-infinity function above :func:`delta_theta_bound`."""
    e = np.asarray(theta_tilde, dtype=np.float64)
    out = bound_constant(g) * np.abs(e) + p.M * p.g * e**2
    return float(out) if out.ndim == 0 else out


# -- Lyapunov feasibility ---------------------------------------------------


@dataclass(frozen=True)
class LyapunovCheck:
    """Verdicts of the outer-loop Lyapunov test.

    ``feasible`` is the closed-form inequality in ``(xi, nu, theta_tilde_max)``
    as printed (``lhs > rhs``); ``q_positive_definite`` comes from the leading
    principal minors of ``Q``. ``substituted_feasible`` is the determinant
    condition of ``Q`` rewritten in the same variables, which is exactly
    equivalent to positive definiteness.
    """

    feasible: bool
    lhs: float
    rhs: float
    q: np.ndarray
    minors: tuple[float, float]
    q_positive_definite: bool
    substituted_feasible: bool
    substituted_lhs: float
    substituted_rhs: float

    def __bool__(self) -> bool:
        return self.feasible


def lyapunov_q(lp: LyapunovParams) -> np.ndarray:
    """Matrix ``Q`` bounding ``-dV/dt`` for normalized gains ``k_p = w^2``, ``k_d = 2 xi w``."""
    w, c = lp.omega, math.cos(lp.theta_tilde_max)
    k_p, k_d = w * w, 2.0 * lp.xi * w
    eps = k_d * c * lp.nu
    r = 0.5 * (k_p + eps * k_d) * (1.0 - c)
    return np.array([[eps * k_p * c, r], [r, 2.0 * k_d * c - eps]])


def lyapunov_feasible(lp: LyapunovParams) -> LyapunovCheck:
    xi, nu = lp.xi, lp.nu
    c = math.cos(lp.theta_tilde_max)
    ratio = (1.0 - c) ** 2 / c**2
    lhs = 4.0 * xi**2 * nu**2
    rhs = 0.25 * (1.0 + 8.0 * nu * xi**2 + 16.0 * nu**2 * xi**4) * ratio
    # det(Q) / w^4 > 0 written out
    sub_lhs = 4.0 * xi**2 * c**3 * nu * (2.0 - nu)
    sub_rhs = 0.25 * (1.0 + 4.0 * xi**2 * c * nu) ** 2 * (1.0 - c) ** 2
    q = lyapunov_q(lp)
    m1 = float(q[0, 0])
    m2 = float(q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0])
    return LyapunovCheck(
        feasible=lhs > rhs,
        lhs=lhs,
        rhs=rhs,
        q=q,
        minors=(m1, m2),
        q_positive_definite=m1 > 0 and m2 > 0,
        substituted_feasible=sub_lhs > sub_rhs,
        substituted_lhs=sub_lhs,
        substituted_rhs=sub_rhs,
    )


# -- inner-loop l1 gain -----------------------------------------------------


def _inner_matrices(k_p_beta, k_d_beta, I_u):
    # state (beta_tilde, beta_dot), input d(beta_ref)/dt, output beta_tilde
    A = np.array([[0.0, 1.0], [-k_p_beta / I_u, -k_d_beta / I_u]])
    B = np.array([-1.0, 0.0])
    return A, B


def inner_gain_analytic(k_p_beta: float, k_d_beta: float, I_u: float) -> float:
    """l1 gain from ``d(beta_ref)/dt`` to ``beta_tilde`` for critically damped gains.

    With ``k_p/I_u = w^2`` and ``k_d/I_u = 2 w`` the impulse response is
    ``-(1 + w t) exp(-w t)``, whose absolute integral is ``2/w``.
    """
    if not (k_p_beta > 0 and k_d_beta > 0 and I_u > 0):
        raise ValueError("gains and inertia must be positive")
    if not math.isclose(k_d_beta**2, 4.0 * k_p_beta * I_u, rel_tol=1e-9):
        raise ParameterizationMismatchError(
            f"gains are not critically damped: k_d^2={k_d_beta**2:.6g} != 4 k_p I_u={4 * k_p_beta * I_u:.6g}"
        )
    omega = math.sqrt(k_p_beta / I_u)
    return 2.0 / omega


def critically_damped_gains(omega: float, I_u: float) -> tuple[float, float]:
    """``(k_p_beta, k_d_beta)`` with ``k_p/I_u = omega^2`` and ``k_d/I_u = 2 omega``."""
    return omega**2 * I_u, 2.0 * omega * I_u


def inner_impulse_response(k_p_beta, k_d_beta, I_u, horizon, dt):
    """Samples ``(t, h)`` of the inner-loop impulse response on ``[0, horizon]``."""
    A, B = _inner_matrices(k_p_beta, k_d_beta, I_u)
    n = int(math.ceil(horizon / dt))
    phi = expm(A * dt)
    h = np.empty(n + 1)
    z = B.copy()
    for k in range(n + 1):
        h[k] = z[0]
        z = phi @ z
    return dt * np.arange(n + 1), h


def inner_gain_numeric(k_p_beta: float, k_d_beta: float, I_u: float,
                       horizon: float | None = None, dt: float | None = None) -> float:
    """l1 norm of the inner-loop impulse response by quadrature.

    Defaults: horizon of 40 slowest time constants, ``2e5`` intervals.
    Warns when the estimated tail beyond the horizon exceeds ``1e-6`` of the
    accumulated integral.
    """
    if not (k_p_beta > 0 and k_d_beta > 0 and I_u > 0):
        raise ValueError("gains and inertia must be positive")
    A, _ = _inner_matrices(k_p_beta, k_d_beta, I_u)
    decay = float(np.min(-np.linalg.eigvals(A).real))
    if horizon is None:
        horizon = 40.0 / decay
    if dt is None:
        dt = horizon / 200_000
    t, h = inner_impulse_response(k_p_beta, k_d_beta, I_u, horizon, dt)
    total = float(simpson(np.abs(h), x=t))
    tail_window = np.abs(h[int(0.9 * len(h)):])
    tail = float(tail_window.max()) / decay * (1.0 + decay * (t[-1] - t[int(0.9 * len(h))]))
    if tail > 1e-6 * total:
        warnings.warn(f"impulse-response tail estimate {tail:.3e} exceeds 1e-6 of the integral "
                      f"{total:.6g}; increase the horizon", RuntimeWarning, stacklevel=2)
    return total


# -- small-gain admissibility -----------------------------------------------


def small_gain_admissible(s0: State, ge: GainEstimates) -> bool:
    """Initial-condition test of the small-gain argument.

    Requires ``gamma_in*gamma_out < 1`` and
    ``|(theta, theta_dot)| + gamma_in |(alpha, alpha_dot)| < (1 - gamma_in gamma_out) theta_tilde_max``.
    """
    loop = ge.gamma_in * ge.gamma_out
    if not loop < 1.0:
        return False
    theta = s0.beta - s0.alpha
    theta_dot = s0.beta_dot - s0.alpha_dot
    lhs = math.hypot(theta, theta_dot) + ge.gamma_in * math.hypot(s0.alpha, s0.alpha_dot)
    return lhs < (1.0 - loop) * abs(ge.theta_tilde_max)


@njit(cache=True)
def _outer_rates(alpha, alpha_dot, alpha_ref, beta_tilde, pv_M, pv_g, I_0, gv):
    k_p, k_d, eps, gam = gv[0], gv[1], gv[2], gv[3]
    f_t = _tangential_force(alpha, alpha_dot, alpha_ref, k_p, k_d, pv_M, pv_g)
    th = _theta_ref(f_t, eps, gam)
    u1 = _thrust_basic(f_t, th, eps, gam)
    add = (u1 * math.sin(th + beta_tilde) - pv_M * pv_g * math.cos(alpha)) / I_0
    return add, f_t


@njit(cache=True)
def _outer_loop_gain(alpha_ref, amps, freqs, phases, n_steps, dt, M, g, I_0, gv):
    """Ratio of late-time ``sup |d(beta_ref)/dt|`` to ``sup |beta_tilde|`` for one input signal."""
    k_p, k_d, eps, gam = gv[0], gv[1], gv[2], gv[3]
    a, ad = alpha_ref, 0.0
    sup_in = 0.0
    sup_out = 0.0
    half = n_steps // 2
    for k in range(n_steps + 1):
        t = k * dt
        e = 0.0
        for j in range(amps.shape[0]):
            e += amps[j] * math.sin(freqs[j] * t + phases[j])
        sup_in = max(sup_in, abs(e))
        add, f_t = _outer_rates(a, ad, alpha_ref, e, M, g, I_0, gv)
        if k >= half:
            raw = gam * math.atan(eps * f_t)
            if abs(raw) < HALF_PI:
                f_dot = -k_p * ad - k_d * add - M * g * math.sin(a) * ad
                th_dot = gam * eps * f_dot / (1.0 + (eps * f_t) ** 2)
            else:
                th_dot = 0.0
            sup_out = max(sup_out, abs(th_dot + ad))
        if k == n_steps:
            break
        # RK4 on (alpha, alpha_dot) with the input sampled at stage times
        k1a, k1v = ad, add
        e2 = 0.0
        for j in range(amps.shape[0]):
            e2 += amps[j] * math.sin(freqs[j] * (t + 0.5 * dt) + phases[j])
        k2v, _ = _outer_rates(a + 0.5 * dt * k1a, ad + 0.5 * dt * k1v, alpha_ref, e2, M, g, I_0, gv)
        k2a = ad + 0.5 * dt * k1v
        k3v, _ = _outer_rates(a + 0.5 * dt * k2a, ad + 0.5 * dt * k2v, alpha_ref, e2, M, g, I_0, gv)
        k3a = ad + 0.5 * dt * k2v
        e4 = 0.0
        for j in range(amps.shape[0]):
            e4 += amps[j] * math.sin(freqs[j] * (t + dt) + phases[j])
        k4v, _ = _outer_rates(a + dt * k3a, ad + dt * k3v, alpha_ref, e4, M, g, I_0, gv)
        k4a = ad + dt * k3v
        a += dt / 6.0 * (k1a + 2 * k2a + 2 * k3a + k4a)
        ad += dt / 6.0 * (k1v + 2 * k2v + 2 * k3v + k4v)
    if sup_in == 0.0:
        return 0.0
    return sup_out / sup_in


def gamma_out_samples(cfg: ControllerConfig, p: PhysicalParams, lim: ActuatorLimits,
                      sample_count: int, *, alpha_ref: float = 0.5 * math.pi,
                      theta_tilde_max: float = 0.5, horizon: float = 20.0, dt: float = 1e-2,
                      seed: int = 0, n_tones: int = 3, zero_input: bool = False) -> np.ndarray:
    """Per-sample gain ratios used by :func:`estimate_gamma_out`.

    Sample ``i`` draws its input from ``default_rng([seed, i])`` so a larger
    ``sample_count`` always contains the smaller sample set.
    """
    if sample_count < 1:
        raise ValueError("sample_count must be >= 1")
    o = cfg.outer
    gv = np.array([o.k_p_alpha, o.k_d_alpha, o.epsilon, o.gamma])
    n_steps = int(round(horizon / dt))
    out = np.empty(sample_count)
    for i in range(sample_count):
        rng = np.random.default_rng([seed, i])
        weights = rng.uniform(0.2, 1.0, n_tones)
        amps = weights / weights.sum() * rng.uniform(0.05, 1.0) * theta_tilde_max
        if zero_input:
            amps[:] = 0.0
        freqs = rng.uniform(0.2, 20.0, n_tones)
        phases = rng.uniform(0.0, 2 * math.pi, n_tones)
        out[i] = _outer_loop_gain(alpha_ref, amps, freqs, phases, n_steps, dt, p.M, p.g, p.I_0, gv)
    return out


def estimate_gamma_out(cfg: ControllerConfig, p: PhysicalParams, lim: ActuatorLimits,
                       sample_count: int, **kwargs) -> float:
    """Empirical (not certified) asymptotic gain from attitude error to ``d(beta_ref)/dt``.

    The outer loop with the basic thrust law is driven from rest at
    ``alpha_ref`` by random multi-tone attitude errors bounded by
    ``theta_tilde_max``; the estimate is the largest ratio between the
    late-time peak of ``d(beta_ref)/dt`` and the input peak.
    """
    return float(np.max(gamma_out_samples(cfg, p, lim, sample_count, **kwargs)))


# -- fictitious attitude error ----------------------------------------------


def fictitious_error(f_t: float, theta_ref: float, theta_actual: float, lim: ActuatorLimits) -> float:
    """Attitude error that, under the basic law, delivers the improved law's force.

    Solves ``f_t sin(theta_ref + e) / sin(theta_ref) = pos_sat(f_t / sin(theta), U_max) sin(theta)``
    for the root ``e`` of smallest magnitude. ``theta_ref`` must be the
    reference attitude generated for ``f_t``.
    """
    if abs(f_t) > lim.U_max * (1 + 1e-12):
        raise ValueError(f"|f_t| = {abs(f_t)} exceeds U_max = {lim.U_max}")
    if abs(theta_ref) > HALF_PI * (1 + 1e-12):
        raise ValueError(f"|theta_ref| = {abs(theta_ref)} exceeds pi/2")
    s_ref = math.sin(theta_ref)
    if f_t == 0.0 or s_ref == 0.0:
        return 0.0
    s = math.sin(theta_actual)
    if s == 0.0:
        delivered = 0.0
    else:
        quotient = f_t / s
        if 0.0 <= quotient <= lim.U_max:
            return 0.0  # saturation inactive: both laws deliver f_t
        delivered = pos_sat(quotient, lim.U_max) * s
    rho = delivered * s_ref / f_t
    if abs(rho) > 1.0 + 1e-12:
        raise NoSolutionError(f"no attitude error reproduces the delivered force (ratio {rho})")
    base = math.asin(max(-1.0, min(1.0, rho)))
    candidates = (base - theta_ref, math.pi - base - theta_ref, -math.pi - base - theta_ref)
    return min(candidates, key=abs)
