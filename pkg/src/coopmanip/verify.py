"""
Acceptance checks, grouped into suites and runnable from the CLI.

Each ``criterion_N`` function builds its own scenarios and simulations and
returns a :class:`CriterionResult` carrying the verdict and the measured
values. Runtime limits are measured after a short warm-up run so that JIT
compilation is not counted.
"""

from __future__ import annotations

import dataclasses
import math
import time
from dataclasses import dataclass
from typing import Callable

import numpy as np

from .analysis import (
    LyapunovParams,
    bound_constant,
    critically_damped_gains,
    delta_theta,
    delta_theta_bound,
    fictitious_error,
    inner_gain_numeric,
    lyapunov_feasible,
    u1_cos_theta_ref,
)
from .control import ControllerConfig, OuterGains, UgvGains, theta_ref
from .equilibria import attainable_alpha_range, controller_equilibrium_attitude, steady_state_input
from .errors import CoopManipError
from .model import FULL, State, energy_series
from .refgov import Predictor, Reference, RgConfig, rg_run, rg_search, violations
from .scenario import Scenario, load_scenario, simulate
from .simulation import accelerations, closed_loop, integrate_open_loop

SUITES = {
    "model": (6, 7, 9),
    "control": (1, 8),
    "analysis": (3, 4, 5, 11),
    "rg": (2, 10),
}
SUITES["all"] = tuple(sorted(n for ns in SUITES.values() for n in ns))


@dataclass
class CriterionResult:
    number: int
    title: str
    passed: bool
    measured: str
    details: dict = dataclasses.field(default_factory=dict)

    def line(self) -> str:
        tag = "PASS" if self.passed else "FAIL"
        return f"[{tag}] criterion {self.number:>2}: {self.title}: {self.measured}"


def _warm_up(sc: Scenario) -> None:
    closed_loop(sc.initial_state, sc.desired.as_tuple(), sc.controller, sc.params, sc.limits,
                sc.dt, 10 * sc.dt, sc.dynamics_model)


# -- scenarios ---------------------------------------------------------------


def criterion_1() -> CriterionResult:
    """paper-fig3 converges to (x, alpha) = (0.3, pi/2) with non-negative thrust, in under 5 s."""
    sc = load_scenario("paper-fig3")
    _warm_up(sc)
    t0 = time.perf_counter()
    tr = simulate(sc)
    runtime = time.perf_counter() - t0
    late = tr.t >= 25.0
    a_err = float(np.max(np.abs(tr.alpha[late] - math.pi / 2)))
    x_err = float(np.max(np.abs(tr.x[late] - 0.3)))
    u1_min = float(np.min(tr.inputs[:, 0]))
    ok = a_err < 0.01 and x_err < 0.005 and u1_min >= 0.0 and runtime < 5.0
    return CriterionResult(
        1, "paper-fig3 convergence", ok,
        f"max|alpha-pi/2|(t>=25)={a_err:.3e} max|x-0.3|(t>=25)={x_err:.3e} "
        f"min u1={u1_min:.4f} runtime={runtime:.2f}s",
        dict(alpha_err=a_err, x_err=x_err, u1_min=u1_min, runtime=runtime),
    )


def criterion_2() -> CriterionResult:
    """paper-fig4: falls to pi without the governor, converges without violations with it."""
    sc = load_scenario("paper-fig4")
    _warm_up(sc)
    t0 = time.perf_counter()
    open_tr = simulate(sc.without_rg())
    rg_tr = simulate(sc)
    runtime = time.perf_counter() - t0
    a_lo, a_hi = attainable_alpha_range(sc.params, sc.limits).shrink(sc.rg.margin_mu)
    early = open_tr.t < 30.0
    exceeds = bool(np.any(open_tr.alpha[early] > a_hi))
    dist_pi = float(np.min(np.abs(open_tr.alpha[early] - math.pi)))
    late = rg_tr.t >= 40.0
    a_err = float(np.max(np.abs(rg_tr.alpha[late] - sc.desired.alpha_ref)))
    n_viol = int(np.sum(violations(rg_tr, sc.params, sc.limits, sc.rg)))
    ok = exceeds and dist_pi < 0.05 and a_err < 0.01 and n_viol == 0 and runtime < 30.0
    return CriterionResult(
        2, "paper-fig4 with and without governor", ok,
        f"no RG: max alpha(t<30)={open_tr.alpha[early].max():.4f} (band top {a_hi:.4f}), "
        f"min|alpha-pi|={dist_pi:.2e}; RG: max|alpha-2pi/3|(t>=40)={a_err:.2e} "
        f"violations={n_viol} predictions={rg_tr.meta['predictions']} runtime={runtime:.2f}s",
        dict(exceeds=exceeds, dist_pi=dist_pi, alpha_err=a_err, violations=n_viol, runtime=runtime),
    )


# -- analysis ----------------------------------------------------------------


def criterion_3() -> CriterionResult:
    """Numeric inner-loop l1 gain against the closed form 1/omega."""
    sc = load_scenario("paper-fig3")
    I_u = sc.params.I_u
    errs = {}
    for omega in (1.0, 5.0, 20.0):
        k_p, k_d = critically_damped_gains(omega, I_u)
        numeric = inner_gain_numeric(k_p, k_d, I_u)
        errs[omega] = (numeric, abs(numeric - 1.0 / omega) * omega)
    worst = max(e for _, e in errs.values())
    ok = worst < 1e-6
    text = " ".join(f"w={w:g}: numeric={n:.9f} vs 1/w={1 / w:.9f}" for w, (n, _) in errs.items())
    return CriterionResult(3, "inner-loop gain equals 1/omega", ok,
                           f"{text}; max rel err={worst:.3e}", dict(errors=errs, worst=worst))


def criterion_4(n_grid: int = 10**6, n_random: int = 10**6, seed: int = 4) -> CriterionResult:
    """Sharp bound on |u1 cos(theta_ref)| and the attitude-error disturbance bound."""
    sc = load_scenario("paper-fig3")
    p, lim = sc.params, sc.limits
    rng = np.random.default_rng(seed)
    rows, ok = [], True
    for eps in (0.01, 1.0, 100.0):
        g = OuterGains.tuned(20.0, 5.0, eps, lim.U_max)
        f_grid = np.linspace(-2.0 * lim.U_max, 2.0 * lim.U_max, n_grid)
        peak = float(np.max(np.abs(u1_cos_theta_ref(f_grid, g))))
        c = bound_constant(g)
        peak_ok = abs(peak - c) <= 1e-6
        # f_t spread over [-10 U, 10 U] plus far saturated tails
        n_tail = n_random // 10
        f_t = np.concatenate([
            rng.uniform(-10 * lim.U_max, 10 * lim.U_max, n_random - 2 * n_tail),
            rng.choice([-1.0, 1.0], n_tail) * rng.uniform(10 * lim.U_max, 1e6, n_tail),
            rng.uniform(-1e-6, 1e-6, n_tail),
        ])
        e = rng.uniform(-math.pi / 2, math.pi / 2, n_random)
        a = rng.uniform(0.0, math.pi, n_random)
        excess = np.abs(delta_theta(f_t, e, a, g, p)) - delta_theta_bound(e, g, p, lim)
        n_viol = int(np.sum(excess > 0))
        ok &= peak_ok and n_viol == 0
        rows.append((eps, peak, c, n_viol, float(excess.max())))
    text = "; ".join(f"eps={e:g}: max|u1 cos|={pk:.9f} vs 1/(gamma eps)={c:.9f}, violations={v}"
                     for e, pk, c, v, _ in rows)
    return CriterionResult(4, "attitude-error disturbance bound", ok, text, dict(rows=rows))


def criterion_5(n: int = 10**5, seed: int = 5) -> CriterionResult:
    """Fictitious error never exceeds the actual attitude error."""
    sc = load_scenario("paper-fig4")
    lim = sc.limits
    g = sc.controller.outer
    rng = np.random.default_rng(seed)
    f_t = rng.uniform(-lim.U_max, lim.U_max, n)
    theta = rng.uniform(-math.pi, math.pi, n)
    n_viol, worst = 0, -math.inf
    for ft, th in zip(f_t, theta):
        th_ref = theta_ref(ft, g)
        tf = fictitious_error(ft, th_ref, th, lim)
        margin = abs(tf) - abs(th - th_ref)
        worst = max(worst, margin)
        n_viol += margin > 0
    ok = n_viol == 0
    return CriterionResult(5, "fictitious error smaller than attitude error", ok,
                           f"samples={n} violations={n_viol} max(|tf|-|te|)={worst:.3e}",
                           dict(violations=n_viol, worst=worst))


def criterion_11(shape=(25, 20, 20)) -> CriterionResult:
    """Closed-form Lyapunov inequality against positive definiteness of Q."""
    xis = np.linspace(0.1, 3.0, shape[0])
    nus = np.linspace(0.025, 0.975, shape[1])
    ths = np.linspace(0.05, 1.5, shape[2])
    total = agree = agree_sub = 0
    mismatch = []
    for xi in xis:
        for nu in nus:
            for th in ths:
                chk = lyapunov_feasible(LyapunovParams(float(xi), float(nu), float(th)))
                total += 1
                if chk.feasible == chk.q_positive_definite:
                    agree += 1
                elif len(mismatch) < 5:
                    mismatch.append((float(xi), float(nu), float(th), chk.feasible, chk.q_positive_definite))
                agree_sub += chk.substituted_feasible == chk.q_positive_definite
    ok = agree == total
    return CriterionResult(
        11, "Lyapunov inequality matches Q > 0", ok,
        f"grid={total} agree={agree} disagree={total - agree}; "
        f"determinant form agrees on {agree_sub}/{total}",
        dict(total=total, agree=agree, agree_substituted=agree_sub, examples=mismatch),
    )


# -- model -------------------------------------------------------------------


def criterion_6() -> CriterionResult:
    """Unforced full dynamics conserve energy under RK4 with dt = 1e-4."""
    sc = load_scenario("paper-fig3")
    p = sc.params
    y0 = np.array([0.0, 0.2, math.pi / 3, 0.5, math.pi / 4, 1.0])
    states = integrate_open_loop(y0, 50_000, 1e-4, np.zeros(3), p.as_array(), FULL)
    e = energy_series(states, p)
    drift = float(np.max(np.abs(e - e[0])) / abs(e[0]))
    return CriterionResult(6, "energy conservation", drift < 1e-6,
                           f"relative drift over 5 s={drift:.3e} (E0={e[0]:.6f} J)", dict(drift=drift))


def criterion_7() -> CriterionResult:
    """Heavy cart: full and simplified closed loops agree in alpha."""
    sc = load_scenario("paper-fig3")
    p = sc.params.replace(m_c=100 * sc.params.m_c)
    runs = [closed_loop(sc.initial_state, sc.desired.as_tuple(), sc.controller, p, sc.limits,
                        sc.dt, 5.0, model) for model in ("full", "simplified")]
    diff = float(np.max(np.abs(runs[0].alpha - runs[1].alpha)))
    return CriterionResult(7, "model reduction with 100x cart mass", diff < 1e-3,
                           f"max|alpha_full-alpha_simplified|={diff:.3e} rad", dict(diff=diff))


def criterion_9(n_alpha: int = 1000, epsilons=(0.01, 0.1, 1.0, 10.0, 100.0)) -> CriterionResult:
    """Attainable inclinations and steady-state thrust within [0, U_max]."""
    sc = load_scenario("paper-fig3")
    p, lim = sc.params, sc.limits
    rng_ = attainable_alpha_range(p, lim)
    expected = math.acos(lim.U_max / (p.M * p.g))
    range_err = max(abs(rng_.alpha_min - expected), abs(rng_.alpha_max - (math.pi - expected)))
    n_viol = 0
    for eps in epsilons:
        cfg = dataclasses.replace(sc.controller, outer=OuterGains.tuned(20.0, 5.0, eps, lim.U_max))
        for a in np.linspace(rng_.alpha_min, rng_.alpha_max, n_alpha):
            b = controller_equilibrium_attitude(float(a), cfg, p)
            try:
                u1 = steady_state_input(float(a), b, p, lim).u1
            except CoopManipError:
                n_viol += 1
                continue
            n_viol += not (0.0 <= u1 <= lim.U_max)
    ok = range_err <= 1e-12 and n_viol == 0
    return CriterionResult(
        9, "attainable equilibria", ok,
        f"range=[{rng_.alpha_min:.12f}, {rng_.alpha_max:.12f}] err={range_err:.1e}; "
        f"steady-state sweep {n_alpha}x{len(epsilons)} violations={n_viol}",
        dict(range_err=range_err, violations=n_viol),
    )


# -- control -----------------------------------------------------------------


def _ugv_invariant_holds(ugv: UgvGains) -> bool:
    return ugv.lambda_2 < 0.5 * ugv.lambda_1 * ugv.k_d_x


def criterion_8(cfg: ControllerConfig | None = None, n: int = 100, seed: int = 8) -> CriterionResult:
    """Cart loop: bounded, vanishing acceleration and convergence from random states."""
    sc = load_scenario("paper-fig3")
    cfg = cfg or sc.controller
    p, lim = sc.params, sc.limits
    x_ref = sc.desired.x_ref
    rng = np.random.default_rng(seed)
    acc_bound = cfg.ugv.lambda_1 / p.m_c
    worst_acc = worst_late = worst_x = 0.0
    for _ in range(n):
        alpha = rng.uniform(0.9, 2.2)
        s0 = State(rng.uniform(-2, 2), rng.uniform(-1, 1), alpha, rng.uniform(-0.5, 0.5),
                   alpha + rng.uniform(-0.3, 0.3), 0.0)
        tr = closed_loop(s0, sc.desired.as_tuple(), cfg, p, lim, sc.dt, 40.0, "simplified")
        xdd = np.abs(accelerations(tr, p, "simplified")[:, 0])
        worst_acc = max(worst_acc, float(xdd.max()))
        worst_late = max(worst_late, float(xdd[tr.t > 30.0].max()))
        worst_x = max(worst_x, abs(float(tr.x[-1]) - x_ref))
    gate = _ugv_invariant_holds(cfg.ugv)
    ok = gate and worst_acc <= acc_bound + 1e-9 and worst_late < 1e-4 and worst_x < 1e-3
    return CriterionResult(
        8, "cart loop properties", ok,
        f"gain condition {'holds' if gate else 'VIOLATED'}; max|xdd|={worst_acc:.4f} "
        f"(bound {acc_bound:.4f}) max|xdd|(t>30)={worst_late:.2e} max|x_end-x_ref|={worst_x:.2e}",
        dict(gate=gate, worst_acc=worst_acc, worst_late=worst_late, worst_x=worst_x),
    )


# -- reference governor ------------------------------------------------------


def scan_oracle(y, applied: Reference, desired: Reference, predictor: Predictor, n: int = 1000) -> float:
    """Largest grid blend factor whose preceding grid points are all admissible."""
    grid = np.linspace(0.0, 1.0, n)
    best = 0.0
    for c in grid:
        if not predictor.admissible(y, applied.blend(desired, float(c))):
            break
        best = float(c)
    return best


def rg_instances(n: int, predictor: Predictor, cfg: ControllerConfig, seed: int = 10):
    """Random ``(state, applied, desired)`` triples with an admissible applied reference.

    The state is a perturbed rest point of the applied reference; the desired
    inclination may lie outside the admissible band.
    """
    rng = np.random.default_rng(seed)
    lo, hi = predictor.a_lo, predictor.a_hi
    out = []
    while len(out) < n:
        a_app, x_app = rng.uniform(lo + 0.1, hi - 0.1), rng.uniform(-0.5, 0.5)
        b = controller_equilibrium_attitude(a_app, cfg, predictor.p)
        y = np.array([x_app, 0.0, a_app, 0.0, b, 0.0]) + rng.normal(0.0, 0.05, 6)
        applied = Reference(x_app, a_app)
        desired = Reference(rng.uniform(-1.0, 1.0), rng.uniform(lo - 0.3, hi + 0.3))
        if predictor.admissible(y, applied):
            out.append((y, applied, desired))
    return out


def criterion_10(n: int = 50, prediction_dt: float = 5e-3) -> CriterionResult:
    """Bisection against a 1000-point scan, and monotone approach of the applied reference."""
    sc = load_scenario("paper-fig4")
    rg = sc.rg
    predictor = Predictor(sc.controller, sc.params, sc.limits, rg, prediction_dt, sc.dynamics_model)
    cell = 1.0 / 999
    worst = 0.0
    mismatches = 0
    for y, applied, desired in rg_instances(n, predictor, sc.controller):
        c = rg_search(y, applied, desired, predictor)
        c_scan = scan_oracle(y, applied, desired, predictor)
        worst = max(worst, abs(c - c_scan))
        mismatches += abs(c - c_scan) > cell

    runs = [sc] + [
        sc.replace(desired=Reference(xd, ad), duration=10.0)
        for xd, ad in ((-0.5, 2.5), (0.8, 0.6), (0.0, 1.2))
    ]
    increases = 0
    for run in runs:
        tr = rg_run(run.initial_state, run.start_reference, run.desired, run.controller, run.params,
                    run.limits, run.rg, run.duration, dt=run.dt, prediction_dt=prediction_dt)
        dist = [ref.distance(run.desired) for _, _, ref in tr.meta["rg"]]
        increases += int(np.sum(np.diff(dist) > 0))
    ok = mismatches == 0 and increases == 0
    return CriterionResult(
        10, "governor bisection and monotone references", ok,
        f"instances={n} outside one grid cell={mismatches} max|c-c_scan|={worst:.2e}; "
        f"distance increases over {len(runs)} runs={increases}",
        dict(mismatches=mismatches, worst=worst, increases=increases),
    )


CRITERIA: dict[int, Callable[[], CriterionResult]] = {
    1: criterion_1, 2: criterion_2, 3: criterion_3, 4: criterion_4, 5: criterion_5, 6: criterion_6,
    7: criterion_7, 8: criterion_8, 9: criterion_9, 10: criterion_10, 11: criterion_11,
}


def verify(suite: str = "all", out=print) -> list[CriterionResult]:
    """Run a suite, reporting each result through ``out`` as it completes."""
    if suite not in SUITES:
        raise ValueError(f"unknown suite {suite!r}; expected one of {sorted(SUITES)}")
    results = []
    for number in SUITES[suite]:
        res = CRITERIA[number]()
        out(res.line())
        results.append(res)
    return results
