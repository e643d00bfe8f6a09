"""Command-line interface: ``coopmanip <command> ...``.

Exit status: 0 on success, 1 when a verification fails or a run diverges,
2 for usage or configuration errors.
"""

from __future__ import annotations

import argparse
import logging
import math
import sys
from pathlib import Path

import numpy as np

from . import analysis
from .equilibria import (
    attainable_alpha_range,
    attainable_beta_range,
    controller_equilibrium_attitude,
    steady_state_input,
)
from .errors import CoopManipError, IntegrationDivergedError, InvariantError, ScenarioError
from .export import emit_plot_script, export_csv
from .refgov import RgConfig, violations
from .scenario import Scenario, load_scenario, simulate
from .verify import SUITES, verify

EXIT_OK, EXIT_FAIL, EXIT_USAGE = 0, 1, 2


def _summary(sc: Scenario, traj) -> list[str]:
    last = traj[len(traj) - 1]
    s = last.state
    lines = [
        f"scenario      {sc.name}  ({sc.dynamics_model} dynamics, {sc.controller.thrust_law.value} thrust law)",
        f"samples       {len(traj)}  (dt={sc.dt:g} s, duration={sc.duration:g} s)",
        f"final state   x={s.x:.6f} alpha={s.alpha:.6f} beta={s.beta:.6f}",
        f"desired       x_ref={sc.desired.x_ref:.6f} alpha_ref={sc.desired.alpha_ref:.6f}",
        f"min u1        {traj.inputs[:, 0].min():.6f}",
    ]
    rg = sc.rg or RgConfig()
    n_viol = int(np.sum(violations(traj, sc.params, sc.limits, rg)))
    lines.append(f"violations    {n_viol} samples (actuator box and inclination band, mu={rg.margin_mu:g})")
    return lines


def cmd_simulate(args) -> int:
    sc = load_scenario(args.scenario)
    if args.no_rg:
        sc = sc.without_rg()
    traj = simulate(sc)
    print("\n".join(_summary(sc, traj)))
    csv_path = args.csv
    if args.plot and not csv_path:
        csv_path = str(Path(args.plot).with_suffix(".csv"))
    if csv_path:
        export_csv(traj, csv_path)
        print(f"wrote {csv_path}")
    if args.plot:
        paths, labels = [csv_path], ["with governor" if sc.rg else "closed loop"]
        if args.overlay_no_rg and sc.rg is not None:
            plain = simulate(sc.without_rg())
            plain_csv = str(Path(csv_path).with_name(Path(csv_path).stem + "-no-rg.csv"))
            export_csv(plain, plain_csv)
            print(f"wrote {plain_csv}")
            paths.append(plain_csv)
            labels.append("without governor")
        emit_plot_script(paths, args.plot, labels)
        print(f"wrote {args.plot}")
    return EXIT_OK


def cmd_equilibria(args) -> int:
    sc = load_scenario(args.scenario)
    p, lim = sc.params, sc.limits
    ar = attainable_alpha_range(p, lim)
    mu = (sc.rg or RgConfig()).margin_mu
    lo, hi = ar.shrink(mu)
    a_bar = sc.desired.alpha_ref
    print(f"attainable alpha   [{ar.alpha_min:.6f}, {ar.alpha_max:.6f}] rad")
    print(f"admissible band    [{lo:.6f}, {hi:.6f}] rad (mu={mu:g})")
    print(f"desired alpha      {a_bar:.6f} rad ({'inside' if lo <= a_bar <= hi else 'OUTSIDE'} band)")
    if a_bar in ar:
        br = attainable_beta_range(a_bar, p, lim)
        b_eq = controller_equilibrium_attitude(a_bar, sc.controller, p)
        u = steady_state_input(a_bar, b_eq, p, lim)
        print(f"attainable beta    [{br.beta_min:.6f}, {br.beta_max:.6f}] rad")
        print(f"controller beta    {b_eq:.6f} rad (theta={b_eq - a_bar:.6f})")
        print(f"steady-state u1    {u.u1:.6f} N (U_max={lim.U_max:g})")
    return EXIT_OK


def cmd_analyze(args) -> int:
    sc = load_scenario(args.scenario)
    p, lim, cfg = sc.params, sc.limits, sc.controller
    o, i = cfg.outer, cfg.inner
    print(f"bound constant 1/(gamma eps)   {analysis.bound_constant(o):.9f} N")
    print(f"supremum over eps 2 U_max/pi   {analysis.bound_constant_sup(lim):.9f} N")
    gamma_in = analysis.inner_gain_numeric(i.k_p_beta, i.k_d_beta, p.I_u)
    print(f"inner-loop l1 gain (numeric)   {gamma_in:.9f}")
    if math.isclose(i.k_d_beta**2, 4 * i.k_p_beta * p.I_u, rel_tol=1e-9):
        print(f"inner-loop l1 gain (closed)    {analysis.inner_gain_analytic(i.k_p_beta, i.k_d_beta, p.I_u):.9f}")
    else:
        print("inner-loop gains are not critically damped; no closed form")
    gamma_out = analysis.estimate_gamma_out(cfg, p, lim, args.gamma_out_samples,
                                            alpha_ref=sc.desired.alpha_ref,
                                            theta_tilde_max=args.theta_tilde_max)
    print(f"outer-loop gain (empirical)    {gamma_out:.6f}  ({args.gamma_out_samples} samples)")
    loop = gamma_in * gamma_out
    print(f"loop gain                      {loop:.6f} ({'< 1' if loop < 1 else '>= 1'})")
    ge = analysis.GainEstimates(gamma_in, gamma_out, args.theta_tilde_max)
    ok = analysis.small_gain_admissible(sc.initial_state, ge)
    print(f"initial state admissible       {ok}")
    return EXIT_OK


def cmd_rg(args) -> int:
    sc = load_scenario(args.scenario)
    if sc.rg is None:
        sc = sc.replace(rg=RgConfig())
    traj = simulate(sc)
    trace = traj.meta["rg"]
    print("\n".join(_summary(sc, traj)))
    cs = np.array([c for _, c, _ in trace])
    full = int(np.argmax(cs == 1.0)) if np.any(cs == 1.0) else None
    print(f"governor      {len(trace)} updates, {traj.meta['predictions']} predictions")
    if full is not None:
        print(f"              desired reference reached at t={trace[full][0]:.3f} s")
    for t, c, ref in trace[: args.show]:
        print(f"  t={t:7.3f}  c={c:.6f}  x_ref={ref.x_ref:.6f}  alpha_ref={ref.alpha_ref:.6f}")
    return EXIT_OK


def cmd_verify(args) -> int:
    results = verify(args.suite)
    passed = sum(r.passed for r in results)
    print(f"{passed}/{len(results)} criteria passed")
    return EXIT_OK if passed == len(results) else EXIT_FAIL


def build_parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="coopmanip", description=__doc__.splitlines()[0])
    ap.add_argument("-v", "--verbose", action="store_true", help="log governor warnings")
    sub = ap.add_subparsers(dest="command", required=True)

    sp = sub.add_parser("simulate", help="run a scenario")
    sp.add_argument("scenario", help="built-in name (paper-fig3, paper-fig4) or YAML file")
    sp.add_argument("--csv", metavar="PATH", help="write the trajectory as CSV")
    sp.add_argument("--plot", metavar="PATH", help="write a matplotlib script plotting the CSV")
    sp.add_argument("--no-rg", action="store_true", help="apply the desired reference directly")
    sp.add_argument("--overlay-no-rg", action="store_true",
                    help="with --plot: also run without the governor and overlay both runs")
    sp.set_defaults(func=cmd_simulate)

    sp = sub.add_parser("equilibria", help="attainable configurations of a scenario")
    sp.add_argument("scenario")
    sp.set_defaults(func=cmd_equilibria)

    sp = sub.add_parser("analyze", help="stability-analysis quantities of a scenario")
    sp.add_argument("scenario")
    sp.add_argument("--gamma-out-samples", type=int, default=20, metavar="N")
    sp.add_argument("--theta-tilde-max", type=float, default=0.5, metavar="RAD")
    sp.set_defaults(func=cmd_analyze)

    sp = sub.add_parser("rg", help="run a scenario through the reference governor")
    sp.add_argument("scenario")
    sp.add_argument("--show", type=int, default=10, metavar="K", help="governor updates to list")
    sp.set_defaults(func=cmd_rg)

    sp = sub.add_parser("verify", help="run acceptance criteria")
    sp.add_argument("suite", nargs="?", default="all", choices=sorted(SUITES))
    sp.set_defaults(func=cmd_verify)
    return ap


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.ERROR, format="%(message)s")
    if getattr(args, "gamma_out_samples", 1) < 1:
        print("error: --gamma-out-samples must be >= 1", file=sys.stderr)
        return EXIT_USAGE
    try:
        return args.func(args)
    except (ScenarioError, InvariantError, FileNotFoundError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except IntegrationDivergedError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL
    except CoopManipError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_FAIL


if __name__ == "__main__":
    sys.exit(main())
