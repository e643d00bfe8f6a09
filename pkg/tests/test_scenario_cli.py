import dataclasses
import math
import subprocess
import sys

import numpy as np
import pytest

from coopmanip.cli import main
from coopmanip.errors import IntegrationDivergedError, InvariantError, ScenarioError
from coopmanip.export import CSV_HEADER, emit_plot_script, export_csv, read_csv, trajectory_table
from coopmanip.scenario import BUILTINS, load_scenario, simulate
from coopmanip.simulation import Trajectory, closed_loop
from coopmanip.verify import criterion_8


def _write(tmp_path, text, name="sc.yaml"):
    path = tmp_path / name
    path.write_text(text)
    return path


class TestBuiltins:
    def test_fig3_values(self):
        sc = load_scenario("paper-fig3")
        p, lim, c = sc.params, sc.limits, sc.controller
        assert (p.m_u, p.I_u, p.m_c, p.m_b, p.I_b) == (0.2, 0.881e-3, 2.0, 1.0, 0.33)
        assert (p.L, p.d_G) == (1.0, 0.5)
        assert (lim.U_max, lim.T_max, lim.F_max) == (5.0, 1.3, 10.0)
        assert (c.ugv.k_p_x, c.ugv.k_d_x, c.ugv.lambda_1, c.ugv.lambda_2) == (3.0, 3.0, 10.0, 2.0)
        assert (c.outer.k_p_alpha, c.outer.k_d_alpha, c.outer.epsilon) == (20.0, 5.0, 1.0)
        assert (c.inner.k_p_beta, c.inner.k_d_beta) == (0.5, 0.01)
        assert sc.initial_state.as_array().tolist() == [0, 0, math.pi / 3, 0, math.pi / 4, 0]
        assert sc.desired.as_tuple() == (0.3, math.pi / 2)
        assert sc.rg is None

    def test_fig4_values(self):
        sc = load_scenario("paper-fig4")
        assert sc.params.I_u == 1.762e-3
        assert sc.desired.alpha_ref == 2 * math.pi / 3
        assert sc.rg is not None and sc.rg.sample_time == 0.2
        assert sc.rg.margin_mu == 0.05

    def test_builtins_cannot_be_mutated_through_loading(self):
        before = repr(BUILTINS)
        sc = load_scenario("paper-fig3")
        with pytest.raises(dataclasses.FrozenInstanceError):
            sc.dt = 1.0
        assert repr(BUILTINS) == before
        assert load_scenario("paper-fig3") == sc


class TestFiles:
    def test_override_on_builtin(self, tmp_path):
        path = _write(tmp_path, "base: paper-fig3\ndesired: {alpha_ref: 2*pi/5}\nduration: 5\n")
        sc = load_scenario(path)
        assert sc.desired == type(sc.desired)(0.3, 2 * math.pi / 5)
        assert sc.duration == 5.0
        assert sc.params == load_scenario("paper-fig3").params

    def test_chained_bases(self, tmp_path):
        _write(tmp_path, "base: paper-fig4\nlimits: {T_max: 2.0}\n", "parent.yaml")
        sc = load_scenario(_write(tmp_path, "base: parent.yaml\ndt: 0.002\n"))
        assert sc.limits.T_max == 2.0 and sc.dt == 0.002 and sc.rg is not None

    def test_full_file_without_base(self, tmp_path):
        import yaml

        raw = dict(BUILTINS["paper-fig3"])
        sc = load_scenario(_write(tmp_path, yaml.safe_dump(raw)))
        assert sc.controller == load_scenario("paper-fig3").controller

    def test_gain_condition_violation_names_invariant(self, tmp_path):
        path = _write(tmp_path, "base: paper-fig3\ncontroller: {ugv: {lambda_2: 15}}\n")
        with pytest.raises(InvariantError, match=r"controller\.ugv.*global asymptotic stability"):
            load_scenario(path)

    @pytest.mark.parametrize("text, where", [
        ("base: paper-fig3\nparams: {m_u: heavy}\n", "params.m_u"),
        ("base: paper-fig3\nlimits: {U_max: 5, T_max: 1, F_max: 10, extra: 1}\n", "limits"),
        ("base: paper-fig3\ncontroller: {thrust_law: fancy}\n", "controller.thrust_law"),
        ("base: paper-fig3\ndynamics_model: reduced\n", "dynamics_model"),
        ("base: paper-fig3\ndesired: [1, 2]\n", "desired"),
        ("base: paper-fig3\nparams: {g: \"__import__('os')\"}\n", "params.g"),
    ])
    def test_schema_errors_carry_field_path(self, tmp_path, text, where):
        with pytest.raises(ScenarioError) as exc:
            load_scenario(_write(tmp_path, text))
        assert exc.value.path == where

    def test_missing_field(self, tmp_path):
        with pytest.raises(ScenarioError, match=r"params\.L"):
            load_scenario(_write(tmp_path, "params: {m_u: 1, I_u: 1, m_c: 1, m_b: 1, I_b: 1, d_G: 1}\n"))

    def test_step_longer_than_governor_period(self, tmp_path):
        with pytest.raises(InvariantError, match="sample_time"):
            load_scenario(_write(tmp_path, "base: paper-fig4\ndt: 0.5\n"))

    def test_missing_file(self, tmp_path):
        with pytest.raises(ScenarioError):
            load_scenario(tmp_path / "none.yaml")


class TestSimulate:
    def test_fig3_end_state(self):
        tr = simulate(load_scenario("paper-fig3"))
        assert abs(tr.alpha[-1] - math.pi / 2) < 0.01
        assert abs(tr.x[-1] - 0.3) < 0.005
        assert tr.inputs[:, 0].min() >= 0

    def test_deterministic(self):
        sc = load_scenario("paper-fig4")
        a, b = simulate(sc), simulate(sc)
        assert np.array_equal(trajectory_table(a), trajectory_table(b))

    def test_uniform_time_grid(self):
        tr = simulate(load_scenario("paper-fig4"))
        assert np.all(np.diff(tr.t) > 0)
        np.testing.assert_allclose(np.diff(tr.t), 1e-3, rtol=1e-9)

    def test_divergence_reports_last_time(self):
        sc = load_scenario("paper-fig3")
        sc = sc.replace(initial_state=dataclasses.replace(sc.initial_state, alpha_dot=1e200))
        with pytest.raises(IntegrationDivergedError) as exc:
            simulate(sc)
        assert exc.value.last_time == 0.0


class TestExport:
    def test_header(self, tmp_path):
        path = tmp_path / "t.csv"
        export_csv(Trajectory.empty(), path)
        assert path.read_text() == ",".join(CSV_HEADER) + "\n"
        assert path.read_text().startswith(
            "t,x,x_dot,alpha,alpha_dot,beta,beta_dot,u1,u2,u3,u1_cmd,u2_cmd,u3_cmd,ref_x,ref_alpha\n")

    def test_three_samples(self, tmp_path, params, limits, cfg, s0):
        tr = closed_loop(s0, (0.3, math.pi / 2), cfg, params, limits, 1e-3, 2e-3)
        path = tmp_path / "t.csv"
        export_csv(tr, path)
        assert len(path.read_text().splitlines()) == 4

    def test_round_trip_bit_exact(self, tmp_path):
        tr = simulate(load_scenario("paper-fig3").replace(duration=1.0))
        path = tmp_path / "t.csv"
        export_csv(tr, path)
        back = read_csv(path)
        table = trajectory_table(tr)
        for i, name in enumerate(CSV_HEADER):
            assert np.array_equal(back[name], table[:, i])

    def test_plot_script_two_panels(self, tmp_path):
        csv = tmp_path / "fig3.csv"
        export_csv(simulate(load_scenario("paper-fig3").replace(duration=1.0)), csv)
        script = tmp_path / "plot.py"
        emit_plot_script(csv, script)
        text = script.read_text()
        assert "plt.subplots(2, 1" in text and str(csv.resolve()) in text
        subprocess.run([sys.executable, str(script), str(tmp_path / "out.png")], check=True)
        assert (tmp_path / "out.png").stat().st_size > 0

    def test_plot_script_overlay(self, tmp_path):
        sc = load_scenario("paper-fig4").replace(duration=1.0)
        a, b = tmp_path / "rg.csv", tmp_path / "plain.csv"
        export_csv(simulate(sc), a)
        export_csv(simulate(sc.without_rg()), b)
        script = tmp_path / "plot.py"
        emit_plot_script([a, b], script, ["with governor", "without governor"])
        text = script.read_text()
        assert str(a.resolve()) in text and str(b.resolve()) in text and '"--"' in text

    def test_plot_script_missing_csv(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            emit_plot_script(tmp_path / "nope.csv", tmp_path / "plot.py")


class TestCli:
    def test_simulate_writes_csv_and_plot(self, tmp_path, capsys):
        csv, plot = tmp_path / "f3.csv", tmp_path / "f3.py"
        assert main(["simulate", "paper-fig3", "--csv", str(csv), "--plot", str(plot)]) == 0
        assert csv.is_file() and plot.is_file()
        assert "final state" in capsys.readouterr().out

    def test_overlay(self, tmp_path):
        plot = tmp_path / "f4.py"
        assert main(["simulate", "paper-fig4", "--plot", str(plot), "--overlay-no-rg"]) == 0
        assert (tmp_path / "f4-no-rg.csv").is_file()

    @pytest.mark.parametrize("cmd", [["equilibria", "paper-fig4"], ["rg", "paper-fig4"],
                                     ["analyze", "paper-fig3", "--gamma-out-samples", "2"]])
    def test_commands_succeed(self, cmd, capsys):
        assert main(cmd) == 0
        assert capsys.readouterr().out

    def test_config_error_exit_code(self, tmp_path, capsys):
        bad = _write(tmp_path, "base: paper-fig3\ncontroller: {ugv: {lambda_2: 15}}\n")
        assert main(["simulate", str(bad)]) == 2
        assert "global asymptotic stability" in capsys.readouterr().err
        assert main(["simulate", "no-such-scenario"]) == 2

    def test_usage_error_exit_code(self):
        with pytest.raises(SystemExit) as exc:
            main(["verify", "everything"])
        assert exc.value.code == 2

    def test_verify_model_suite_passes(self, capsys):
        assert main(["verify", "model"]) == 0
        out = capsys.readouterr().out
        assert out.count("[PASS]") == 3 and "3/3" in out

    def test_module_entry_point(self):
        res = subprocess.run([sys.executable, "-m", "coopmanip", "equilibria", "paper-fig3"],
                             capture_output=True, text=True)
        assert res.returncode == 0 and "attainable alpha" in res.stdout


def test_corrupted_cart_gain_fails_property_check():
    cfg = load_scenario("paper-fig3").controller
    bad_ugv = cfg.ugv
    object.__setattr__(bad_ugv, "lambda_2", 20.0)  # bypass the constructor check on purpose
    res = criterion_8(cfg=dataclasses.replace(cfg, ugv=bad_ugv), n=3)
    assert not res.passed
    assert "VIOLATED" in res.measured
