"""
Scenario files and the batch simulation driver.

A scenario is a YAML mapping with the sections below. Any section may be
omitted when ``base`` names a built-in scenario or another file; fields given
explicitly override the inherited ones (mappings merge key by key).

.. code-block:: yaml

    base: paper-fig3            # optional: built-in name or relative path
    params:        {m_u, I_u, m_c, m_b, I_b, L, d_G, g}
    limits:        {U_max, T_max, F_max}
    controller:
      thrust_law: basic         # basic | improved
      ugv:   {k_p_x, k_d_x, lambda_1, lambda_2}
      outer: {k_p_alpha, k_d_alpha, epsilon}   # gamma optional, tuned to U_max
      inner: {k_p_beta, k_d_beta}
    initial_state: {x, x_dot, alpha, alpha_dot, beta, beta_dot}
    desired:       {x_ref, alpha_ref}
    initial_reference: {x_ref, alpha_ref}      # governor start; default: initial x, alpha
    rg: null                    # or {sample_time, horizon, ..., prediction_dt}
    dynamics_model: full        # full | simplified
    dt: 0.001
    duration: 30

Angles and other numbers may be written as arithmetic in ``pi``, e.g.
``2*pi/3``.
"""

from __future__ import annotations

import ast
import copy
import dataclasses
import math
import operator
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import yaml

from .control import ControllerConfig, InnerGains, OuterGains, ThrustLaw, UgvGains, gamma_for
from .errors import InvariantError, ScenarioError
from .model import DYNAMICS_MODELS, ActuatorLimits, PhysicalParams, State
from .refgov import Reference, RgConfig, rg_run
from .simulation import Trajectory, closed_loop

_PAPER_COMMON = {
    "params": {"m_u": 0.2, "I_u": 0.881e-3, "m_c": 2.0, "m_b": 1.0, "I_b": 0.33,
               "L": 1.0, "d_G": 0.5, "g": 9.81},
    "limits": {"U_max": 5.0, "T_max": 1.3, "F_max": 10.0},
    "controller": {
        "thrust_law": "basic",
        "ugv": {"k_p_x": 3.0, "k_d_x": 3.0, "lambda_1": 10.0, "lambda_2": 2.0},
        "outer": {"k_p_alpha": 20.0, "k_d_alpha": 5.0, "epsilon": 1.0},
        "inner": {"k_p_beta": 0.5, "k_d_beta": 0.01},
    },
    "initial_state": {"x": 0.0, "x_dot": 0.0, "alpha": "pi/3", "alpha_dot": 0.0,
                      "beta": "pi/4", "beta_dot": 0.0},
    "dynamics_model": "full",
    "dt": 1e-3,
}

BUILTINS: dict[str, dict] = {
    "paper-fig3": {
        **_PAPER_COMMON,
        "desired": {"x_ref": 0.3, "alpha_ref": "pi/2"},
        "rg": None,
        "duration": 30.0,
    },
    "paper-fig4": {
        **_PAPER_COMMON,
        "params": {**_PAPER_COMMON["params"], "I_u": 1.762e-3},
        "controller": {**_PAPER_COMMON["controller"], "thrust_law": "improved"},
        "desired": {"x_ref": 0.3, "alpha_ref": "2*pi/3"},
        "initial_reference": {"x_ref": 0.0, "alpha_ref": "pi/3"},
        "rg": {"sample_time": 0.2},
        "duration": 50.0,
    },
}

_BINOPS = {ast.Add: operator.add, ast.Sub: operator.sub, ast.Mult: operator.mul,
           ast.Div: operator.truediv, ast.Pow: operator.pow}
_UNOPS = {ast.UAdd: operator.pos, ast.USub: operator.neg}


def _eval_expr(text: str, path: str) -> float:
    """Evaluate a number written as arithmetic in ``pi``."""

    def ev(node):
        if isinstance(node, ast.Expression):
            return ev(node.body)
        if isinstance(node, ast.Constant) and isinstance(node.value, (int, float)):
            return float(node.value)
        if isinstance(node, ast.Name) and node.id == "pi":
            return math.pi
        if isinstance(node, ast.BinOp) and type(node.op) in _BINOPS:
            return _BINOPS[type(node.op)](ev(node.left), ev(node.right))
        if isinstance(node, ast.UnaryOp) and type(node.op) in _UNOPS:
            return _UNOPS[type(node.op)](ev(node.operand))
        raise ScenarioError(f"unsupported expression {text!r}", path)

    try:
        tree = ast.parse(text, mode="eval")
    except SyntaxError:
        raise ScenarioError(f"cannot parse number {text!r}", path) from None
    try:
        return ev(tree)
    except ZeroDivisionError:
        raise ScenarioError(f"division by zero in {text!r}", path) from None


def _number(value, path: str) -> float:
    if isinstance(value, bool):
        raise ScenarioError(f"expected a number, got {value!r}", path)
    if isinstance(value, (int, float)):
        return float(value)
    if isinstance(value, str):
        return _eval_expr(value, path)
    raise ScenarioError(f"expected a number, got {type(value).__name__}", path)


def _section(raw: dict, key: str, path: str, required: bool = True) -> dict | None:
    if key not in raw or raw[key] is None:
        if required:
            raise ScenarioError("missing section", f"{path}{key}")
        return None
    sec = raw[key]
    if not isinstance(sec, dict):
        raise ScenarioError(f"expected a mapping, got {type(sec).__name__}", f"{path}{key}")
    return sec


def _fields(sec: dict, path: str, required: tuple[str, ...], optional: dict[str, Any] | None = None) -> dict:
    """Numeric fields of ``sec`` with unknown and missing keys reported by path."""
    optional = optional or {}
    unknown = set(sec) - set(required) - set(optional)
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", path)
    out = {}
    for name in required:
        if name not in sec:
            raise ScenarioError("missing field", f"{path}.{name}")
        out[name] = _number(sec[name], f"{path}.{name}")
    for name, default in optional.items():
        if name in sec and sec[name] is not None:
            v = sec[name]
            out[name] = v if isinstance(default, (bool, str)) else _number(v, f"{path}.{name}")
        elif default is not None:
            out[name] = default
    return out


def _build(ctor, path: str, **kwargs):
    try:
        return ctor(**kwargs)
    except InvariantError as exc:
        raise InvariantError(f"{path}: {exc}") from None


@dataclass(frozen=True)
class Scenario:
    params: PhysicalParams
    limits: ActuatorLimits
    controller: ControllerConfig
    initial_state: State
    desired: Reference
    rg: RgConfig | None = None
    dynamics_model: str = "full"
    dt: float = 1e-3
    duration: float = 30.0
    initial_reference: Reference | None = None
    prediction_dt: float | None = None
    name: str = ""

    def __post_init__(self):
        if self.dynamics_model not in DYNAMICS_MODELS:
            raise InvariantError(f"dynamics_model must be one of {sorted(DYNAMICS_MODELS)}")
        if not self.dt > 0:
            raise InvariantError("dt must be > 0")
        if not self.duration > 0:
            raise InvariantError("duration must be > 0")
        if self.rg is not None and self.dt > self.rg.sample_time:
            raise InvariantError(f"dt ({self.dt}) must not exceed rg.sample_time ({self.rg.sample_time})")
        self.controller.validate(self.limits)

    @property
    def start_reference(self) -> Reference:
        if self.initial_reference is not None:
            return self.initial_reference
        return Reference(self.initial_state.x, self.initial_state.alpha)

    def without_rg(self) -> "Scenario":
        """Same scenario with the desired reference applied directly."""
        return dataclasses.replace(self, rg=None)

    def replace(self, **changes) -> "Scenario":
        return dataclasses.replace(self, **changes)


def _merge(base: dict, override: dict) -> dict:
    out = copy.deepcopy(base)
    for k, v in override.items():
        if isinstance(v, dict) and isinstance(out.get(k), dict):
            out[k] = _merge(out[k], v)
        else:
            out[k] = copy.deepcopy(v)
    return out


def _resolve(raw: dict, origin: Path | None, seen: tuple[str, ...] = ()) -> dict:
    base = raw.get("base")
    raw = {k: v for k, v in raw.items() if k != "base"}
    if base is None:
        return raw
    if not isinstance(base, str):
        raise ScenarioError("expected a built-in name or a file path", "base")
    if base in seen:
        raise ScenarioError(f"circular base reference via {base!r}", "base")
    if base in BUILTINS:
        parent = copy.deepcopy(BUILTINS[base])
        parent_origin = None
    else:
        path = Path(base) if origin is None else origin.parent / base
        parent = _read_yaml(path)
        parent_origin = path
    return _merge(_resolve(parent, parent_origin, seen + (base,)), raw)


def _read_yaml(path: Path) -> dict:
    if not path.is_file():
        raise ScenarioError(f"no such scenario file or built-in: {str(path)!r}")
    try:
        raw = yaml.safe_load(path.read_text())
    except yaml.YAMLError as exc:
        raise ScenarioError(f"{path}: not valid YAML ({exc})") from None
    if not isinstance(raw, dict):
        raise ScenarioError(f"{path}: top level must be a mapping")
    return raw


_TOP_LEVEL = {"params", "limits", "controller", "initial_state", "desired", "initial_reference",
              "rg", "dynamics_model", "dt", "duration", "name"}


def scenario_from_dict(raw: dict, name: str = "") -> Scenario:
    """Validate a fully resolved scenario mapping (no ``base`` key)."""
    unknown = set(raw) - _TOP_LEVEL
    if unknown:
        raise ScenarioError(f"unknown top-level field(s) {sorted(unknown)}")

    p = _build(PhysicalParams, "params", **_fields(
        _section(raw, "params", ""), "params",
        ("m_u", "I_u", "m_c", "m_b", "I_b", "L", "d_G"), {"g": 9.81}))
    lim = _build(ActuatorLimits, "limits", **_fields(
        _section(raw, "limits", ""), "limits", ("U_max", "T_max", "F_max")))

    ctl = _section(raw, "controller", "")
    unknown = set(ctl) - {"thrust_law", "ugv", "outer", "inner"}
    if unknown:
        raise ScenarioError(f"unknown field(s) {sorted(unknown)}", "controller")
    law = ctl.get("thrust_law", "basic")
    if law not in {m.value for m in ThrustLaw}:
        raise ScenarioError(f"expected 'basic' or 'improved', got {law!r}", "controller.thrust_law")
    ugv = _build(UgvGains, "controller.ugv", **_fields(
        _section(ctl, "ugv", "controller."), "controller.ugv",
        ("k_p_x", "k_d_x", "lambda_1", "lambda_2")))
    outer_f = _fields(_section(ctl, "outer", "controller."), "controller.outer",
                      ("k_p_alpha", "k_d_alpha", "epsilon"), {"gamma": None})
    outer_f.setdefault("gamma", gamma_for(outer_f["epsilon"], lim.U_max))
    outer = _build(OuterGains, "controller.outer", **outer_f)
    inner = _build(InnerGains, "controller.inner", **_fields(
        _section(ctl, "inner", "controller."), "controller.inner", ("k_p_beta", "k_d_beta")))
    cfg = ControllerConfig(ugv, outer, inner, ThrustLaw(law))

    s0 = _build(State, "initial_state", **_fields(
        _section(raw, "initial_state", ""), "initial_state",
        ("x", "x_dot", "alpha", "alpha_dot", "beta", "beta_dot")))
    desired = Reference(**_fields(_section(raw, "desired", ""), "desired", ("x_ref", "alpha_ref")))
    ir = _section(raw, "initial_reference", "", required=False)
    initial_ref = None if ir is None else Reference(
        **_fields(ir, "initial_reference", ("x_ref", "alpha_ref")))

    rg_sec = _section(raw, "rg", "", required=False)
    rg, prediction_dt = None, None
    if rg_sec is not None:
        defaults = RgConfig()
        opt = {f.name: getattr(defaults, f.name) for f in dataclasses.fields(RgConfig)}
        opt["prediction_dt"] = None
        vals = _fields(rg_sec, "rg", (), opt)
        prediction_dt = vals.pop("prediction_dt", None)
        vals["max_bisection_iters"] = int(vals["max_bisection_iters"])
        for flag in ("enforce_actuator_limits", "enforce_alpha_range"):
            if not isinstance(vals[flag], bool):
                raise ScenarioError("expected true or false", f"rg.{flag}")
        rg = _build(RgConfig, "rg", **vals)

    model = raw.get("dynamics_model", "full")
    if model not in DYNAMICS_MODELS:
        raise ScenarioError(f"expected one of {sorted(DYNAMICS_MODELS)}, got {model!r}", "dynamics_model")
    dt = _number(raw.get("dt", 1e-3), "dt")
    duration = _number(raw["duration"], "duration") if "duration" in raw else 30.0
    return _build(
        Scenario, "scenario",
        params=p, limits=lim, controller=cfg, initial_state=s0, desired=desired, rg=rg,
        dynamics_model=model, dt=dt, duration=duration, initial_reference=initial_ref,
        prediction_dt=prediction_dt, name=str(raw.get("name", name)),
    )


def load_scenario(source: str | Path) -> Scenario:
    """Load a built-in scenario by name or a YAML scenario file."""
    key = str(source)
    if key in BUILTINS:
        return scenario_from_dict(copy.deepcopy(BUILTINS[key]), name=key)
    path = Path(source)
    raw = _resolve(_read_yaml(path), path)
    return scenario_from_dict(raw, name=path.stem)


def simulate(sc: Scenario) -> Trajectory:
    """Run the scenario, through the reference governor when one is configured."""
    if sc.rg is None:
        traj = closed_loop(sc.initial_state, sc.desired.as_tuple(), sc.controller, sc.params,
                           sc.limits, sc.dt, sc.duration, sc.dynamics_model)
        traj.meta["scenario"] = sc.name
        return traj
    traj = rg_run(sc.initial_state, sc.start_reference, sc.desired, sc.controller, sc.params,
                  sc.limits, sc.rg, sc.duration, dt=sc.dt, dynamics_model=sc.dynamics_model,
                  prediction_dt=sc.prediction_dt)
    traj.meta["scenario"] = sc.name
    return traj
