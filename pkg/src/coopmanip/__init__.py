"""Simulation and analysis of a cart and a planar UAV cooperatively tilting a bar."""

from .control import ControllerConfig, InnerGains, OuterGains, ThrustLaw, UgvGains, cascade_step
from .errors import CoopManipError, InvariantError, ScenarioError
from .model import ActuatorLimits, ControlInput, PhysicalParams, State, full_dynamics, simplified_dynamics
from .refgov import Reference, RgConfig, rg_run, rg_step
from .scenario import Scenario, load_scenario, simulate
from .simulation import Trajectory, closed_loop

__all__ = [
    "ActuatorLimits", "ControlInput", "ControllerConfig", "CoopManipError", "InnerGains",
    "InvariantError", "OuterGains", "PhysicalParams", "Reference", "RgConfig", "Scenario",
    "ScenarioError", "State", "ThrustLaw", "Trajectory", "UgvGains", "cascade_step",
    "closed_loop", "full_dynamics", "load_scenario", "rg_run", "rg_step", "simplified_dynamics",
    "simulate",
]
