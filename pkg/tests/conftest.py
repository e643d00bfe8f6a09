import math

import pytest

from coopmanip.control import ControllerConfig, InnerGains, OuterGains, UgvGains
from coopmanip.model import ActuatorLimits, PhysicalParams, State


@pytest.fixture
def params():
    return PhysicalParams(m_u=0.2, I_u=0.881e-3, m_c=2.0, m_b=1.0, I_b=0.33, L=1.0, d_G=0.5)


@pytest.fixture
def limits():
    return ActuatorLimits(U_max=5.0, T_max=1.3, F_max=10.0)


@pytest.fixture
def cfg():
    return ControllerConfig(
        UgvGains(3.0, 3.0, 10.0, 2.0),
        OuterGains.tuned(20.0, 5.0, 1.0, 5.0),
        InnerGains(0.5, 0.01),
        "basic",
    )


@pytest.fixture
def s0():
    return State(0.0, 0.0, math.pi / 3, 0.0, math.pi / 4, 0.0)
