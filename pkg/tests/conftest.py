import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from riskdesign.core_model import (
    ActionSet,
    DisutilitySpec,
    LinearFamily,
    OutcomeGrid,
    OutcomeModel,
    Scenario,
    TabularFamily,
    TypeDistribution,
    TypeSpace,
)
from riskdesign.risk_measures import AbsSemiDeviation, AverageValueAtRisk, Expectation

settings.register_profile("default", max_examples=100, deadline=None,
                          suppress_health_check=[HealthCheck.too_slow])
settings.load_profile("default")

LOSSES = (1.0, 2.0, 3.0)
P_LOW = (0.3, 0.4, 0.3)
P_HIGH = (0.5, 0.3, 0.2)


def smooth_scenario(mu0=(0.5, 0.5), U_bar=3.0, gamma=1.0, m=0.0, m2=3.0, p_low=P_LOW, p_high=P_HIGH,
                    types=None):
    """Interval relaxation of the case study with a convex investment cost; optima are interior."""
    return Scenario(
        model=OutcomeModel(OutcomeGrid(LOSSES), LinearFamily(p_low, p_high)),
        types=TypeSpace(types or [Expectation(), AbsSemiDeviation(1.0)]),
        mu0=TypeDistribution(mu0),
        disutility=DisutilitySpec(m=m, m2=m2),
        U_bar=U_bar,
        gamma=gamma,
        action_set=ActionSet(interval=(0.0, 1.0)),
        name="smooth relaxation",
    )


def tabular_scenario(U_bar=4.0, gamma=0.5):
    return Scenario(
        model=OutcomeModel(OutcomeGrid(LOSSES), TabularFamily((0.0, 1.0), [P_LOW, P_HIGH])),
        types=TypeSpace([Expectation(), AverageValueAtRisk(0.5)]),
        mu0=TypeDistribution((0.7, 0.3)),
        disutility=DisutilitySpec(m=0.3),
        U_bar=U_bar,
        gamma=gamma,
        action_set=ActionSet(values=(0.0, 1.0)),
        name="tabular two-action",
    )


@pytest.fixture
def smooth():
    return smooth_scenario()


@pytest.fixture
def tabular():
    return tabular_scenario()


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.write_sep("=", "acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES):
            terminalreporter.write_line(line)
