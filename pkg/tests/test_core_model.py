import numpy as np
import pytest

from riskdesign.core_model import (
    ActionSet,
    DisutilitySpec,
    LinearContract,
    LinearFamily,
    OutcomeGrid,
    OutcomeModel,
    Scenario,
    TabularContract,
    TabularFamily,
    TypeDistribution,
    TypeSpace,
    check_simplex,
    clip_coverage,
    density,
    density_dx,
    expectation,
    likelihood,
    random_cost,
)
from riskdesign.errors import DomainError, UnsupportedError
from riskdesign.risk_measures import Expectation

from .conftest import LOSSES, P_HIGH, P_LOW, smooth_scenario

LINEAR = OutcomeModel(OutcomeGrid(LOSSES), LinearFamily(P_LOW, P_HIGH))
TABULAR = OutcomeModel(OutcomeGrid(LOSSES), TabularFamily((0.0, 1.0), [P_LOW, P_HIGH]))


@pytest.mark.parametrize(
    "x, expected",
    [(0.0, P_LOW), (1.0, P_HIGH), (0.5, (0.4, 0.35, 0.25))],
)
def test_density_linear_family(x, expected):
    np.testing.assert_allclose(density(LINEAR, x), expected, atol=1e-15)


def test_density_tabular_family():
    np.testing.assert_array_equal(density(TABULAR, 1.0), P_HIGH)
    with pytest.raises(DomainError):
        density(TABULAR, 0.5)


def test_density_outside_interval():
    with pytest.raises(DomainError):
        density(LINEAR, 1.5)


def test_density_dx():
    d = density_dx(LINEAR, 0.3)
    np.testing.assert_allclose(d, (0.2, -0.1, -0.1), atol=1e-15)
    assert abs(d.sum()) < 1e-15
    with pytest.raises(UnsupportedError):
        density_dx(TABULAR, 0.0)


def test_likelihood_uses_reference_row():
    model = OutcomeModel(OutcomeGrid(LOSSES), LinearFamily(P_LOW, P_HIGH), reference_probs=(0.5, 0.25, 0.25))
    np.testing.assert_allclose(likelihood(model, 0.0), (0.6, 1.6, 1.2))
    np.testing.assert_allclose(likelihood(LINEAR, 0.0), np.array(P_LOW) * 3)


@pytest.mark.parametrize(
    "values, probs, expected",
    [((1, 4, 9), P_LOW, 4.6), ((1, 4, 9), P_HIGH, 3.5), ((2.5, 2.5, 2.5), (0.1, 0.2, 0.7), 2.5)],
)
def test_expectation(values, probs, expected):
    assert expectation(values, probs) == pytest.approx(expected, abs=1e-12)


def test_expectation_length_mismatch():
    with pytest.raises(DomainError):
        expectation((1, 2), (0.5, 0.25, 0.25))


@pytest.mark.parametrize("probs", [(0.5, 0.6), (1.2, -0.2), (np.nan, 1.0), ()])
def test_check_simplex_rejects(probs):
    with pytest.raises(DomainError):
        check_simplex(probs)


def test_grid_must_increase():
    with pytest.raises(DomainError):
        OutcomeGrid((1.0, 1.0, 2.0))
    with pytest.raises(DomainError):
        OutcomeGrid((1.0,))


def test_family_shape_checked():
    with pytest.raises(DomainError):
        OutcomeModel(OutcomeGrid((1.0, 2.0)), LinearFamily(P_LOW, P_HIGH))
    with pytest.raises(DomainError):
        LinearFamily((0.5, 0.6), (0.5, 0.5))


def test_contracts():
    with pytest.raises(DomainError):
        LinearContract(1.0, 1.0)
    with pytest.raises(DomainError):
        LinearContract(0.5, 0.0)
    with pytest.raises(DomainError):
        TabularContract((0.0, 3.0, 0.0)).validate(OutcomeGrid(LOSSES))
    w = np.array([0.5, 1.0, 1.5])
    c = TabularContract(w)
    w[0] = 9.0
    assert c.coverage[0] == 0.5
    np.testing.assert_array_equal(clip_coverage((-1.0, 1.0, 5.0), np.array(LOSSES)), (0.0, 1.0, 3.0))


def test_random_cost_linear_contract():
    d = DisutilitySpec(m=0.28)
    cost = random_cost(d, LinearContract(0.5, 1.0), np.array(LOSSES), 1.0)
    np.testing.assert_allclose(cost, np.array([0.25, 1.0, 2.25]) + 0.28 + 1.0)


@pytest.mark.parametrize("g, t, value, slope", [("identity", 2.0, 2.0, 1.0), ("quadratic", 2.0, 4.0, 4.0)])
def test_disutility_shapes(g, t, value, slope):
    d = DisutilitySpec(g=g)
    assert d.loss(t) == value
    assert d.loss_prime(t) == slope
    assert d.loss_inverse(value) == pytest.approx(t)


def test_power_disutility():
    d = DisutilitySpec(g="power", power=3.0)
    assert d.loss(2.0) == pytest.approx(8.0)
    assert d.loss_prime(2.0) == pytest.approx(12.0)
    with pytest.raises(DomainError):
        DisutilitySpec(g="power", power=0.5)
    with pytest.raises(DomainError):
        DisutilitySpec(g="log")


def test_action_set():
    assert ActionSet(values=(1.0, 0.0)).values == (0.0, 1.0)
    assert ActionSet(interval=(0.0, 1.0)).contains(0.3)
    with pytest.raises(DomainError):
        ActionSet(values=(0.0,), interval=(0.0, 1.0))
    with pytest.raises(DomainError):
        ActionSet(interval=(1.0, 0.0))


def test_scenario_validation():
    sc = smooth_scenario()
    with pytest.raises(DomainError):
        sc.replace(U_bar=0.0)
    with pytest.raises(DomainError):
        sc.replace(gamma=-1.0)
    with pytest.raises(DomainError):
        sc.replace(mu0=TypeDistribution((1.0,)))
    with pytest.raises(DomainError):
        sc.replace(action_set=ActionSet(interval=(0.0, 2.0)))
    with pytest.raises(DomainError):
        Scenario(TABULAR, TypeSpace([Expectation()]), TypeDistribution((1.0,)), DisutilitySpec(), 1.0, 1.0,
                 ActionSet(values=(0.0, 0.5)))
