import itertools

import numpy as np
import pytest

from riskdesign.case_study import CaseParams, case_study_scenario, contract_of, oracle_flip_threshold
from riskdesign.contract_solvers import (
    agent_best_response,
    agent_objective,
    discretize_actions,
    fit_foc_multipliers,
    mu_grid,
    principal_objective,
    recover_ir_multiplier,
    solve_full_info,
    solve_hidden_action,
)
from riskdesign.core_model import ActionSet, LinearContract, TabularContract, TypeDistribution
from riskdesign.errors import InfeasibleError
from riskdesign.risk_measures import Expectation, evaluate
from riskdesign.transport import w1

from .conftest import LOSSES, smooth_scenario, tabular_scenario

XI = np.array(LOSSES)
M = 0.28


@pytest.fixture
def case():
    return case_study_scenario(CaseParams(m=M))


def test_agent_objective_examples(case):
    assert agent_objective(case, (1, 0), TabularContract(np.zeros(3)), 1.0) == pytest.approx(3.5 + M, abs=1e-12)
    assert agent_objective(case, (0, 1), TabularContract(0.5 * XI), 1.0) == pytest.approx(1.1875 + M, abs=1e-12)


def test_agent_objective_risk_neutral(case):
    contract = LinearContract(0.3, 0.7)
    U = (0.7 * XI) ** 2 + 0.7 + M * 0.4
    probs = 0.6 * np.array([0.3, 0.4, 0.3]) + 0.4 * np.array([0.5, 0.3, 0.2])
    sc = smooth_scenario(m=M, m2=0.0)
    assert agent_objective(sc, (1, 0), contract, 0.4) == pytest.approx(np.dot(U, probs), abs=1e-12)


def test_principal_objective_examples(case):
    mu0 = case.mu0.weights
    assert principal_objective(case, TabularContract(np.zeros(3)), 1.0, mu0) == pytest.approx(1.7, abs=1e-12)
    assert principal_objective(case, LinearContract(0.5, 1.0), 1.0, mu0) == pytest.approx(-0.15, abs=1e-12)
    moved = principal_objective(case, TabularContract(np.zeros(3)), 1.0, (0.5, 0.5))
    assert moved == pytest.approx(1.7 + case.gamma * 0.4, abs=1e-12)


@pytest.mark.parametrize("mu2, expected", [(0.1, 0.0), (0.6, 1.0)])
def test_best_response_flip(case, mu2, expected):
    assert agent_best_response(case, (1 - mu2, mu2), contract_of(CaseParams(m=M))) == expected


def test_best_response_expensive_investment():
    sc = case_study_scenario(CaseParams(m=10.0))
    for mu2 in (0.0, 0.5, 1.0):
        assert agent_best_response(sc, (1 - mu2, mu2), LinearContract(0.01, 1.0)) == 0.0


def test_best_response_interval_is_stationary(smooth):
    w = TabularContract((0.2, 0.5, 1.0))
    x = agent_best_response(smooth, (0.5, 0.5), w)
    assert 0.0 < x < 1.0
    for v in (x - 1e-3, x + 1e-3):
        assert agent_objective(smooth, (0.5, 0.5), w, x) <= agent_objective(smooth, (0.5, 0.5), w, v) + 1e-12


def test_full_info_slack_participation(case):
    rep = solve_full_info(case.replace(U_bar=1e6), case.mu0.weights)
    np.testing.assert_allclose(rep.contract.coverage, 0.0, atol=1e-12)
    assert rep.action == 1.0
    assert rep.alpha == 0.0
    assert rep.objective == pytest.approx(1.7, abs=1e-12)


def test_full_info_ir_binds(case):
    mu0 = case.mu0.weights
    full = agent_objective(case, mu0, TabularContract(XI), 1.0)
    bare = agent_objective(case, mu0, TabularContract(np.zeros(3)), 1.0)
    sc = case.replace(U_bar=0.5 * (full + bare))
    rep = solve_full_info(sc, mu0)
    assert rep.contract.coverage.max() > 0
    assert abs(rep.ir_slack) <= 1e-9
    assert sc.U_bar - agent_objective(sc, mu0, rep.contract, rep.action) >= -1e-9
    assert rep.alpha > 0


def test_full_info_infeasible(case):
    sc = case.replace(U_bar=0.1, action_set=ActionSet(values=(1.0,)))
    with pytest.raises(InfeasibleError) as err:
        solve_full_info(sc, case.mu0.weights)
    assert err.value.minimal_cost == pytest.approx(M)


def _grid_oracle(sc, levels=41):
    """Best IR-feasible objective over a coverage product grid, by plain numpy.

    Types are (Expectation, AVaR(0.5)); AVaR is the minimum over atoms t of
    t + E[(Z - t)+] / alpha.
    """
    W = np.array(list(itertools.product(*[np.linspace(0, xi, levels) for xi in XI])))
    mu = sc.mu0.weights
    best = np.inf
    for x, p in zip(sc.model.family.actions, sc.model.family.rows):
        Z = (XI - W) ** 2 + sc.disutility.m * x
        mean = Z @ p
        avar = np.min([t + np.maximum(Z - t[:, None], 0) @ p / 0.5 for t in Z.T], axis=0)
        ok = mu[0] * mean + mu[1] * avar <= sc.U_bar
        best = min(best, float(((W + XI) @ p)[ok].min()))
    return best


def test_full_info_beats_exhaustive_grid(tabular):
    assert [str(t) for t in tabular.types] == ["expectation", "avar(alpha=0.5)"]
    rep = solve_full_info(tabular, tabular.mu0.weights)
    best = _grid_oracle(tabular)
    assert rep.objective <= best + 1e-9
    assert rep.objective >= best - 0.05


def test_full_info_no_local_improvement(tabular):
    mu = tabular.mu0.weights
    rep = solve_full_info(tabular, mu)
    w = rep.contract.coverage
    for k, d in itertools.product(range(3), (-1e-4, 1e-4)):
        trial = w.copy()
        trial[k] = np.clip(trial[k] + d, 0, XI[k])
        c = TabularContract(trial)
        if agent_objective(tabular, mu, c, rep.action) <= tabular.U_bar:
            assert principal_objective(tabular, c, rep.action, mu) >= rep.objective - 1e-10


def test_ir_multiplier_is_shadow_price(tabular):
    mu = tabular.mu0.weights
    rep = solve_full_info(tabular, mu)
    h = 1e-4
    up = solve_full_info(tabular.replace(U_bar=tabular.U_bar + h), mu).objective
    down = solve_full_info(tabular.replace(U_bar=tabular.U_bar - h), mu).objective
    shadow = -(up - down) / (2 * h)
    assert rep.alpha == pytest.approx(shadow, rel=0.05)


def test_ir_multiplier_slack(tabular):
    fit = recover_ir_multiplier(tabular.replace(U_bar=1e6), tabular.mu0.weights, np.zeros(3), 1.0)
    assert fit.alpha == 0.0
    assert "ir-inactive" in fit.flags


def test_full_info_smooth_interior(smooth):
    rep = solve_full_info(smooth, (0.5, 0.5))
    assert 0.0 < rep.action < 1.0
    assert abs(rep.ir_slack) <= 1e-9


def test_foc_fit_on_benchmark(smooth):
    rep = solve_full_info(smooth, (0.5, 0.5))
    fit = fit_foc_multipliers(smooth, (0.5, 0.5), rep.contract, rep.action)
    assert fit.alpha >= 0.0
    assert fit.beta is not None


def test_mu_grid():
    grid = mu_grid((0.55, 0.45), 0.1)
    assert np.allclose(grid.sum(axis=1), 1.0)
    assert any(np.allclose(g, (0.55, 0.45)) for g in grid)


def test_discretize_actions(smooth):
    sc = discretize_actions(smooth, 5)
    assert sc.action_set.values == (0.0, 0.25, 0.5, 0.75, 1.0)


def _check_hidden(sc, rep):
    mu = rep.mu
    assert agent_best_response(sc, mu, rep.contract) == rep.action
    assert sc.U_bar - agent_objective(sc, mu, rep.contract, rep.action) >= -1e-9
    assert rep.objective == pytest.approx(principal_objective(sc, rep.contract, rep.action, mu), abs=1e-9)
    assert solve_full_info(sc, mu).objective <= rep.objective + 1e-9


def test_hidden_action_tabular(tabular):
    rep = solve_hidden_action(tabular)
    _check_hidden(tabular, rep)


def test_hidden_action_smooth(smooth):
    rep = solve_hidden_action(smooth)
    assert "actions-discretized" in rep.flags
    _check_hidden(discretize_actions(smooth), rep)


def test_hidden_action_huge_gamma_keeps_mu0(tabular):
    sc = tabular.replace(gamma=1e6)
    rep = solve_hidden_action(sc)
    np.testing.assert_allclose(rep.mu, sc.mu0.weights, atol=1e-12)


def test_hidden_action_case_study_design():
    params = CaseParams(m=M, gamma=0.01)
    sc = case_study_scenario(params)
    contract = contract_of(params)
    rep = solve_hidden_action(sc, contract=contract)
    mu2 = rep.mu[1]
    assert rep.action == 1.0
    assert M > oracle_flip_threshold(params.c, params.kappa, 0.1)
    assert M < oracle_flip_threshold(params.c, params.kappa, mu2) + 1e-9
    assert w1(rep.mu, sc.mu0.weights) == pytest.approx(mu2 - 0.1, abs=1e-12)
