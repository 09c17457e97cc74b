"""Built-in linear-contract case study.

Losses (1, 2, 3) with rows (0.3, 0.4, 0.3) under low investment x_L = 0 and
(0.5, 0.3, 0.2) under high investment x_H = 1, quadratic perception of the
residual loss, and two types: risk neutral and absolute semideviation with
weight kappa.  The insurer offers a linear contract paying c xi against a
premium.  All closed forms below are checked against brute-force evaluation.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .contract_solvers import agent_best_response, agent_objective, solve_hidden_action
from .core_model import (
    ActionSet,
    DisutilitySpec,
    LinearContract,
    LinearFamily,
    OutcomeGrid,
    OutcomeModel,
    Scenario,
    TabularContract,
    TypeDistribution,
    TypeSpace,
)
from .errors import DomainError
from .moral_hazard import imh
from .risk_measures import AbsSemiDeviation, Expectation, evaluate

LOSSES = (1.0, 2.0, 3.0)
P_LOW = (0.3, 0.4, 0.3)
P_HIGH = (0.5, 0.3, 0.2)
X_L, X_H = 0.0, 1.0

CANDIDATE_IC_THRESHOLD = "1.1 c^2 + 0.6 kappa c^2 mu2"
ORACLE_FLIP_THRESHOLD = "(1 - c)^2 (1.1 + 0.07 kappa mu2)"
PARTICIPATION_BOUND = "(2c - c^2)(3.5 + 1.25 kappa mu2_0)"


@dataclass(frozen=True)
class CaseParams:
    c: float = 0.5
    premium: float = 1.0
    kappa: float = 1.0
    m: float = 0.28
    mu2_0: float = 0.1
    gamma: float = 0.01

    def __post_init__(self):
        checks = (
            ("c", 0.0 < self.c < 1.0, "in (0, 1)"),
            ("premium", self.premium > 0.0, "positive"),
            ("kappa", 0.0 < self.kappa <= 1.0, "in (0, 1]"),
            ("m", self.m >= 0.0, "nonnegative"),
            ("mu2_0", 0.0 <= self.mu2_0 <= 1.0, "in [0, 1]"),
            ("gamma", self.gamma >= 0.0, "nonnegative"),
        )
        for name, ok, what in checks:
            value = getattr(self, name)
            if not (np.isfinite(value) and ok):
                raise DomainError(f"case-study parameter {name}={value} must be {what}")


def _mix(mu2):
    return np.array([1.0 - mu2, mu2])


def _types(kappa):
    return TypeSpace([Expectation(), AbsSemiDeviation(kappa)])


def uninsured_threshold(kappa: float, m: float, mu2_0: float) -> float:
    """Perceived cost of staying uninsured at x_H under mu0: the participation level U_bar."""
    probs = np.array(P_HIGH)
    Z = np.square(LOSSES) + m * X_H
    return float(np.dot(_mix(mu2_0), [evaluate(t, Z, probs) for t in _types(kappa)]))


def case_study_scenario(params: CaseParams = CaseParams()) -> Scenario:
    """The preset scenario; U_bar is the uninsured perceived cost at x_H under mu0."""
    return Scenario(
        model=OutcomeModel(OutcomeGrid(LOSSES), LinearFamily(P_LOW, P_HIGH)),
        types=_types(params.kappa),
        mu0=TypeDistribution(_mix(params.mu2_0)),
        disutility=DisutilitySpec(g="quadratic", m=params.m),
        U_bar=uninsured_threshold(params.kappa, params.m, params.mu2_0),
        gamma=params.gamma,
        action_set=ActionSet(values=(X_L, X_H)),
        name="linear-contract case study",
    )


def contract_of(params: CaseParams) -> LinearContract:
    return LinearContract(params.c, params.premium)


def participation_bound(c: float, kappa: float, mu2_0: float) -> float:
    """Largest premium the agent accepts at x_H, in closed form."""
    return (2.0 * c - c * c) * (3.5 + 1.25 * kappa * mu2_0)


def participation_gap(c: float, kappa: float, mu2_0: float, m: float = 0.0) -> float:
    """Brute force: uninsured minus insured (zero premium) perceived cost at x_H under mu0."""
    sc = case_study_scenario(CaseParams(c=c, kappa=kappa, m=m, mu2_0=max(mu2_0, 0.0)))
    mu0 = sc.mu0.weights
    bare = agent_objective(sc, mu0, TabularContract(np.zeros(3)), X_H)
    insured = agent_objective(sc, mu0, TabularContract(c * np.array(LOSSES)), X_H)
    return bare - insured


def candidate_ic_threshold(c: float, kappa: float, mu2: float) -> float:
    """Alternative closed form for the flip threshold, kept for comparison; brute force does not confirm it."""
    return 1.1 * c * c + 0.6 * kappa * c * c * mu2


def oracle_flip_threshold(c: float, kappa: float, mu2: float) -> float:
    """Investment cost m (x_H - x_L) below which the agent strictly prefers x_H."""
    return (1.0 - c) ** 2 * (1.1 + 0.07 * kappa * mu2)


def flip_margin(params: CaseParams, mu2: float) -> float:
    """Brute force: perceived-cost saving of x_H over x_L before investment, at type mix mu2."""
    sc = case_study_scenario(params)
    contract = contract_of(params)
    mu = _mix(mu2)
    low = agent_objective(sc, mu, contract, X_L)
    high = agent_objective(sc, mu, contract, X_H)
    return (low - params.m * X_L) - (high - params.m * X_H)


def minimal_flip_mu2(params: CaseParams):
    """Threshold mu2 above which the agent picks x_H (at it the tie goes to x_L); None when out of reach."""
    dx = X_H - X_L
    base = (1.0 - params.c) ** 2
    target = params.m * dx / base - 1.1
    if target < 0.0:
        return 0.0
    mu2 = target / (0.07 * params.kappa)
    return mu2 if mu2 <= 1.0 else None


def scan_flip_mu2(params: CaseParams, step: float = 0.01):
    """Grid oracle: first mu2 on the lattice where the exact best response is x_H."""
    sc = case_study_scenario(params)
    contract = contract_of(params)
    for mu2 in np.linspace(0.0, 1.0, int(round(1.0 / step)) + 1):
        if agent_best_response(sc, _mix(mu2), contract) == X_H:
            return float(mu2)
    return None


def case_study_report(params: CaseParams = CaseParams()) -> dict:
    """Full case-study report: participation, incentive thresholds, the flipping mu2 and IMH around the design."""
    sc = case_study_scenario(params)
    contract = contract_of(params)
    mu0 = sc.mu0.weights
    bound = participation_bound(params.c, params.kappa, params.mu2_0)
    gap = participation_gap(params.c, params.kappa, params.mu2_0, params.m)
    before = imh(sc, mu0, contract)
    design = solve_hidden_action(sc, contract=contract)
    after = imh(sc, design.mu, contract)
    mu2_star = minimal_flip_mu2(params)
    margin = flip_margin(params, params.mu2_0)
    candidate = candidate_ic_threshold(params.c, params.kappa, params.mu2_0)
    agrees = abs(candidate - oracle_flip_threshold(params.c, params.kappa, params.mu2_0)) <= 1e-12
    return {
        "params": {
            "c": params.c,
            "premium": params.premium,
            "kappa": params.kappa,
            "m": params.m,
            "mu2_0": params.mu2_0,
            "gamma": params.gamma,
        },
        "U_bar": sc.U_bar,
        "participation": {
            "expression": PARTICIPATION_BOUND,
            "closed_form": bound,
            "brute_force": gap,
            "abs_difference": abs(bound - gap),
            "premium_accepted": params.premium <= gap,
        },
        "ic_threshold": {
            "candidate_expression": CANDIDATE_IC_THRESHOLD,
            "candidate_value": candidate,
            "oracle_expression": ORACLE_FLIP_THRESHOLD,
            "oracle_value": oracle_flip_threshold(params.c, params.kappa, params.mu2_0),
            "brute_force_margin": margin,
            "investment_cost": params.m * (X_H - X_L),
            "agrees": agrees,
            "note": "the candidate closed form agrees with brute-force evaluation" if agrees
            else "the candidate closed form disagrees with brute-force evaluation; the oracle governs all decisions",
        },
        "flip": {
            "minimal_mu2": mu2_star,
            "grid_mu2": scan_flip_mu2(params),
        },
        "imh_before": {"mu": mu0.tolist(), **before.to_json()},
        "design": design.to_json(),
        "imh_after": {"mu": [float(v) for v in design.mu], **after.to_json()},
    }
