"""Risk-preference design for insurance contracts under moral hazard.

Coherent risk measures on discrete losses, Wasserstein design costs, contract
solvers with exact incentive compatibility, moral-hazard sensitivity and
monotone-coverage diagnostics.
"""
from .case_study import CaseParams, case_study_report, case_study_scenario
from .contract_solvers import (
    SolveReport,
    agent_best_response,
    agent_objective,
    principal_objective,
    recover_ir_multiplier,
    solve_full_info,
    solve_hidden_action,
)
from .core_model import (
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
    density,
)
from .diagnostics import (
    check_c1,
    check_c2,
    check_c3,
    check_mlr,
    check_monotone_contract,
    foc_ic_residual,
    foc_pointwise_residual,
)
from .errors import (
    DomainError,
    InfeasibleError,
    InternalError,
    NumericalError,
    RiskDesignError,
    SchemaError,
    UnsupportedError,
)
from .moral_hazard import ImhReport, design_step, grad_T, h1, h2, imh, mitigating_direction
from .risk_measures import AbsSemiDeviation, AverageValueAtRisk, Expectation, envelope_density, evaluate
from .scenario_io import load_scenario, scenario_from_json, scenario_to_json
from .transport import project_simplex, w1, w1_dual

__version__ = "0.1.0"
