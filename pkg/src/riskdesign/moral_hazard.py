"""Intensity of moral hazard (IMH) and design steps on the type distribution that reduce it.

T(mu) = x*(mu) - x^a(mu): the insurer's benchmark action minus the action the
agent actually picks under the benchmark contract.  Its gradient comes from the
implicit function theorem applied to the two stationarity conditions

    H1(x, mu) = d/dx of the benchmark Lagrangian,   H1(x*, mu) = 0
    H2(x, mu) = d/dx of the agent objective,        H2(x^a, mu) = 0

and is cross-checked by finite differences of re-solved T.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contract_solvers import (
    _as_contract,
    agent_best_response,
    agent_objective,
    agent_objective_dx,
    benchmark_dx,
    density,
    design_cost,
    envelope_ties,
    lagrangian_dx,
    principal_objective,
    recover_ir_multiplier,
    solve_full_info,
)
from .core_model import LinearContract, Scenario, TabularContract, type_weights
from .errors import DomainError, NumericalError
from .transport import project_simplex, w1, w1_dual

FD_X = 1e-6
JAC_MIN = 1e-8
BOUNDARY_MARGIN = 1e-6


@dataclass
class ImhReport:
    x_star: float
    x_a: float
    imh: float
    grad_T: np.ndarray = None
    b_star: np.ndarray = None
    direction: np.ndarray = None
    feasible: bool = None
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        vec = lambda v: None if v is None else [float(t) for t in v]
        return {
            "x_star": float(self.x_star),
            "x_a": float(self.x_a),
            "imh": float(self.imh),
            "grad_T": vec(self.grad_T),
            "b_star": vec(self.b_star),
            "direction": vec(self.direction),
            "feasible": self.feasible,
            "flags": list(self.flags),
        }


def _insurer_action(scenario: Scenario, mu, contract: LinearContract):
    """Insurer-preferred action for a fixed contract, among actions meeting participation."""
    xs = scenario.action_set.grid(101)
    ok = [a for a in xs if agent_objective(scenario, mu, contract, a) <= scenario.U_bar + 1e-12]
    pool = ok or list(xs)
    vals = [principal_objective(scenario, contract, a, mu) for a in pool]
    best = min(vals)
    return min(a for a, v in zip(pool, vals) if v <= best + 1e-12 * max(1.0, abs(best))), not ok


def imh(scenario: Scenario, mu, contract=None) -> ImhReport:
    """IMH at ``mu``.

    Without a contract the benchmark coverage w* is solved for and the agent
    responds to it.  With a fixed (e.g. linear) contract, x* is the insurer's
    preferred participating action under that contract.
    """
    weights = type_weights(mu, scenario.n_types)
    flags = []
    if contract is None:
        bench = solve_full_info(scenario, weights)
        x_star, contract = bench.action, bench.contract
    else:
        contract = _as_contract(scenario, contract)
        x_star, none_ok = _insurer_action(scenario, weights, contract)
        if none_ok:
            flags.append("no-participating-action")
    x_a = agent_best_response(scenario, weights, contract)
    gap = x_star - x_a
    if gap < 0:
        flags.append("negative-imh")
    return ImhReport(x_star, x_a, gap, flags=flags)


def imh_value(scenario: Scenario, mu, contract=None) -> float:
    return imh(scenario, mu, contract).imh


def _central(f, x, h):
    return (f(x + h) - f(x - h)) / (2.0 * h)


def _slope(f, h, points=2):
    """Slope at 0 of a quadratic least-squares fit to f on {-points h, ..., points h}.

    Averages out solver noise that a two-point difference would amplify by 1/h.
    """
    ts = h * np.arange(-points, points + 1)
    return float(np.polyfit(ts, [f(t) for t in ts], 2)[1])


def h1(scenario: Scenario, mu, w, x: float, alpha: float) -> float:
    """d/dx of the benchmark Lagrangian at fixed (w, alpha).

    Analytic where the envelope densities are locally constant in x, central
    differences of the Lagrangian otherwise.
    """
    contract = _as_contract(scenario, w)
    if not envelope_ties(scenario, contract, x):
        return lagrangian_dx(scenario, mu, contract, x, alpha)

    def lag(v):
        p = density(scenario.model, v)
        return float(np.dot(p, contract.coverage + scenario.losses)) + alpha * agent_objective(scenario, mu, contract, v)

    return _central(lag, x, FD_X)


def h2(scenario: Scenario, mu, w, x: float) -> float:
    """d/dx of the agent's mixture objective at fixed coverage."""
    contract = _as_contract(scenario, w)
    if not envelope_ties(scenario, contract, x):
        return agent_objective_dx(scenario, mu, contract, x)
    return _central(lambda v: agent_objective(scenario, mu, contract, v), x, FD_X)


def boundary_sign(scenario: Scenario, mu, w, x: float):
    """At a bound of the action interval: the one-sided derivative and whether it is KKT-consistent."""
    lo, hi = scenario.action_set.bounds
    d = h2(scenario, mu, w, x) if lo < x < hi else None
    if x <= lo:
        v = agent_objective_dx(scenario, mu, _as_contract(scenario, w), lo)
        return v, v >= 0.0
    if x >= hi:
        v = agent_objective_dx(scenario, mu, _as_contract(scenario, w), hi)
        return v, v <= 0.0
    return d, None


@dataclass
class _State:
    x_star: float
    x_a: float
    contract: TabularContract
    alpha: float


def _state(scenario, weights, bracket=None):
    bench = solve_full_info(scenario, weights, bracket=bracket)
    x_a = agent_best_response(scenario, weights, bench.contract,
                              bracket=None if bracket is None else (bench.action - 1.0, bench.action + 1.0))
    return _State(bench.action, x_a, bench.contract, bench.alpha)


def _check_interior(scenario, st):
    if scenario.action_set.discrete or not scenario.model.smooth:
        raise NumericalError("gradient of T needs a smooth family on an action interval")
    lo, hi = scenario.action_set.bounds
    for name, v in (("x*", st.x_star), ("x^a", st.x_a)):
        if not lo + BOUNDARY_MARGIN < v < hi - BOUNDARY_MARGIN:
            raise NumericalError(f"{name}={v:.6g} sits on the action boundary; the minima must be interior and isolated")


def _local(x, width=0.05):
    return (x - width, x + width)


def grad_T(scenario: Scenario, mu, freeze_contract: bool = True, mu_step: float = 1e-4,
           x_step: float = 1e-4, with_state: bool = False):
    """Gradient of T(mu) = x*(mu) - x^a(mu) via the implicit function theorem.

    ``freeze_contract`` keeps w* at its value for ``mu`` inside H2 (the
    literal reading); False lets w* follow mu, so dH2/dmu_i picks up the
    contract's response.  Partials are raw coordinate derivatives: mu is not
    renormalized.
    """
    weights = type_weights(mu, scenario.n_types)
    st = _state(scenario, weights)
    _check_interior(scenario, st)
    n = scenario.n_types

    def H1(x, wts):
        return benchmark_dx(scenario, wts, x)

    contracts = {}

    def contract_for(wts):
        if freeze_contract:
            return st.contract
        key = tuple(wts)
        if key not in contracts:
            contracts[key] = solve_full_info(scenario, wts, bracket=_local(st.x_star)).contract
        return contracts[key]

    def H2(x, wts):
        return agent_objective_dx(scenario, wts, contract_for(wts), x)

    J1 = np.array([[_slope(lambda t: H1(st.x_star + t, weights), x_step)]])
    J2 = np.array([[_slope(lambda t: H2(st.x_a + t, weights), x_step)]])
    for name, J in (("benchmark", J1), ("agent", J2)):
        if abs(J[0, 0]) <= JAC_MIN:
            raise NumericalError(f"{name} Jacobian {J[0, 0]:.3g} is degenerate; the minimum is not isolated")
        if J[0, 0] < 0:
            raise NumericalError(f"{name} stationary point has negative curvature ({J[0, 0]:.3g}); not a local minimum")
    grad = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = 1.0
        dH1 = _slope(lambda t: H1(st.x_star, weights + t * e), mu_step)
        dH2 = _slope(lambda t: H2(st.x_a, weights + t * e), mu_step)
        grad[i] = np.linalg.solve(J2, [dH2])[0] - np.linalg.solve(J1, [dH1])[0]
    return (grad, st) if with_state else grad


def grad_T_fd(scenario: Scenario, mu, eps: float = 1e-4, freeze_contract: bool = True) -> np.ndarray:
    """Finite-difference oracle: central differences of re-solved T along each coordinate."""
    weights = type_weights(mu, scenario.n_types)
    base = _state(scenario, weights)
    n = scenario.n_types

    def T(wts):
        bench = solve_full_info(scenario, wts, bracket=_local(base.x_star))
        contract = base.contract if freeze_contract else bench.contract
        x_a = agent_best_response(scenario, wts, contract, bracket=_local(base.x_a))
        return bench.action - x_a

    out = np.zeros(n)
    for i in range(n):
        e = np.zeros(n)
        e[i] = eps
        out[i] = (T(weights + e) - T(weights - e)) / (2 * eps)
    return out


# angle (radians) below which the two vectors count as parallel; matches the
# accuracy of the finite-difference gradient
PARALLEL_TOL = 1e-6


def _zero_sum(v):
    v = np.asarray(v, dtype=float)
    return v - v.mean()


def mitigating_direction(grad, b_star):
    """Unit zero-sum direction with dmu.grad <= 0 and dmu.b_star <= 0, or None.

    None exactly when the zero-sum parts of grad and -b_star are positively
    parallel.
    """
    g = _zero_sum(grad)
    c = _zero_sum(b_star)
    if g.size != c.size:
        raise DomainError("gradient and potential differ in length")
    n = g.size
    if n < 2:
        return None
    ng, nc = np.linalg.norm(g), np.linalg.norm(c)
    tol = 1e-12
    conv = np.zeros(n)
    conv[0], conv[1] = -1.0, 1.0
    conv /= np.sqrt(2.0)
    if ng <= tol and nc <= tol:
        return conv
    if ng <= tol:
        return conv if np.dot(conv, c) <= 0 else -c / nc
    if nc <= tol:
        return conv if np.dot(conv, g) <= 0 else -g / ng
    d = -(g / ng + c / nc)
    nd = np.linalg.norm(d)
    if nd <= PARALLEL_TOL:
        return None
    # near cancellation leaves rounding off the zero-sum plane; project it back
    d = _zero_sum(d / nd)
    return d / np.linalg.norm(d)


@dataclass
class DesignStepReport:
    mu: np.ndarray
    mu_next: np.ndarray
    c_step: float
    T_before: float
    T_after: float
    w1_before: float
    w1_after: float
    accepted: bool
    halvings: int = 0
    flags: list = field(default_factory=list)

    @property
    def both_decreased(self) -> bool:
        return self.T_after <= self.T_before and self.w1_after <= self.w1_before

    def to_json(self) -> dict:
        return {
            "mu": [float(v) for v in self.mu],
            "mu_next": [float(v) for v in self.mu_next],
            "c_step": float(self.c_step),
            "T_before": float(self.T_before),
            "T_after": float(self.T_after),
            "W1_before": float(self.w1_before),
            "W1_after": float(self.w1_after),
            "accepted": self.accepted,
            "both_decreased": self.both_decreased,
            "halvings": self.halvings,
            "flags": list(self.flags),
        }


def design_step(scenario: Scenario, mu, direction, c_step: float, contract=None, max_halvings: int = 20,
                T_before: float = None):
    """Move mu along ``direction``; T is re-solved at the trial point and the step halved while T grows.

    ``T_before`` skips re-solving T at ``mu`` when the caller already has it.
    """
    weights = np.asarray(type_weights(mu, scenario.n_types))
    d = np.asarray(direction, dtype=float)
    if abs(d.sum()) > 1e-9:
        raise DomainError("design direction must sum to zero")
    if c_step < 0:
        raise DomainError("step size must be nonnegative")
    mu0 = scenario.mu0.weights
    T0 = imh_value(scenario, weights, contract) if T_before is None else float(T_before)
    W0 = w1(weights, mu0)
    c = float(c_step)
    halvings = 0
    while True:
        nxt = project_simplex(weights + c * d) if c > 0 else weights.copy()
        T1 = T0 if c == 0 else imh_value(scenario, nxt, contract)
        if T1 <= T0 + 1e-12:
            return nxt, DesignStepReport(weights, nxt, c, T0, T1, W0, w1(nxt, mu0), True, halvings)
        c /= 2.0
        halvings += 1
        if halvings > max_halvings or c < 1e-12:
            return weights.copy(), DesignStepReport(weights, weights.copy(), c, T0, T0, W0, W0, False, halvings,
                                                    ["step-collapse"])


def imh_report(scenario: Scenario, mu, contract=None, with_gradient: bool = True) -> ImhReport:
    """IMH and the W1 potential, plus the gradient of T with a mitigating direction when the optima are interior."""
    weights = type_weights(mu, scenario.n_types)
    if with_gradient and contract is None:
        try:
            grad, st = grad_T(scenario, weights, with_state=True)
        except NumericalError as exc:
            rep = imh(scenario, weights)
            rep.flags.append(f"no-gradient: {exc}")
        else:
            # the gradient's base state is the benchmark solve imh would repeat
            rep = ImhReport(st.x_star, st.x_a, st.x_star - st.x_a, grad_T=grad)
            if rep.imh < 0:
                rep.flags.append("negative-imh")
    else:
        rep = imh(scenario, weights, contract)
    pot = w1_dual(weights, scenario.mu0.weights)
    rep.b_star = pot.b
    if np.any(np.abs(np.cumsum(weights - scenario.mu0.weights)[:-1]) <= 1e-12):
        # b* is one subgradient among several; a step with d.b* <= 0 may still raise W1
        rep.flags.append("w1-nondifferentiable")
    if rep.grad_T is not None:
        rep.direction = mitigating_direction(rep.grad_T, pot.b)
        rep.feasible = rep.direction is not None
    return rep
