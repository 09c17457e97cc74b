"""The agent's best response and the two insurer problems: full information and hidden action.

Coverage plans are tabular over the loss grid with 0 <= w <= xi.  At a fixed
action the benchmark is convex: in the variables s = g(xi - w) the insurer
maximizes the concave sum E[g^{-1}(s)] over a polytope (the mixture risk of
these measures is polyhedral), which we solve as a smooth lifted program.
The hidden-action problem enforces incentive compatibility by recomputing the
agent's best response, never by its first-order condition.
"""
from __future__ import annotations

import itertools
import logging
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq, minimize

from .core_model import (
    ActionSet,
    Contract,
    LinearContract,
    Scenario,
    TabularContract,
    clip_coverage,
    density,
    density_dx,
    random_cost,
    type_weights,
)
from .errors import DomainError, InfeasibleError, InternalError, NumericalError
from .lp import linprog
from .risk_measures import envelope_density, evaluate, evaluate_batch, evaluate_dx, evaluate_unchecked, has_tie
from .transport import project_simplex, w1, w1_dual

log = logging.getLogger(__name__)

GOLDEN = (math.sqrt(5.0) - 1.0) / 2.0
TIE_REL = 1e-12
IR_TOL = 1e-12
RELAX_ALL_ACTIONS = 5


@dataclass
class SolveReport:
    contract: Contract
    action: float
    objective: float
    ir_slack: float
    alpha: float
    beta: float = None
    mu: np.ndarray = None
    residual_norm: float = None
    flags: list = field(default_factory=list)

    def to_json(self) -> dict:
        if isinstance(self.contract, TabularContract):
            c = {"kind": "tabular", "coverage": [float(v) for v in self.contract.coverage]}
        else:
            c = {"kind": "linear", "coverage_fraction": self.contract.coverage_fraction, "premium": self.contract.premium}
        return {
            "contract": c,
            "action": float(self.action),
            "objective": float(self.objective),
            "ir_slack": float(self.ir_slack),
            "alpha": None if self.alpha is None else float(self.alpha),
            "beta": None if self.beta is None else float(self.beta),
            "mu": None if self.mu is None else [float(v) for v in self.mu],
            "flags": list(self.flags),
        }


# ----------------------------------------------------------------------------
# objectives


def _as_contract(scenario: Scenario, contract) -> Contract:
    if isinstance(contract, (TabularContract, LinearContract)):
        return contract.validate(scenario.model.grid)
    return TabularContract(np.asarray(contract, dtype=float)).validate(scenario.model.grid)


def agent_costs_by_type(scenario: Scenario, contract, x: float) -> np.ndarray:
    contract = _as_contract(scenario, contract)
    probs = density(scenario.model, x)
    U = random_cost(scenario.disutility, contract, scenario.losses, x)
    return np.array([evaluate(t, U, probs) for t in scenario.types])


def agent_objective(scenario: Scenario, mu, contract, x: float) -> float:
    """Perceived cost sum_i mu_i rho_i[U(w, x)] of the agent."""
    w = type_weights(mu, scenario.n_types)
    return float(np.dot(w, agent_costs_by_type(scenario, contract, x)))


def agent_objective_dx(scenario: Scenario, mu, contract, x: float) -> float:
    """Analytic derivative of the agent objective in x (smooth family, contract fixed)."""
    contract = _as_contract(scenario, contract)
    w = type_weights(mu, scenario.n_types)
    probs = density(scenario.model, x)
    dp = density_dx(scenario.model, x)
    U = random_cost(scenario.disutility, contract, scenario.losses, x)
    risk_dx = sum(wi * evaluate_dx(t, U, probs, dp) for wi, t in zip(w, scenario.types))
    return float(risk_dx + w.sum() * scenario.disutility.investment_dx(x))


def envelope_ties(scenario: Scenario, contract, x: float) -> bool:
    contract = _as_contract(scenario, contract)
    probs = density(scenario.model, x)
    U = random_cost(scenario.disutility, contract, scenario.losses, x)
    return any(has_tie(t, U, probs) for t in scenario.types)


def design_cost(scenario: Scenario, mu) -> float:
    """gamma * W1(mu, mu0); off-simplex probe vectors use the cumulative-sum formula as is."""
    w = type_weights(mu, scenario.n_types)
    if abs(w.sum() - 1.0) <= 1e-9 and np.all(w >= -1e-12):
        return scenario.gamma * w1(np.clip(w, 0, None) / np.clip(w, 0, None).sum(), scenario.mu0.weights)
    return scenario.gamma * float(np.abs(np.cumsum(w - scenario.mu0.weights)[:-1]).sum())


def principal_objective(scenario: Scenario, contract, x: float, mu) -> float:
    """Insurer cost: E[w + xi] (tabular) or E[c xi - premium] (linear), plus gamma W1."""
    return transfer(scenario, _as_contract(scenario, contract), x) + design_cost(scenario, mu)


def transfer(scenario: Scenario, contract: Contract, x: float) -> float:
    """The insurer's expected outlay under ``contract`` at action x, without the design cost."""
    probs = density(scenario.model, x)
    xi = scenario.losses
    if isinstance(contract, LinearContract):
        return float(np.dot(probs, contract.coverage_fraction * xi - contract.premium))
    return float(np.dot(probs, contract.coverage + xi))


# ----------------------------------------------------------------------------
# agent best response


def _pick_min(values, actions) -> int:
    """Index of the minimal value; near-ties go to the smallest action."""
    values = np.asarray(values, dtype=float)
    best = values.min()
    tol = TIE_REL * max(1.0, abs(best))
    cand = [i for i in range(values.size) if values[i] <= best + tol]
    return min(cand, key=lambda i: actions[i])


def _golden(f, a, b, tol=1e-8):
    c = b - GOLDEN * (b - a)
    d = a + GOLDEN * (b - a)
    fc, fd = f(c), f(d)
    while b - a > tol:
        if fc <= fd:
            b, d, fd = d, c, fc
            c = b - GOLDEN * (b - a)
            fc = f(c)
        else:
            a, c, fc = c, d, fd
            d = a + GOLDEN * (b - a)
            fd = f(d)
    return (a + b) / 2.0


def _refine_interval(f, df, grid, k, smooth, floor=None):
    """Polish a grid minimizer on its bracket: Brent on df when it changes sign, else golden section.

    A grid point at the lower action bound ``floor`` keeps a tie, so flat
    objectives resolve to the smallest action.
    """
    lo = grid[max(k - 1, 0)]
    hi = grid[min(k + 1, grid.size - 1)]
    if hi <= lo:
        return grid[k]
    x = None
    if smooth and df is not None:
        try:
            if df(lo) < 0.0 < df(hi):
                x = brentq(df, lo, hi, xtol=1e-14, rtol=1e-15)
        except (NumericalError, ValueError):
            x = None
    if x is None:
        x = _golden(f, lo, hi)
    # the grid point wins when strictly better, or tied at the lower bound
    fg, fx = f(grid[k]), f(x)
    tol = TIE_REL * max(1.0, abs(fx))
    if fg < fx - tol or (fg <= fx + tol and grid[k] == floor):
        return grid[k]
    return x


def agent_best_response(scenario: Scenario, mu, contract, grid_points: int = 1001, bracket=None) -> float:
    """argmin of the agent objective over the action set (ties to the smallest x).

    ``bracket`` restricts an interval search to a sub-interval; used when
    re-solving at nearby type distributions.
    """
    contract = _as_contract(scenario, contract)
    acts = scenario.action_set
    if bracket is not None and not acts.discrete:
        lo, hi = max(bracket[0], acts.interval[0]), min(bracket[1], acts.interval[1])
        grid = np.linspace(lo, hi, 21)
    else:
        grid = acts.grid(grid_points)
    if grid.size == 0:
        raise DomainError("empty action set")
    vals = [agent_objective(scenario, mu, contract, a) for a in grid]
    k = _pick_min(vals, grid)
    if acts.discrete or grid.size == 1:
        return float(grid[k])
    f = lambda v: agent_objective(scenario, mu, contract, v)
    df = (lambda v: agent_objective_dx(scenario, mu, contract, v)) if scenario.model.smooth else None
    return float(_refine_interval(f, df, grid, k, scenario.model.smooth, scenario.action_set.bounds[0]))


# ----------------------------------------------------------------------------
# full-information benchmark at a fixed action


@dataclass
class _Inner:
    w: np.ndarray
    cost: float  # E[w + xi]
    slack: bool
    feasible: bool


def _mixture(scenario, weights, Z, probs):
    return float(sum(wi * evaluate_unchecked(t, Z, probs) for wi, t in zip(weights, scenario.types)))


def _lifted_constraints(scenario, weights, probs, budget):
    """Linear system G z <= h for z = [s, aux...] expressing sum_i mu_i rho_i[s] <= budget."""
    m = probs.size
    blocks = []  # per type: (n_aux, rows builder)
    n_aux = 0
    layout = []
    for t in scenario.types:
        if t.kind == "expectation":
            layout.append((t, n_aux, 0))
        elif t.kind == "semideviation":
            layout.append((t, n_aux, m))
            n_aux += m
        else:
            layout.append((t, n_aux, m + 1))
            n_aux += m + 1
    nz = m + n_aux
    G, h = [], []
    budget_row = np.zeros(nz)
    for (t, off, size), mu_i in zip(layout, weights):
        o = m + off
        if t.kind == "expectation":
            budget_row[:m] += mu_i * probs
        elif t.kind == "semideviation":
            budget_row[:m] += mu_i * probs
            budget_row[o:o + m] += mu_i * t.kappa * probs
            for k in range(m):  # s_k - p.s - u_k <= 0
                row = np.zeros(nz)
                row[:m] -= probs
                row[k] += 1.0
                row[o + k] = -1.0
                G.append(row)
                h.append(0.0)
        else:
            tau = o + m
            budget_row[tau] += mu_i
            budget_row[o:o + m] += mu_i * probs / t.alpha
            for k in range(m):  # s_k - tau - v_k <= 0
                row = np.zeros(nz)
                row[k] = 1.0
                row[tau] = -1.0
                row[o + k] = -1.0
                G.append(row)
                h.append(0.0)
    G.append(budget_row)
    h.append(budget)
    lower = np.zeros(nz)
    upper = np.full(nz, np.inf)
    for t, off, size in layout:
        if t.kind == "avar":
            lower[m + off + m] = -np.inf
    return np.array(G), np.array(h), layout, nz, lower, upper


def _aux_start(layout, s, probs, m, nz):
    z = np.zeros(nz)
    z[:m] = s
    for t, off, size in layout:
        o = m + off
        if t.kind == "semideviation":
            z[o:o + m] = np.maximum(s - np.dot(probs, s), 0.0)
        elif t.kind == "avar":
            tau = float(np.max(s))
            z[o + m] = tau
            z[o:o + m] = np.maximum(s - tau, 0.0)
    return z


def _solve_s(scenario, weights, probs, caps, budget):
    """Maximize E[g^{-1}(s)] subject to the lifted mixture-risk budget and 0 <= s <= caps."""
    d = scenario.disutility
    m = probs.size
    G, h, layout, nz, lower, upper = _lifted_constraints(scenario, weights, probs, budget)
    upper[:m] = caps
    if d.exponent == 1.0:
        c = np.zeros(nz)
        c[:m] = -probs
        res = linprog(c, A_ub=G, b_ub=h, bounds=list(zip(lower, [None if not np.isfinite(u) else u for u in upper])))
        if res.status != "optimal":
            raise NumericalError(f"coverage LP returned {res.status}")
        return np.clip(res.x[:m], 0.0, caps)
    q = d.exponent
    floor = 1e-300

    def obj(z):
        s = np.maximum(z[:m], 0.0)
        return -float(np.dot(probs, np.power(s, 1.0 / q)))

    def jac(z):
        g = np.zeros(nz)
        s = np.maximum(z[:m], floor)
        g[:m] = -probs * np.power(s, 1.0 / q - 1.0) / q
        return g

    s0 = np.minimum(caps, max(budget, 0.0)) * 0.999 + 1e-12
    z0 = _aux_start(layout, s0, probs, m, nz)
    cons = [{"type": "ineq", "fun": lambda z: h - G @ z, "jac": lambda z: -G}]
    bnds = list(zip(lower, upper))
    bnds = [(None if not np.isfinite(lo) else lo, None if not np.isfinite(hi) else hi) for lo, hi in bnds]
    res = minimize(obj, z0, jac=jac, bounds=bnds, constraints=cons, method="SLSQP",
                   options={"ftol": 1e-15, "maxiter": 500})
    return np.clip(res.x[:m], 0.0, caps)


def _tighten(scenario, weights, probs, s, caps, budget):
    """Rescale s along min(lambda s, caps) so the budget holds with equality."""
    R = lambda lam: _mixture(scenario, weights, np.minimum(lam * s, caps), probs)
    if R(1.0) == budget:
        return s
    if R(1.0) > budget:
        lo, hi = 0.0, 1.0
    else:
        lo, hi = 1.0, 2.0
        while R(hi) < budget and hi < 1e6:
            if np.all(np.minimum(hi * s, caps) >= caps):
                return caps.copy()
            lo, hi = hi, 2.0 * hi
    lam = brentq(lambda v: R(v) - budget, lo, hi, xtol=1e-16, rtol=1e-15)
    lo = lam if R(lam) <= budget else lam * (1.0 - 4e-16)
    return np.minimum(lo * s, caps)


def min_coverage(scenario: Scenario, mu, x: float) -> _Inner:
    """Cheapest coverage meeting participation at action x."""
    weights = type_weights(mu, scenario.n_types)
    probs = density(scenario.model, x)
    d = scenario.disutility
    xi = scenario.losses
    budget = scenario.U_bar - weights.sum() * d.investment(x)
    zero = np.zeros_like(xi)
    caps = d.loss(xi)
    if _mixture(scenario, weights, caps, probs) <= budget:
        return _Inner(zero, float(np.dot(probs, xi)), True, True)
    if budget < 0.0:
        return _Inner(xi.copy(), float(np.dot(probs, 2 * xi)), False, False)
    s = _solve_s(scenario, weights, probs, caps, budget)
    s = _tighten(scenario, weights, probs, s, caps, budget)
    w = clip_coverage(xi - d.loss_inverse(s), xi)
    polished = _polish_kkt(scenario, weights, probs, w, budget)
    if polished is not None and np.dot(probs, polished) <= np.dot(probs, w) + 1e-13:
        w = polished
    return _Inner(w, float(np.dot(probs, w + xi)), False, True)


def _polish_kkt(scenario, weights, probs, w, budget):
    """Re-solve the stationarity system with the active structure of ``w`` frozen.

    Interior points satisfy 1 = alpha g'(r_k) E_mu[zeta_k], so each residual
    loss is explicit in alpha and the participation equality is a 1-D root.
    Returns None when the structure is tied or changes under the polish.
    """
    d = scenario.disutility
    q = d.exponent
    if q == 1.0:
        return None
    xi = scenario.losses
    interior = (probs > 0) & (w > 1e-9) & (w < xi - 1e-9)
    if not interior.any():
        return None
    contract = TabularContract(w)
    inv = d.investment(0.0)  # translation equivariance: the envelope ignores constants
    U = d.loss(xi - w) + inv
    if any(has_tie(t, U, probs) for t in scenario.types):
        return None
    zeta = sum(wi * envelope_density(t, U, probs).weights for wi, t in zip(weights, scenario.types))
    if np.any(zeta[interior] <= 0):
        return None
    fixed_r = xi - w

    def residual_loss(alpha):
        r = fixed_r.copy()
        r[interior] = np.power(1.0 / (q * alpha * zeta[interior]), 1.0 / (q - 1.0))
        return np.clip(r, 0.0, xi)

    def gap(alpha):
        return _mixture(scenario, weights, d.loss(residual_loss(alpha)), probs) - budget

    r_now = fixed_r[interior]
    a0 = float(np.median(1.0 / (q * zeta[interior] * np.power(np.maximum(r_now, 1e-300), q - 1.0))))
    lo, hi = a0 / 2.0, a0 * 2.0
    try:
        # gap falls as alpha grows (smaller residual losses)
        for _ in range(60):
            if gap(lo) >= 0.0:
                break
            lo /= 2.0
        for _ in range(60):
            if gap(hi) <= 0.0:
                break
            hi *= 2.0
        alpha = brentq(gap, lo, hi, xtol=1e-16 * a0, rtol=1e-15, maxiter=200)
    except ValueError:
        return None
    # step to the feasible side of the equality, one ulp at a time
    for _ in range(64):
        if gap(alpha) <= 0.0:
            break
        alpha = np.nextafter(alpha, np.inf)
    else:
        return None
    r = residual_loss(alpha)
    new_w = xi - r
    if np.any(new_w[interior] <= 0) or np.any(new_w[interior] >= xi[interior]):
        return None
    U2 = d.loss(r)
    if any(has_tie(t, U2, probs) for t in scenario.types):
        return None
    zeta2 = sum(wi * envelope_density(t, U2, probs).weights for wi, t in zip(weights, scenario.types))
    if np.abs(zeta2 - zeta).max() > 1e-12:
        return None
    return clip_coverage(new_w, xi)


# ----------------------------------------------------------------------------
# IR multiplier


@dataclass(frozen=True)
class MultiplierFit:
    alpha: float
    residual_norm: float
    flags: tuple = ()


def mixed_envelope(scenario: Scenario, mu, contract, x: float) -> np.ndarray:
    """Type-averaged maximizing density E_mu[zeta_theta] per grid point."""
    contract = _as_contract(scenario, contract)
    weights = type_weights(mu, scenario.n_types)
    probs = density(scenario.model, x)
    U = random_cost(scenario.disutility, contract, scenario.losses, x)
    return sum(wi * envelope_density(t, U, probs).weights for wi, t in zip(weights, scenario.types))


def recover_ir_multiplier(scenario: Scenario, mu, w, x: float, slack_tol: float = 1e-9) -> MultiplierFit:
    """Least-squares IR multiplier from the pointwise stationarity in w.

    At interior coverage levels the benchmark Lagrangian gives
    ``p_k = alpha * p_k * g'(xi_k - w_k) * E_mu[zeta_k]``; bound-active
    points only give inequalities and are left out of the fit.
    """
    contract = _as_contract(scenario, w)
    xi = scenario.losses
    cov = contract.coverage
    flags = []
    slack = scenario.U_bar - agent_objective(scenario, mu, contract, x)
    if slack > slack_tol:
        return MultiplierFit(0.0, 0.0, ("ir-inactive",))
    if envelope_ties(scenario, contract, x):
        flags.append("envelope-tie")
    probs = density(scenario.model, x)
    a = probs * scenario.disutility.loss_prime(xi - cov) * mixed_envelope(scenario, mu, contract, x)
    interior = (probs > 0) & (cov > 1e-10) & (cov < xi - 1e-10)
    if interior.any():
        alpha = float(np.dot(probs[interior], a[interior]) / np.dot(a[interior], a[interior]))
        resid = probs[interior] - alpha * a[interior]
        norm = float(np.linalg.norm(resid))
    else:
        # only inequalities: w_k = 0 caps alpha from above, w_k = xi_k from below
        flags.append("no-interior-coverage")
        ratios_lo = [probs[k] / a[k] for k in range(xi.size) if probs[k] > 0 and a[k] > 0 and cov[k] >= xi[k] - 1e-10]
        ratios_hi = [probs[k] / a[k] for k in range(xi.size) if probs[k] > 0 and a[k] > 0 and cov[k] <= 1e-10]
        alpha = max(ratios_lo) if ratios_lo else (min(ratios_hi) if ratios_hi else 0.0)
        norm = 0.0
    if alpha < 0.0:
        flags.append("alpha-clamped")
        log.warning("negative IR multiplier fit %.3g clamped to 0", alpha)
        alpha = 0.0
    return MultiplierFit(alpha, norm, tuple(flags))


def lagrangian_dx(scenario: Scenario, mu, w, x: float, alpha: float) -> float:
    """d/dx of the benchmark Lagrangian at fixed coverage and multiplier."""
    contract = _as_contract(scenario, w)
    dp = density_dx(scenario.model, x)
    return float(np.dot(dp, contract.coverage + scenario.losses)) + alpha * agent_objective_dx(scenario, mu, contract, x)


# ----------------------------------------------------------------------------
# full-information benchmark


@dataclass
class _Benchmark:
    x: float
    inner: _Inner
    value: float


def benchmark_at(scenario: Scenario, mu, x: float) -> _Inner:
    return min_coverage(scenario, mu, x)


def benchmark_dx(scenario: Scenario, mu, x: float) -> float:
    """Derivative of the benchmark value in x via the envelope theorem (re-solves w*, alpha at x)."""
    inner = min_coverage(scenario, mu, x)
    if not inner.feasible:
        raise NumericalError(f"participation infeasible at x={x}")
    fit = recover_ir_multiplier(scenario, mu, inner.w, x)
    return lagrangian_dx(scenario, mu, inner.w, x, fit.alpha)


def _minimal_cost(scenario, weights):
    xs = scenario.action_set.grid(101)
    return float(min(weights.sum() * scenario.disutility.investment(a) for a in xs))


def _full_info_action(scenario: Scenario, mu, grid_points: int, bracket=None) -> _Benchmark:
    weights = type_weights(mu, scenario.n_types)
    if bracket is None:
        xs = scenario.action_set.grid(grid_points)
    else:
        lo, hi = scenario.action_set.bounds
        xs = np.linspace(max(bracket[0], lo), min(bracket[1], hi), 5)
    inners = [min_coverage(scenario, weights, a) for a in xs]
    vals = np.array([r.cost if r.feasible else np.inf for r in inners])
    if not np.isfinite(vals).any():
        raise InfeasibleError(
            f"participation threshold U_bar={scenario.U_bar} is below the minimal achievable perceived cost",
            minimal_cost=_minimal_cost(scenario, weights),
        )
    k = _pick_min(vals, xs)
    if scenario.action_set.discrete or xs.size == 1:
        return _Benchmark(float(xs[k]), inners[k], float(vals[k]))

    def f(v):
        r = min_coverage(scenario, weights, v)
        return r.cost if r.feasible else np.inf

    df = None
    if scenario.model.smooth:
        df = lambda v: benchmark_dx(scenario, weights, v)
    x = float(_refine_interval(f, df, xs, k, scenario.model.smooth, scenario.action_set.bounds[0]))
    inner = min_coverage(scenario, weights, x)
    return _Benchmark(x, inner, inner.cost)


def solve_full_info(scenario: Scenario, mu, grid_points: int = 101, bracket=None) -> SolveReport:
    """Full-information benchmark: minimize insurer cost over (w, x) subject to participation only.

    Interval action sets are scanned on ``grid_points`` actions and the best
    bracket is polished; ``bracket`` replaces the scan by a local one.
    """
    weights = type_weights(mu, scenario.n_types)
    best = _full_info_action(scenario, weights, grid_points, bracket)
    # rounding residue from the convex solve reads as zero coverage
    contract = TabularContract(np.where(best.inner.w <= 1e-12, 0.0, best.inner.w))
    fit = recover_ir_multiplier(scenario, weights, contract, best.x)
    slack = scenario.U_bar - agent_objective(scenario, weights, contract, best.x)
    flags = list(fit.flags)
    if slack > 1e-9:
        flags.append("ir-slack")
    return SolveReport(
        contract=contract,
        action=best.x,
        objective=best.inner.cost + design_cost(scenario, weights),
        ir_slack=float(slack),
        alpha=fit.alpha,
        beta=None,
        mu=weights.copy(),
        residual_norm=fit.residual_norm,
        flags=flags,
    )


# ----------------------------------------------------------------------------
# FOC multipliers (diagnostic only)


@dataclass(frozen=True)
class FocFit:
    alpha: float
    beta: float
    residual_norm: float
    flags: tuple = ()


def fit_foc_multipliers(scenario: Scenario, mu, w, x: float) -> FocFit:
    """Least-squares (alpha, beta) for the first-order pointwise stationarity in w.

    At interior coverage levels the first-order Lagrangian gives
    ``p_k = g'(r_k) (alpha E_mu[zeta_k] p_k + beta E_mu[zeta_k] dp_k/dx)``.
    Needs a smooth family; bound-active points are left out.
    """
    contract = _as_contract(scenario, w)
    if not scenario.model.smooth:
        return FocFit(None, None, None, ("beta-undefined",))
    xi = scenario.losses
    cov = contract.coverage
    probs = density(scenario.model, x)
    dp = density_dx(scenario.model, x)
    gp = scenario.disutility.loss_prime(xi - cov)
    zeta = mixed_envelope(scenario, mu, contract, x)
    interior = (probs > 0) & (cov > 1e-10) & (cov < xi - 1e-10)
    flags = []
    if envelope_ties(scenario, contract, x):
        flags.append("envelope-tie")
    if interior.sum() < 2:
        flags.append("underdetermined")
        return FocFit(None, None, None, tuple(flags))
    A = np.column_stack([gp * zeta * probs, gp * zeta * dp])[interior]
    coef, *_ = np.linalg.lstsq(A, probs[interior], rcond=None)
    alpha, beta = float(coef[0]), float(coef[1])
    norm = float(np.linalg.norm(A @ coef - probs[interior]))
    if alpha < 0.0:
        flags.append("alpha-clamped")
        log.warning("negative IR multiplier fit %.3g clamped to 0", alpha)
        alpha = 0.0
    return FocFit(alpha, beta, norm, tuple(flags))


# ----------------------------------------------------------------------------
# hidden action


def discretize_actions(scenario: Scenario, points: int = 11) -> Scenario:
    """The scenario with an interval action set replaced by ``points`` equispaced actions."""
    if scenario.action_set.discrete:
        return scenario
    return scenario.replace(action_set=ActionSet(values=tuple(scenario.action_set.grid(points))))


def mu_grid(mu0, step: float) -> np.ndarray:
    """Simplex lattice with spacing ``step`` plus mu0 itself, in lexicographic order."""
    n = len(mu0)
    N = int(round(1.0 / step))
    if abs(N * step - 1.0) > 1e-9:
        raise DomainError(f"mu grid step {step} must divide 1")
    pts = [c for c in itertools.product(range(N + 1), repeat=n - 1) if sum(c) <= N]
    if len(pts) > 50_000:
        raise DomainError(f"mu grid with step {step} over {n} types has {len(pts)} points; use a coarser step")
    grid = np.array([list(c) + [N - sum(c)] for c in pts], dtype=float) / N
    mu0 = np.asarray(mu0, dtype=float)
    if not np.any(np.all(np.abs(grid - mu0) <= 1e-12, axis=1)):
        grid = np.vstack([grid, mu0])
    return grid


def _coverage_grid(xi, levels):
    m = xi.size
    levels = max(2, min(levels, int(200_000 ** (1.0 / m))))
    axes = [np.linspace(0.0, x, levels) for x in xi]
    return np.array(list(itertools.product(*axes)))


class _HiddenTable:
    """Perceived risk per (type, action, contract) and insurer transfer per (action, contract)."""

    def __init__(self, scenario, coverages=None, contract=None):
        self.scenario = scenario
        self.coverages = coverages
        self.contract = contract
        self.actions = np.array(scenario.action_set.values)
        xi = scenario.losses
        d = scenario.disutility
        risk = []
        cost = []
        for a in self.actions:
            probs = density(scenario.model, a)
            if contract is None:
                U = d.loss(xi - coverages) + d.investment(a)
                cost.append((coverages + xi) @ probs)
            else:
                U = random_cost(d, contract, xi, a)[None, :]
                cost.append([transfer(scenario, contract, a)])
            risk.append([evaluate_batch(t, U, probs) for t in scenario.types])
        self.risk = np.transpose(np.array(risk), (1, 0, 2))  # (type, action, contract)
        self.cost = np.array(cost)  # (action, contract)

    def contract_at(self, k):
        return self.contract if self.contract is not None else TabularContract(self.coverages[k].copy())

    def best_responses(self, weights):
        """Agent choice per contract (ties to the smallest action) and its perceived cost."""
        V = np.tensordot(weights, self.risk, axes=1)
        vmin = V.min(axis=0)
        tol = TIE_REL * np.maximum(1.0, np.abs(vmin))
        choice = np.argmax(V <= vmin + tol, axis=0)
        return choice, V[choice, np.arange(V.shape[1])]


def _exact_response(scenario, weights, contract):
    x = agent_best_response(scenario, weights, contract)
    return x, agent_objective(scenario, weights, contract, x)


def _feasible(scenario, weights, contract, action):
    x, v = _exact_response(scenario, weights, contract)
    return x == action and v <= scenario.U_bar + IR_TOL


def _relaxed_coverage(scenario, weights, action):
    """Full-information coverage at a fixed action: optimal for that action whenever IC holds."""
    inner = min_coverage(scenario, weights, action)
    if not inner.feasible:
        return None
    return inner.w if _feasible(scenario, weights, TabularContract(inner.w), action) else None


def _polish_coverage(scenario, weights, w, action, tol=1e-8):
    """Coordinate descent: lower each coverage level while IC keeps ``action`` and IR holds."""
    w = w.copy()
    for _ in range(50):
        moved = 0.0
        for k in range(w.size):
            if w[k] <= 0.0:
                continue
            trial = w.copy()
            trial[k] = 0.0
            if _feasible(scenario, weights, TabularContract(trial), action):
                moved = max(moved, w[k])
                w = trial
                continue
            lo, hi = 0.0, w[k]
            while hi - lo > tol:
                mid = 0.5 * (lo + hi)
                trial[k] = mid
                if _feasible(scenario, weights, TabularContract(trial), action):
                    hi = mid
                else:
                    lo = mid
            moved = max(moved, w[k] - hi)
            w[k] = hi
        if moved <= tol:
            break
    return w


def _reoptimize(scenario, weights, action, start):
    """Cheapest coverage found for ``action`` at ``weights``, or None when none keeps IC and IR."""
    relaxed = _relaxed_coverage(scenario, weights, action)
    if relaxed is not None:
        return relaxed
    xi = scenario.losses
    if not _feasible(scenario, weights, TabularContract(start), action):
        if not _feasible(scenario, weights, TabularContract(xi), action):
            return None
        lo, hi = 0.0, 1.0
        while hi - lo > 1e-10:
            mid = 0.5 * (lo + hi)
            if _feasible(scenario, weights, TabularContract(start + mid * (xi - start)), action):
                hi = mid
            else:
                lo = mid
        start = clip_coverage(start + hi * (xi - start), xi)
    return _polish_coverage(scenario, weights, start, action)


@dataclass
class _Candidate:
    total: float
    weights: np.ndarray
    coverage: np.ndarray  # None for a fixed contract
    action: float


def _total(scenario, weights, contract, action):
    return transfer(scenario, contract, action) + design_cost(scenario, weights)


def _mu_descent(scenario, cand: _Candidate, fixed=None, max_iter=100) -> _Candidate:
    """Projected-gradient steps along -gamma b* with the coverage re-optimized at each trial.

    b* is the Kantorovich potential, i.e. the gradient of W1 at mu.  A trial
    is accepted under an Armijo test on the predicted design-cost decrease;
    otherwise the step is halved.
    """
    mu0 = scenario.mu0.weights
    if scenario.gamma == 0.0:
        return cand
    for _ in range(max_iter):
        if w1(cand.weights, mu0) <= 1e-15:
            break
        b = w1_dual(cand.weights, mu0).b
        g = scenario.gamma * (b - b.mean())
        step = 1.0
        accepted = None
        while step > 1e-10:
            trial = project_simplex(cand.weights - step * g)
            predicted = float(np.dot(g, cand.weights - trial))
            if fixed is not None:
                contract = fixed if _feasible(scenario, trial, fixed, cand.action) else None
                cov = None
            else:
                cov = _reoptimize(scenario, trial, cand.action, cand.coverage)
                contract = None if cov is None else TabularContract(cov)
            if contract is not None:
                total = _total(scenario, trial, contract, cand.action)
                if total < cand.total and cand.total - total >= 1e-4 * max(predicted, 0.0):
                    accepted = _Candidate(total, trial, cov, cand.action)
                    break
            step /= 2.0
        if accepted is None:
            break
        cand = accepted
    return cand


def _select(values, order_keys):
    """Index of the minimal value; near-ties go to the smallest key tuple."""
    values = np.asarray(values, dtype=float)
    best = values.min()
    tol = TIE_REL * max(1.0, abs(best))
    cand = np.nonzero(values <= best + tol)[0]
    return int(min(cand, key=lambda i: order_keys[i]))


def solve_hidden_action(scenario: Scenario, contract=None, mu_step: float = None, coverage_levels: int = 41,
                        action_points: int = 11, polish: bool = True) -> SolveReport:
    """Minimize insurer cost over (w, mu, x) with x the agent's exact best response.

    Desk-scale search: mu runs over a simplex lattice (step 0.01 for two
    types, 0.05 otherwise, always containing mu0).  At every lattice point
    the candidates are the cheapest IC- and IR-feasible coverage on a product
    grid, and the full-information coverage of each action whenever the
    agent's exact best response to it is that action.  The incumbent is then
    polished by coordinate descent in w and projected-gradient steps in mu.
    A fixed ``contract`` (e.g. linear) restricts the search to mu.  Interval
    action sets are discretized to ``action_points`` actions, flagged in the
    report.
    """
    flags = []
    if not scenario.action_set.discrete:
        scenario = discretize_actions(scenario, action_points)
        flags.append("actions-discretized")
    n = scenario.n_types
    step = mu_step if mu_step is not None else (0.01 if n == 2 else 0.05)
    mus = mu_grid(scenario.mu0.weights, step)
    mu0 = scenario.mu0.weights
    xi = scenario.losses
    fixed = None
    if contract is None:
        table = _HiddenTable(scenario, coverages=_coverage_grid(xi, coverage_levels))
    else:
        fixed = _as_contract(scenario, contract)
        table = _HiddenTable(scenario, contract=fixed)
        flags.append("fixed-contract")
    cols = np.arange(table.cost.shape[1])
    cands, keys = [], []
    for j, wts in enumerate(mus):
        design = design_cost(scenario, wts)
        dist = round(w1(wts, mu0), 12)
        choice, perceived = table.best_responses(wts)
        obj = np.where(perceived <= scenario.U_bar, table.cost[choice, cols], np.inf)
        if np.isfinite(obj).any():
            k = int(np.argmin(obj))  # first occurrence: lexicographically smallest coverage
            cov = None if fixed is not None else table.coverages[k].copy()
            cands.append(_Candidate(obj[k] + design, wts.copy(), cov, float(table.actions[choice[k]])))
            keys.append((dist, j, 1))
        if fixed is None:
            acts = table.actions
            if acts.size > RELAX_ALL_ACTIONS:
                # only the actions whose grid optimum is cheapest get the (costlier) convex candidate
                per_action = [obj[choice == i].min(initial=np.inf) for i in range(acts.size)]
                acts = acts[np.argsort(per_action, kind="stable")[:2]]
            for a in acts:
                cov = _relaxed_coverage(scenario, wts, a)
                if cov is not None:
                    cands.append(_Candidate(_total(scenario, wts, TabularContract(cov), a), wts.copy(), cov,
                                            float(a)))
                    keys.append((dist, j, 0))
    if not cands:
        raise InfeasibleError(
            f"no (coverage, mu) candidate meets participation and incentive constraints at U_bar={scenario.U_bar}",
            minimal_cost=_minimal_cost(scenario, mu0),
        )
    best = cands[_select([c.total for c in cands], keys)]
    if polish:
        if fixed is None:
            cov = _polish_coverage(scenario, best.weights, best.coverage, best.action)
            best = _Candidate(_total(scenario, best.weights, TabularContract(cov), best.action), best.weights, cov,
                              best.action)
        best = _mu_descent(scenario, best, fixed)
    chosen = fixed if fixed is not None else TabularContract(best.coverage)
    x, perceived = _exact_response(scenario, best.weights, chosen)
    if x != best.action:
        raise InternalError(f"polish changed the best response from {best.action} to {x}")
    alpha = beta = norm = None
    if fixed is None:
        fit = fit_foc_multipliers(scenario, best.weights, chosen, x)
        alpha, beta, norm = fit.alpha, fit.beta, fit.residual_norm
        flags += list(fit.flags)
    return SolveReport(
        contract=chosen,
        action=x,
        objective=principal_objective(scenario, chosen, x, best.weights),
        ir_slack=float(scenario.U_bar - perceived),
        alpha=alpha,
        beta=beta,
        mu=best.weights,
        residual_norm=norm,
        flags=flags,
    )
