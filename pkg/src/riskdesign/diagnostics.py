"""First-order-approach residuals and the monotone-coverage sufficient conditions.

Everything here is diagnostic: the solvers never rely on the first-order
approach.  The conditions are evaluated on the loss grid, with forward
differences in the loss and central differences (default step 1e-4) in the
action.  ``p`` below is the density of the outcome law with respect to the
model's reference row.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .contract_solvers import _as_contract, mixed_envelope
from .core_model import OutcomeModel, Scenario, TabularContract, density, density_dx, likelihood, random_cost, type_weights
from .errors import DomainError, UnsupportedError
from .moral_hazard import h2
from .risk_measures import _avar_quantile, envelope_density, has_tie

X_STEP = 1e-4
SLACK = 1e-8


@dataclass
class CheckResult:
    """Outcome of one diagnostic: ``passed`` is None when the probe was inconclusive."""

    name: str
    passed: bool
    values: list
    flags: list = field(default_factory=list)

    @property
    def status(self) -> str:
        if self.passed is None:
            return "inconclusive"
        return "pass" if self.passed else "fail"

    def to_json(self) -> dict:
        out = {"name": self.name, "status": self.status, "values": _plain(self.values)}
        if self.flags:
            out["flags"] = list(self.flags)
        return out


def _plain(v):
    if isinstance(v, dict):
        return {k: _plain(t) for k, t in v.items()}
    if isinstance(v, (list, tuple, np.ndarray)):
        return [_plain(t) for t in v]
    if isinstance(v, (bool, np.bool_)):
        return bool(v)
    if v is None:
        return None
    return float(v)


def _require_smooth(scenario: Scenario):
    if not scenario.model.smooth:
        raise UnsupportedError("this diagnostic needs a family that is differentiable in the action")


def _cost(scenario, contract, x):
    return random_cost(scenario.disutility, contract, scenario.losses, x)


def _pattern(spec, U, probs):
    """Which grid points sit above (and at) the envelope threshold; constant between kinks."""
    if spec.kind == "expectation":
        return ()
    if spec.kind == "semideviation":
        return tuple(U > float(np.dot(U, probs)))
    t = _avar_quantile(U, probs, spec.alpha)
    return tuple(U > t) + tuple(U == t)


def _envelopes(scenario, contract, x):
    U = _cost(scenario, contract, x)
    probs = density(scenario.model, x)
    return np.array([envelope_density(t, U, probs).weights for t in scenario.types])


def _envelope_dx(scenario, contract, x, h):
    """x-difference of every type's envelope and whether the probe crossed a kink.

    Central inside the action interval, one-sided against its bounds.
    """
    lo, hi = scenario.action_set.bounds
    a, b = max(x - h, lo), min(x + h, hi)
    U = {v: _cost(scenario, contract, v) for v in (a, x, b)}
    P = {v: density(scenario.model, v) for v in U}
    kink = any(
        has_tie(t, U[v], P[v]) or _pattern(t, U[v], P[v]) != _pattern(t, U[x], P[x])
        for t in scenario.types
        for v in U
    )
    d = (_envelopes(scenario, contract, b) - _envelopes(scenario, contract, a)) / (b - a)
    return d, kink


# ----------------------------------------------------------------------------
# first-order residuals


def foc_ic_residual(scenario: Scenario, mu, w, x: float) -> float:
    """Derivative of the agent's perceived cost in x: the first-order IC residual."""
    _require_smooth(scenario)
    return h2(scenario, mu, w, x)


@dataclass
class PointwiseResidual:
    values: np.ndarray
    interior: np.ndarray
    flags: list = field(default_factory=list)

    @property
    def max_interior(self) -> float:
        return float(np.abs(self.values[self.interior]).max()) if self.interior.any() else 0.0

    def to_json(self) -> dict:
        return {
            "values": _plain(self.values),
            "interior": [bool(v) for v in self.interior],
            "max_interior": self.max_interior,
            "flags": list(self.flags),
        }


def foc_pointwise_residual(scenario: Scenario, mu, w, x: float, alpha: float, beta: float) -> PointwiseResidual:
    """Residual of the pointwise stationarity in w, one value per grid point.

    residual_k = -p_k + g'(r_k) (alpha E_mu[zeta_k] p_k + beta E_mu[zeta_k] dp_k/dx)

    with r = xi - w and the envelope held locally constant in x.  At a bound
    (w_k = 0 or w_k = xi_k) stationarity is an inequality; those points are
    marked not interior and carry their raw value.
    """
    _require_smooth(scenario)
    contract = _as_contract(scenario, w)
    xi = scenario.losses
    cov = contract.coverage
    model = scenario.model
    p = likelihood(model, x)
    dp = density_dx(model, x) / model.reference_probs
    zeta = mixed_envelope(scenario, mu, contract, x)
    gp = scenario.disutility.loss_prime(xi - cov)
    values = -p + gp * (alpha * zeta * p + beta * zeta * dp)
    interior = (p > 0) & (cov > 1e-10) & (cov < xi - 1e-10)
    flags = []
    U = _cost(scenario, contract, x)
    if any(has_tie(t, U, density(model, x)) for t in scenario.types):
        flags.append("envelope-tie")
    return PointwiseResidual(values, interior, flags)


# ----------------------------------------------------------------------------
# sufficient conditions for monotone coverage


def check_c1(scenario: Scenario, mu, w, x: float, x_step: float = X_STEP) -> CheckResult:
    """Grid sums of p and of each type's envelope must both increase in x.

    The integrals are read as unweighted grid sums of the density values.
    """
    _require_smooth(scenario)
    contract = _as_contract(scenario, w)
    model = scenario.model
    dsum_p = float((density_dx(model, x) / model.reference_probs).sum())
    dzeta, kink = _envelope_dx(scenario, contract, x, x_step)
    per_type = dzeta.sum(axis=1)
    passed = bool(dsum_p > 0 and np.all(per_type > 0))
    flags = ["envelope-kink"] if kink else []
    return CheckResult("C1", None if kink else passed, {"d_sum_p": dsum_p, "d_sum_zeta": per_type}, flags)


def check_c2(scenario: Scenario, mu, w, x: float, x_step: float = X_STEP) -> CheckResult:
    """Forward loss-differences of E_mu[d zeta / dx] must be nonnegative."""
    _require_smooth(scenario)
    contract = _as_contract(scenario, w)
    weights = type_weights(mu, scenario.n_types)
    dzeta, kink = _envelope_dx(scenario, contract, x, x_step)
    mixed = weights @ dzeta
    values = np.diff(mixed) / np.diff(scenario.losses)
    if kink:
        return CheckResult("C2", None, values, ["envelope-kink"])
    return CheckResult("C2", bool(np.all(values >= -SLACK)), values)


def _ratio(model: OutcomeModel, x: float):
    """(dp/dx)/p on the positive-probability points, plus their mask."""
    probs = density(model, x)
    live = probs > 0
    return density_dx(model, x)[live] / probs[live], live


def check_c3(scenario: Scenario, mu, w, x: float, alpha: float, beta: float) -> CheckResult:
    """Loss-differences of E_mu[zeta] (alpha + beta (dp/dx)/p) must be nonnegative.

    The envelopes are piecewise constant in the loss, so across a jump the
    difference is taken with the envelope frozen at the left point (the
    derivative on the smooth part); such steps are flagged.
    """
    _require_smooth(scenario)
    contract = _as_contract(scenario, w)
    zeta = mixed_envelope(scenario, mu, contract, x)
    ratio, live = _ratio(scenario.model, x)
    flags = []
    if not live.all():
        flags.append("zero-probability-excluded")
    f = alpha + beta * ratio
    z = zeta[live]
    xi = scenario.losses[live]
    values = z[:-1] * np.diff(f) / np.diff(xi)
    jumps = np.nonzero(np.abs(np.diff(z)) > 1e-12)[0]
    if jumps.size:
        flags.append("envelope-jump")
    raw = np.diff(z * f) / np.diff(xi)
    passed = bool(np.all(values >= -SLACK))
    return CheckResult("C3", passed, {"values": values, "product_differences": raw}, flags)


def check_mlr(model: OutcomeModel, x: float) -> bool:
    """(dp/dx)/p nondecreasing across the grid (zero-probability points skipped)."""
    if not model.smooth:
        raise UnsupportedError("the likelihood-ratio check needs a differentiable family")
    ratio, _ = _ratio(model, x)
    return bool(np.all(np.diff(ratio) >= -SLACK))


def mlr_report(model: OutcomeModel, x: float) -> CheckResult:
    """Both orientations of the likelihood-ratio ordering, reported raw."""
    ratio, live = _ratio(model, x)
    d = np.diff(ratio)
    flags = [] if live.all() else ["zero-probability-excluded"]
    return CheckResult(
        "MLR",
        bool(np.all(d >= -SLACK)),
        {"ratio": ratio, "nondecreasing": bool(np.all(d >= -SLACK)), "nonincreasing": bool(np.all(d <= SLACK))},
        flags,
    )


def check_monotone_contract(contract) -> bool:
    """True iff the tabular coverage never drops along the loss grid."""
    if not isinstance(contract, TabularContract):
        contract = TabularContract(np.asarray(contract, dtype=float))
    w = contract.coverage
    return bool(np.all(w[1:] >= w[:-1] - 1e-12))


def monotonicity_report(scenario: Scenario, mu, w, x: float, alpha: float, beta: float,
                        x_step: float = X_STEP) -> list:
    """All diagnostics as JSON-ready dictionaries."""
    contract = _as_contract(scenario, w)
    if not isinstance(contract, TabularContract):
        raise DomainError("monotonicity diagnostics need a tabular contract")
    out = [
        check_c1(scenario, mu, contract, x, x_step).to_json(),
        check_c2(scenario, mu, contract, x, x_step).to_json(),
        check_c3(scenario, mu, contract, x, alpha, beta).to_json(),
        mlr_report(scenario.model, x).to_json(),
        {"name": "monotone-contract", "status": "pass" if check_monotone_contract(contract) else "fail",
         "values": _plain(contract.coverage)},
    ]
    res = foc_pointwise_residual(scenario, mu, contract, x, alpha, beta)
    out.append({"name": "foc-pointwise", "status": "pass" if res.max_interior <= 1e-6 else "fail",
                "values": _plain(res.values), "flags": res.flags})
    return out
