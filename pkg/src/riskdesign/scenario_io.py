"""Scenario files under a strict JSON schema.

Unknown fields are rejected and every error names the offending field, so a
typo never silently falls back to a default.  The layout is documented in
docs/schema.md.
"""
from __future__ import annotations

import json
import math
from pathlib import Path

from .core_model import (
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
from .errors import DomainError, SchemaError
from .risk_measures import RiskMeasureSpec

TOP_REQUIRED = ("grid", "family", "types", "mu0", "U_bar", "gamma", "action_set")
TOP_OPTIONAL = ("name", "reference_probs", "disutility")


def _fields(doc, where, required, optional=()):
    if not isinstance(doc, dict):
        raise SchemaError(f"{where}: expected an object")
    unknown = sorted(set(doc) - set(required) - set(optional))
    if unknown:
        raise SchemaError(f"{where}: unknown field(s) {', '.join(unknown)}")
    for key in required:
        if key not in doc:
            raise SchemaError(f"{where}: missing field '{key}'")


def _number(v, where):
    if isinstance(v, bool) or not isinstance(v, (int, float)) or not math.isfinite(v):
        raise SchemaError(f"{where}: expected a finite number, got {v!r}")
    return float(v)


def _numbers(v, where):
    if not isinstance(v, list) or not v:
        raise SchemaError(f"{where}: expected a non-empty list of numbers")
    return [_number(t, f"{where}[{i}]") for i, t in enumerate(v)]


def _built(where, make):
    try:
        return make()
    except SchemaError:
        raise
    except DomainError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def _family(doc):
    if not isinstance(doc, dict) or "kind" not in doc:
        raise SchemaError("family: missing field 'kind'")
    if doc["kind"] == "linear":
        _fields(doc, "family", ("kind", "p_L", "p_H"))
        return _built("family", lambda: LinearFamily(_numbers(doc["p_L"], "family.p_L"), _numbers(doc["p_H"], "family.p_H")))
    if doc["kind"] == "tabular":
        _fields(doc, "family", ("kind", "actions", "rows"))
        if not isinstance(doc["rows"], list) or not doc["rows"]:
            raise SchemaError("family.rows: expected a non-empty list of rows")
        rows = [_numbers(r, f"family.rows[{i}]") for i, r in enumerate(doc["rows"])]
        return _built("family", lambda: TabularFamily(_numbers(doc["actions"], "family.actions"), rows))
    raise SchemaError(f"family.kind: expected 'linear' or 'tabular', got {doc['kind']!r}")


def _types(doc):
    if not isinstance(doc, list) or not doc:
        raise SchemaError("types: expected a non-empty list")
    out = []
    for i, t in enumerate(doc):
        where = f"types[{i}]"
        _fields(t, where, ("kind",), ("kappa", "alpha"))
        for key in ("kappa", "alpha"):
            if key in t:
                _number(t[key], f"{where}.{key}")
        out.append(_built(where, lambda: RiskMeasureSpec.from_json(t)))
    return TypeSpace(out)


def _disutility(doc):
    if doc is None:
        return DisutilitySpec()
    _fields(doc, "disutility", (), ("g", "power", "m", "m2"))
    kwargs = {k: _number(doc[k], f"disutility.{k}") for k in ("power", "m", "m2") if k in doc}
    if "g" in doc:
        if not isinstance(doc["g"], str):
            raise SchemaError("disutility.g: expected a string")
        kwargs["g"] = doc["g"]
    return _built("disutility", lambda: DisutilitySpec(**kwargs))


def _action_set(doc):
    if not isinstance(doc, dict) or len(doc) != 1 or not set(doc) <= {"values", "interval"}:
        raise SchemaError("action_set: expected exactly one of 'values' or 'interval'")
    if "values" in doc:
        return _built("action_set", lambda: ActionSet(values=_numbers(doc["values"], "action_set.values")))
    bounds = _numbers(doc["interval"], "action_set.interval")
    if len(bounds) != 2:
        raise SchemaError("action_set.interval: expected [low, high]")
    return _built("action_set", lambda: ActionSet(interval=tuple(bounds)))


def scenario_from_json(doc: dict) -> Scenario:
    _fields(doc, "scenario", TOP_REQUIRED, TOP_OPTIONAL)
    grid = _built("grid", lambda: OutcomeGrid(_numbers(doc["grid"], "grid")))
    ref = doc.get("reference_probs")
    ref = None if ref is None else _numbers(ref, "reference_probs")
    model = _built("family", lambda: OutcomeModel(grid, _family(doc["family"]), ref))
    types = _types(doc["types"])
    mu0 = _built("mu0", lambda: TypeDistribution(_numbers(doc["mu0"], "mu0")))
    name = doc.get("name", "scenario")
    if not isinstance(name, str):
        raise SchemaError("name: expected a string")
    return _built(
        "scenario",
        lambda: Scenario(
            model=model,
            types=types,
            mu0=mu0,
            disutility=_disutility(doc.get("disutility")),
            U_bar=_number(doc["U_bar"], "U_bar"),
            gamma=_number(doc["gamma"], "gamma"),
            action_set=_action_set(doc["action_set"]),
            name=name,
        ),
    )


def scenario_to_json(scenario: Scenario) -> dict:
    fam = scenario.model.family
    if isinstance(fam, LinearFamily):
        family = {"kind": "linear", "p_L": fam.p_low.tolist(), "p_H": fam.p_high.tolist()}
    else:
        family = {"kind": "tabular", "actions": list(fam.actions), "rows": fam.rows.tolist()}
    acts = scenario.action_set
    d = scenario.disutility
    return {
        "name": scenario.name,
        "grid": scenario.losses.tolist(),
        "reference_probs": scenario.model.reference_probs.tolist(),
        "family": family,
        "types": [t.to_json() for t in scenario.types],
        "mu0": scenario.mu0.weights.tolist(),
        "disutility": {"g": d.g, "power": d.power, "m": d.m, "m2": d.m2},
        "U_bar": scenario.U_bar,
        "gamma": scenario.gamma,
        "action_set": {"values": list(acts.values)} if acts.discrete else {"interval": list(acts.interval)},
    }


def load_scenario(path) -> Scenario:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SchemaError(f"cannot read scenario file {path}: {exc.strerror or exc}") from exc
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: invalid JSON at line {exc.lineno}: {exc.msg}") from exc
    return scenario_from_json(doc)


def dump_scenario(scenario: Scenario, path) -> None:
    Path(path).write_text(json.dumps(scenario_to_json(scenario), indent=2) + "\n", encoding="utf-8")
