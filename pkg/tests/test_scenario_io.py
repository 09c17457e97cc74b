import copy
import json

import pytest

from riskdesign.errors import SchemaError
from riskdesign.scenario_io import dump_scenario, load_scenario, scenario_from_json, scenario_to_json

from .conftest import smooth_scenario, tabular_scenario

BASE = {
    "name": "demo",
    "grid": [1, 2, 3],
    "family": {"kind": "linear", "p_L": [0.3, 0.4, 0.3], "p_H": [0.5, 0.3, 0.2]},
    "types": [{"kind": "expectation"}, {"kind": "semideviation", "kappa": 1}],
    "mu0": [0.9, 0.1],
    "disutility": {"g": "quadratic", "m": 0.28},
    "U_bar": 4.0,
    "gamma": 0.01,
    "action_set": {"values": [0, 1]},
}


def test_round_trip(tmp_path):
    for sc in (smooth_scenario(), tabular_scenario(), scenario_from_json(BASE)):
        path = tmp_path / "s.json"
        dump_scenario(sc, path)
        back = load_scenario(path)
        assert scenario_to_json(back) == scenario_to_json(sc)


def _broken(path, value):
    doc = copy.deepcopy(BASE)
    *head, last = path
    node = doc
    for key in head:
        node = node[key]
    if value is KeyError:
        del node[last]
    else:
        node[last] = value
    return doc


@pytest.mark.parametrize(
    "path, value, field",
    [
        (("U_bar",), KeyError, "U_bar"),
        (("gamma",), "fast", "gamma"),
        (("colour",), 1, "colour"),
        (("family", "kind"), "beta", "family.kind"),
        (("family", "p_L"), [0.5, 0.6, 0.3], "family"),
        (("types", 1, "kappa"), 2.0, "types[1]"),
        (("types", 0, "weight"), 1, "types[0]"),
        (("mu0",), [0.5, 0.6], "mu0"),
        (("grid",), [1, 1, 3], "grid"),
        (("action_set",), {"values": [0], "interval": [0, 1]}, "action_set"),
        (("action_set",), {"interval": [0, 1, 2]}, "action_set.interval"),
        (("disutility", "g"), "log", "disutility"),
        (("disutility", "m"), float("nan"), "disutility.m"),
    ],
)
def test_schema_errors_name_the_field(path, value, field):
    with pytest.raises(SchemaError) as err:
        scenario_from_json(_broken(path, value))
    assert field in str(err.value)


def test_load_errors(tmp_path):
    with pytest.raises(SchemaError, match="cannot read"):
        load_scenario(tmp_path / "missing.json")
    bad = tmp_path / "bad.json"
    bad.write_text("{not json")
    with pytest.raises(SchemaError, match="invalid JSON"):
        load_scenario(bad)
    top = tmp_path / "list.json"
    top.write_text(json.dumps([1, 2]))
    with pytest.raises(SchemaError):
        load_scenario(top)
