import csv
import json
import math
from pathlib import Path

import pytest

from riskdesign.cli import main, rounded

HERE = Path(__file__).parent
FIXTURES = HERE / "fixtures"
GOLDEN = HERE / "golden"

GOLDEN_RUNS = {
    "smooth-full-info": ["solve", "--scenario", str(FIXTURES / "smooth.json")],
    "mlr-full-info": ["solve", "--scenario", str(FIXTURES / "mlr.json")],
    "tabular-full-info": ["solve", "--scenario", str(FIXTURES / "tabular.json")],
    "tabular-hidden": ["solve", "--mode", "hidden", "--scenario", str(FIXTURES / "tabular.json")],
    "case-study": ["case-study"],
    "case-study-evaluate": ["evaluate", "--scenario", "case-study"],
    "mlr-monotonicity": ["check-monotonicity", "--scenario", str(FIXTURES / "mlr.json")],
}


def assert_close(got, want, where="report"):
    """Numbers agree to 1e-7 relative (1e-9 absolute); everything else exactly."""
    if isinstance(want, dict):
        assert set(got) == set(want), where
        for k in want:
            assert_close(got[k], want[k], f"{where}.{k}")
    elif isinstance(want, list):
        assert len(got) == len(want), where
        for i, (g, w) in enumerate(zip(got, want)):
            assert_close(g, w, f"{where}[{i}]")
    elif isinstance(want, float) and not isinstance(want, bool):
        assert math.isclose(got, want, rel_tol=1e-7, abs_tol=1e-9), f"{where}: {got} != {want}"
    else:
        assert got == want, where


def _cell(text):
    try:
        return float(text)
    except ValueError:
        return text


def _read_csv(path):
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    return [rows[0]] + [[_cell(v) for v in r] for r in rows[1:]]


@pytest.mark.parametrize("name", sorted(GOLDEN_RUNS))
def test_golden(name, tmp_path, capsys):
    assert main(GOLDEN_RUNS[name] + ["--out", str(tmp_path)]) == 0
    capsys.readouterr()
    want_dir = GOLDEN / name
    for path in sorted(want_dir.iterdir()):
        got = tmp_path / path.name
        assert got.exists(), path.name
        if path.suffix == ".json":
            assert_close(json.loads(got.read_text()), json.loads(path.read_text()), path.name)
        else:
            want_rows, got_rows = _read_csv(path), _read_csv(got)
            assert got_rows[0] == want_rows[0]
            for g, w in zip(got_rows[1:], want_rows[1:]):
                for a, b in zip(g, w):
                    if isinstance(b, float):
                        assert math.isclose(a, b, rel_tol=1e-7, abs_tol=1e-9), path.name
                    else:
                        assert a == b


def test_stdout_json(capsys):
    assert main(["imh", "--scenario", "case-study"]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["imh"] == 1.0
    assert main(["imh", "--scenario", "case-study", "--mu", "0.4,0.6"]) == 0
    assert json.loads(capsys.readouterr().out)["imh"] == 0.0


def test_csv_output(capsys):
    assert main(["evaluate", "--scenario", "case-study", "--csv"]) == 0
    out = capsys.readouterr().out.splitlines()
    assert out[0] == "type,weight,risk"


def test_grad_t_command(capsys):
    assert main(["grad-t", "--scenario", str(FIXTURES / "smooth.json")]) == 0
    doc = json.loads(capsys.readouterr().out)
    assert doc["frozen_contract"] is True
    assert len(doc["grad_T"]) == 2


def test_design_step_without_gradient_is_numerical_failure(capsys):
    # the preset has two isolated actions, so the gradient preconditions fail
    assert main(["design-step", "--scenario", "case-study"]) == 4
    assert "numerical failure" in capsys.readouterr().err


@pytest.mark.parametrize(
    "argv, code",
    [
        (["solve", "--scenario", "does-not-exist.json"], 2),
        (["imh", "--scenario", "case-study", "--mu", "0.5,0.6"], 2),
        (["imh", "--scenario", "case-study", "--mu", "a,b"], 2),
        (["evaluate", "--scenario", "case-study", "--contract", "linear:0.5"], 2),
        (["evaluate", "--scenario", "case-study", "--x", "0.5"], 2),
        (["case-study", "--c", "1.5"], 2),
        (["solve"], 2),
    ],
)
def test_input_errors(argv, code, capsys):
    assert main(argv) == code
    assert "input error" in capsys.readouterr().err


def test_infeasible_exit_code(tmp_path, capsys):
    doc = json.loads((FIXTURES / "tabular.json").read_text())
    doc["U_bar"] = 0.1
    doc["action_set"] = {"values": [1.0]}
    path = tmp_path / "tight.json"
    path.write_text(json.dumps(doc))
    assert main(["solve", "--scenario", str(path)]) == 3
    assert "minimal achievable perceived cost" in capsys.readouterr().err


def test_unknown_command_exits_with_usage():
    with pytest.raises(SystemExit) as err:
        main(["frobnicate"])
    assert err.value.code == 2


def test_rounded():
    assert rounded({"a": [1.0 / 3.0, True, 2]}) == {"a": [0.333333333333, True, 2]}
