"""Command-line entry point.

Exit codes: 0 success, 2 input error, 3 infeasibility, 4 numerical failure.
Numbers are written with 12 significant digits; CSV always uses '.' as the
decimal separator.
"""
from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
from pathlib import Path

import numpy as np

from .case_study import CaseParams, case_study_report, case_study_scenario, contract_of
from .contract_solvers import (
    agent_best_response,
    agent_costs_by_type,
    agent_objective,
    principal_objective,
    solve_full_info,
    solve_hidden_action,
)
from .core_model import LinearContract, TabularContract, check_simplex, density, random_cost
from .diagnostics import monotonicity_report
from .errors import DomainError, InfeasibleError, InternalError, NumericalError, RiskDesignError
from .moral_hazard import design_step, grad_T, imh_report, mitigating_direction
from .scenario_io import load_scenario
from .transport import w1, w1_dual

PRESET = "case-study"
DIGITS = 12


def _fmt(v):
    return float(f"{v:.{DIGITS}g}")


def rounded(obj):
    """Recursively round floats to 12 significant digits for stable reports."""
    if isinstance(obj, dict):
        return {k: rounded(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [rounded(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return [rounded(v) for v in obj.tolist()]
    if isinstance(obj, (bool, np.bool_)):
        return bool(obj)
    if isinstance(obj, (int, np.integer)):
        return int(obj)
    if isinstance(obj, (float, np.floating)):
        return _fmt(float(obj))
    return obj


def _floats(text, what):
    try:
        return [float(t) for t in text.split(",") if t.strip()]
    except ValueError as exc:
        raise DomainError(f"{what}: expected a comma-separated list of numbers, got {text!r}") from exc


def _scenario(args):
    if args.scenario is None:
        raise DomainError("--scenario is required (a JSON file or 'case-study')")
    if args.scenario == PRESET and not Path(PRESET).exists():
        return case_study_scenario()
    return load_scenario(args.scenario)


def _mu(args, scenario):
    if args.mu is None:
        return scenario.mu0.weights.copy()
    mu = _floats(args.mu, "--mu")
    if len(mu) != scenario.n_types:
        raise DomainError(f"--mu has {len(mu)} weights, the scenario has {scenario.n_types} types")
    return check_simplex(mu, "--mu", tol=1e-9)


def _contract(args, scenario):
    """--contract accepts 'w1,w2,...' (tabular coverage) or 'linear:c,premium'."""
    if args.contract is None:
        return None
    text = args.contract.strip()
    if text.startswith("linear:"):
        c, p = (_floats(text[len("linear:"):], "--contract") + [None, None])[:2]
        if p is None:
            raise DomainError("--contract linear:c,premium needs both values")
        return LinearContract(c, p)
    return TabularContract(_floats(text, "--contract")).validate(scenario.model.grid)


def _fixed_contract(args, scenario):
    """--contract, falling back to the preset's linear contract for the built-in case study."""
    contract = _contract(args, scenario)
    if contract is None and args.scenario == PRESET and not Path(PRESET).exists():
        return contract_of(CaseParams())
    return contract


def _action(args, scenario):
    if args.x is None:
        return None
    return scenario.check_action(args.x)


def _table_csv(header, rows):
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    for r in rows:
        writer.writerow([repr(_fmt(v)) if isinstance(v, float) else v for v in r])
    return buf.getvalue()


class Output:
    def __init__(self, args):
        self.args = args
        self.out = Path(args.out) if args.out else None
        if self.out is not None:
            self.out.mkdir(parents=True, exist_ok=True)

    def report(self, doc, name="report.json"):
        text = json.dumps(rounded(doc), indent=2) + "\n"
        if self.out is not None:
            (self.out / name).write_text(text, encoding="utf-8")
        if not self.args.csv:
            sys.stdout.write(text)

    def table(self, header, rows, name):
        text = _table_csv(header, rows)
        if self.out is not None:
            (self.out / name).write_text(text, encoding="utf-8")
        if self.args.csv:
            sys.stdout.write(text)


# ----------------------------------------------------------------------------
# commands


def cmd_evaluate(args, out: Output) -> int:
    sc = _scenario(args)
    mu = _mu(args, sc)
    contract = _contract(args, sc) or TabularContract(np.zeros(len(sc.model.grid)))
    x = _action(args, sc)
    if x is None:
        x = agent_best_response(sc, mu, contract)
    per_type = agent_costs_by_type(sc, contract, x)
    probs = density(sc.model, x)
    # translation equivariance: strip the investment, then split risk into mean plus excess per type
    base = per_type - sc.disutility.investment(x)
    mean = float(np.dot(probs, random_cost(sc.disutility, contract, sc.losses, x))) - sc.disutility.investment(x)
    doc = {
        "scenario": sc.name,
        "mu": mu,
        "action": x,
        "probs": probs,
        "agent_objective": agent_objective(sc, mu, contract, x),
        "principal_objective": principal_objective(sc, contract, x, mu),
        "W1": w1(mu, sc.mu0.weights),
        "investment": sc.disutility.investment(x),
        "expected_cost": mean,
        "mixture_excess": float(np.dot(mu, base - mean)),
        "risk_by_type": [{"type": str(t), "weight": float(wi), "risk": float(r), "excess": float(e - mean)}
                         for t, wi, r, e in zip(sc.types, mu, per_type, base)],
    }
    out.report(doc)
    out.table(["type", "weight", "risk"], [[str(t), float(wi), float(r)] for t, wi, r in zip(sc.types, mu, per_type)],
              "risk_by_type.csv")
    return 0


def _sweep(sc, mode, contract):
    if sc.n_types != 2:
        return []
    rows = []
    for mu2 in np.linspace(0.0, 1.0, 11):
        mu = np.array([1.0 - mu2, mu2])
        if mode == "full-info":
            try:
                rep = solve_full_info(sc, mu)
                rows.append([float(mu2), rep.action, rep.objective, rep.ir_slack])
            except InfeasibleError:
                rows.append([float(mu2), "", "", ""])
        else:
            c = contract
            if c is None:
                rep = solve_full_info(sc, mu)
                c = rep.contract
            x = agent_best_response(sc, mu, c)
            rows.append([float(mu2), x, principal_objective(sc, c, x, mu), sc.U_bar - agent_objective(sc, mu, c, x)])
    return rows


def cmd_solve(args, out: Output) -> int:
    sc = _scenario(args)
    contract = _fixed_contract(args, sc) if args.mode == "hidden" else None
    if args.mode == "full-info":
        rep = solve_full_info(sc, _mu(args, sc))
    else:
        rep = solve_hidden_action(sc, contract=contract, mu_step=args.step)
    out.report(rep.to_json())
    header = ["mu2", "action", "objective", "ir_slack"]
    out.table(header, _sweep(sc, args.mode, contract), "sweep.csv")
    return 0


def cmd_imh(args, out: Output) -> int:
    sc = _scenario(args)
    mu = _mu(args, sc)
    rep = imh_report(sc, mu, _fixed_contract(args, sc))
    out.report({"mu": mu, **rep.to_json()})
    return 0


def cmd_grad_t(args, out: Output) -> int:
    sc = _scenario(args)
    mu = _mu(args, sc)
    grad = grad_T(sc, mu, freeze_contract=not args.follow_contract)
    b = w1_dual(mu, sc.mu0.weights).b
    d = mitigating_direction(grad, b)
    out.report({
        "mu": mu,
        "grad_T": grad,
        "frozen_contract": not args.follow_contract,
        "b_star": b,
        "direction": d,
        "feasible": d is not None,
    })
    return 0


def cmd_design_step(args, out: Output) -> int:
    sc = _scenario(args)
    mu = _mu(args, sc)
    contract = _fixed_contract(args, sc)
    c_step = 1e-3 if args.step is None else args.step
    rep = imh_report(sc, mu, contract)
    if rep.grad_T is None:
        raise NumericalError("; ".join(rep.flags) or "gradient of T unavailable for this scenario")
    if rep.direction is None:
        out.report({"mu": mu, "grad_T": rep.grad_T, "b_star": rep.b_star, "direction": None,
                    "message": "no beneficial direction", "flags": ["no-beneficial-direction"]})
        return 0
    _, step = design_step(sc, mu, rep.direction, c_step, contract, T_before=rep.imh)
    doc = {"grad_T": rep.grad_T, "b_star": rep.b_star, "direction": rep.direction, **step.to_json()}
    out.report(doc)
    return 0 if step.accepted else 4


def cmd_check_monotonicity(args, out: Output) -> int:
    sc = _scenario(args)
    mu = _mu(args, sc)
    contract = _contract(args, sc)
    if contract is None:
        rep = solve_full_info(sc, mu)
        contract, x, alpha, beta = rep.contract, rep.action, rep.alpha, 0.0
    else:
        x = _action(args, sc)
        x = agent_best_response(sc, mu, contract) if x is None else x
        alpha, beta = args.alpha, args.beta
    checks = monotonicity_report(sc, mu, contract, x, alpha, beta,
                                 x_step=1e-4 if args.step is None else args.step)
    out.report({"mu": mu, "action": x, "alpha": alpha, "beta": beta,
                "coverage": contract.coverage, "checks": checks})
    return 0


def cmd_case_study(args, out: Output) -> int:
    params = CaseParams(c=args.c, premium=args.premium, kappa=args.kappa, m=args.m, mu2_0=args.mu2_0,
                        gamma=args.gamma)
    out.report(case_study_report(params))
    return 0


COMMANDS = {
    "evaluate": cmd_evaluate,
    "solve": cmd_solve,
    "imh": cmd_imh,
    "grad-t": cmd_grad_t,
    "design-step": cmd_design_step,
    "check-monotonicity": cmd_check_monotonicity,
    "case-study": cmd_case_study,
}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--scenario", help="scenario JSON file, or 'case-study' for the built-in preset")
    common.add_argument("--out", help="directory for report.json and CSV tables")
    common.add_argument("--mu", help="type distribution as a comma list (default: mu0)")
    common.add_argument("--step", type=float, help="step size (design step, mu grid or x probe, per command)")
    fmt = common.add_mutually_exclusive_group()
    fmt.add_argument("--json", action="store_true", help="print the JSON report (default)")
    fmt.add_argument("--csv", action="store_true", help="print the CSV table instead")
    common.add_argument("-v", "--verbose", action="store_true")

    parser = argparse.ArgumentParser(prog="riskdesign", description="Risk-preference design for insurance contracts")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("evaluate", parents=[common], help="agent and insurer objectives with a per-type breakdown")
    p.add_argument("--contract", help="'w1,w2,...' coverage or 'linear:c,premium' (default: no coverage)")
    p.add_argument("--x", type=float, help="action (default: agent best response)")

    p = sub.add_parser("solve", parents=[common], help="full-information or hidden-action contract design")
    p.add_argument("--mode", choices=("full-info", "hidden"), default="full-info")
    p.add_argument("--contract", help="fixed contract for the hidden-action search over mu (preset: its own)")

    p = sub.add_parser("imh", parents=[common], help="intensity of moral hazard x* - x^a")
    p.add_argument("--contract", help="fixed contract (default: the full-information coverage, or the preset's)")

    p = sub.add_parser("grad-t", parents=[common], help="sensitivity of the IMH to the type distribution")
    p.add_argument("--follow-contract", action="store_true",
                   help="let the benchmark coverage follow mu instead of holding it fixed")

    p = sub.add_parser("design-step", parents=[common], help="one step along a mitigating direction")
    p.add_argument("--contract", help="fixed contract (default: the full-information coverage, or the preset's)")

    p = sub.add_parser("check-monotonicity", parents=[common], help="first-order and monotone-coverage diagnostics")
    p.add_argument("--contract", help="coverage to check (default: the full-information solution)")
    p.add_argument("--x", type=float, help="action for a given contract (default: agent best response)")
    p.add_argument("--alpha", type=float, default=0.0)
    p.add_argument("--beta", type=float, default=0.0)

    p = sub.add_parser("case-study", parents=[common], help="built-in linear-contract case study")
    defaults = CaseParams()
    p.add_argument("--c", type=float, default=defaults.c, help="coverage fraction in (0, 1)")
    p.add_argument("--premium", type=float, default=defaults.premium)
    p.add_argument("--kappa", type=float, default=defaults.kappa)
    p.add_argument("--m", type=float, default=defaults.m, help="investment cost of x_H over x_L")
    p.add_argument("--mu2-0", dest="mu2_0", type=float, default=defaults.mu2_0)
    p.add_argument("--gamma", type=float, default=defaults.gamma)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s %(message)s")
    try:
        return COMMANDS[args.command](args, Output(args))
    except InfeasibleError as exc:
        msg = str(exc)
        if getattr(exc, "minimal_cost", None) is not None:
            msg += f" (minimal achievable perceived cost {exc.minimal_cost:.{DIGITS}g})"
        print(f"infeasible: {msg}", file=sys.stderr)
        return 3
    except (NumericalError, InternalError) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 4
    except DomainError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return 2
    except RiskDesignError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return exc.exit_code


if __name__ == "__main__":
    sys.exit(main())
