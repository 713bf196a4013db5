"""Command line interface: classify, trace, model, member, prove, check.

Exit codes: 0 on success/accepted/found, 1 on not-found/rejected, 2 on usage
or parse errors.  ``COUP_DEFAULT_BUDGETS`` can override the default budgets
with a comma-separated list like ``depth=256,trace=32,unfold=64,assume=32``.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path
from typing import Optional

from .formulas import (
    Atom,
    Formula,
    FormulaError,
    Fragment,
    Program,
    classify_atom,
    formula_closed,
    is_core,
    is_goal,
    is_program_clause,
)
from .kernel import CheckReport, check_certificate
from .oracle import IN, OUT, UNKNOWN, OracleConfig, enumerate_model, gfp_member, make_rational_atom
from .search import (
    FINITE_FAILURE,
    FINITE_SUCCESS,
    LOOP_FOUND,
    SearchConfig,
    prove,
    sld_trace,
)
from .syntax import (
    ParseError,
    TheoryDocument,
    infer_free_var_types,
    parse_certificate,
    parse_formula,
    parse_theory,
    print_certificate,
    print_formula,
)
from .terms import TermError

_BUDGET_KEYS = ("depth", "trace", "unfold", "assume", "oracle-depth")


def _env_budgets() -> dict[str, int]:
    raw = os.environ.get("COUP_DEFAULT_BUDGETS", "")
    out: dict[str, int] = {}
    for part in raw.split(","):
        part = part.strip()
        if not part:
            continue
        key, _, value = part.partition("=")
        if key.strip() in _BUDGET_KEYS and value.strip().isdigit():
            out[key.strip()] = int(value)
    return out


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="coup",
        description="Coinductive Horn-clause proving: check certificates, "
        "search for coinductive invariants, and query greatest-model membership.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, goal_meta: Optional[str]) -> None:
        p.add_argument("theory", help="theory file (.th)")
        if goal_meta:
            p.add_argument("goal", metavar=goal_meta)
        p.add_argument("--fragment", choices=[f.value for f in Fragment],
                       help="override the theory's fragment declaration")
        p.add_argument("--allow-fix", action="store_true",
                       help="enable fixpoint terms regardless of the theory declaration")
        p.add_argument("--depth", type=int, default=None,
                       help="rule-application budget (prove) or term depth (model/member)")
        p.add_argument("--trace-limit", type=int, default=None)
        p.add_argument("--unfold-budget", type=int, default=None)
        p.add_argument("--autoclose", action="store_true",
                       help="universally close capitalized free clause variables")
        p.add_argument("--json", action="store_true", help="machine-readable output")

    p = sub.add_parser("classify", help="classify an atom and report fragment membership")
    common(p, "formula")

    p = sub.add_parser("trace", help="bounded resolution trace of a goal")
    common(p, "goal")
    p.add_argument("--trace-out", help="also write the trace to this path")

    p = sub.add_parser("model", help="enumerate the greatest model up to a term depth")
    common(p, None)

    p = sub.add_parser("member", help="greatest-model membership of a ground atom")
    common(p, "atom")

    p = sub.add_parser("prove", help="prove a goal coinductively, discovering the invariant")
    common(p, "goal")
    p.add_argument("--cert-out", help="path prefix for the emitted certificates")
    p.add_argument("--trace-out", help="write the resolution trace to this path")

    p = sub.add_parser("check", help="check a proof certificate against a theory")
    common(p, "certificate")

    return parser


def _load(args: argparse.Namespace) -> tuple[TheoryDocument, Program, Fragment]:
    text = Path(args.theory).read_text()
    doc = parse_theory(text, autoclose=args.autoclose)
    fragment = Fragment(args.fragment) if args.fragment else doc.fragment
    allow_fix = doc.allow_fix or args.allow_fix
    program = Program(doc.sig, fragment, allow_fix, doc.clauses)
    program.validate()
    return doc, program, fragment


def _search_config(args: argparse.Namespace) -> SearchConfig:
    env = _env_budgets()
    depth = args.depth if args.depth is not None else env.get("depth", 256)
    trace = args.trace_limit if args.trace_limit is not None else env.get("trace", 32)
    unfold = args.unfold_budget if args.unfold_budget is not None else env.get("unfold", 64)
    return SearchConfig(depth_limit=depth, unfold_budget=unfold, trace_limit=trace)


def _oracle_config(args: argparse.Namespace) -> OracleConfig:
    env = _env_budgets()
    assume = env.get("assume", 32)
    depth = env.get("oracle-depth", 6)
    return OracleConfig(assume_budget=assume, depth_budget=depth)


def _emit(args: argparse.Namespace, payload: dict, human: str) -> None:
    if args.json:
        print(json.dumps(payload, indent=2))
    else:
        print(human)


def _goal_formula(args: argparse.Namespace, program: Program) -> Formula:
    goal = parse_formula(args.goal, program.sig)
    if not formula_closed(goal, program.sig):
        # close free variables existentially, inferring their types
        from .formulas import Exists, term_of_formula
        from .terms import free_vars_ordered

        types = infer_free_var_types(program.sig, term_of_formula(goal))
        for name in reversed(free_vars_ordered(term_of_formula(goal))):
            if name not in types:
                raise TermError(f"cannot infer a type for free variable {name!r}")
            goal = Exists(name, types[name], goal)
    return goal


def _cmd_classify(args: argparse.Namespace) -> int:
    _, program, fragment = _load(args)
    formula = parse_formula(args.goal, program.sig)
    rows: dict[str, object] = {"formula": print_formula(formula)}
    lines = [f"formula: {print_formula(formula)}"]
    if isinstance(formula, Atom):
        cls = classify_atom(program.sig, formula)
        rows["atom"] = {
            "rigid": cls.rigid,
            "firstOrder": cls.first_order,
            "universe": cls.universe.value,
        }
        lines.append(
            f"atom: {'rigid' if cls.rigid else 'flexible'}, "
            f"{'first-order' if cls.first_order else 'higher-order'}, {cls.universe.value}"
        )
    table = {}
    for frag in Fragment:
        table[frag.value] = {
            "clause": is_program_clause(frag, formula, program.allow_fix),
            "goal": is_goal(frag, formula, program.allow_fix),
            "core": is_core(frag, formula, program.allow_fix),
        }
        entry = table[frag.value]
        lines.append(
            f"{frag.value}: clause={'yes' if entry['clause'] else 'no'} "
            f"goal={'yes' if entry['goal'] else 'no'} core={'yes' if entry['core'] else 'no'}"
        )
    rows["fragments"] = table
    _emit(args, rows, "\n".join(lines))
    return 0


def _cmd_trace(args: argparse.Namespace) -> int:
    _, program, _ = _load(args)
    goal = _goal_formula(args, program)
    from .search import _strip_goal, _conj_of

    stripped = _strip_goal(goal)
    if stripped is None or not stripped[0]:
        raise TermError("tracing needs a goal made of atoms and conjunction")
    trace = sld_trace(program, _conj_of(stripped[0]), _search_config(args))
    lines = []
    for i, step in enumerate(trace.steps):
        goals = ", ".join(print_formula(g) for g in step.goals) or "<empty>"
        if step.clause_index is None:
            lines.append(f"{i}: {goals}")
        else:
            subst = ", ".join(
                f"{name} := {_short_term(term)}"
                for name, term in step.substitution.bindings.items()
            )
            lines.append(
                f"{i}: [clause {step.clause_index}"
                + (f"; {subst}" if subst else "")
                + f"] {goals}"
            )
    verdict = trace.verdict
    if trace.verdict == LOOP_FOUND and trace.loop:
        verdict = f"loop_found (step {trace.loop[0]} recurs at step {trace.loop[1]})"
    lines.append(f"verdict: {verdict}")
    text = "\n".join(lines)
    if args.trace_out:
        Path(args.trace_out).write_text(text + "\n")
    payload = {
        "verdict": trace.verdict,
        "loop": list(trace.loop) if trace.loop else None,
        "steps": [
            {
                "goals": [print_formula(g) for g in step.goals],
                "clause": step.clause_index,
                "substitution": {n: _short_term(t) for n, t in step.substitution.bindings.items()},
            }
            for step in trace.steps
        ],
    }
    _emit(args, payload, text)
    return 0


def _short_term(t) -> str:
    from .syntax import print_term

    return print_term(t)


def _cmd_model(args: argparse.Namespace) -> int:
    _, program, _ = _load(args)
    depth = args.depth if args.depth is not None else 3
    model = enumerate_model(program, depth, _oracle_config(args))
    atoms = sorted(print_formula(a) for a in model)
    _emit(args, {"depth": depth, "atoms": atoms}, "\n".join(atoms))
    return 0


def _cmd_member(args: argparse.Namespace) -> int:
    _, program, _ = _load(args)
    atom = parse_formula(args.goal, program.sig)
    rational = make_rational_atom(program.sig, atom)
    verdict = gfp_member(program, rational, _oracle_config(args))
    label = {IN: "In", OUT: "Out", UNKNOWN: "Unknown"}[verdict.kind]
    human = label if verdict.reason is None else f"{label} ({verdict.reason})"
    _emit(args, {"verdict": label, "reason": verdict.reason}, human)
    return 0 if verdict.kind == IN else 1


def _cmd_prove(args: argparse.Namespace) -> int:
    doc, program, fragment = _load(args)
    goal = _goal_formula(args, program)
    cfg = _search_config(args)
    result = prove(fragment, program, goal, cfg)
    if result is None:
        _emit(args, {"found": False}, "no proof found")
        return 1

    prefix = args.cert_out or str(Path(args.theory).with_suffix(""))
    inv_path = Path(f"{prefix}.invariant.cert")
    inv_path.write_text(print_certificate(result.invariant_proof, program.sig))
    cor_path = None
    if result.corollary_proof is not None:
        cor_path = Path(f"{prefix}.corollary.cert")
        cor_path.write_text(print_certificate(result.corollary_proof, program.sig))

    inv = result.invariant
    payload = {
        "found": True,
        "invariant": print_formula(inv.formula),
        "fragment": inv.fragment.value + (" +fix" if inv.uses_fix else ""),
        "provenance": inv.provenance,
        "invariant_certificate": str(inv_path),
        "corollary_certificate": str(cor_path) if cor_path else None,
        "nodes_expanded": result.stats.nodes_expanded,
        "elapsed": result.stats.elapsed,
    }
    lines = [
        f"invariant: {print_formula(inv.formula)}",
        f"fragment: {payload['fragment']} ({inv.provenance})",
        f"invariant certificate: {inv_path}",
    ]
    if cor_path:
        lines.append(f"corollary certificate: {cor_path}")
    _emit(args, payload, "\n".join(lines))
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    doc, program, fragment = _load(args)
    text = Path(args.goal).read_text()
    tree = parse_certificate(text, program.sig)
    env = _env_budgets()
    budget = args.unfold_budget if args.unfold_budget is not None else env.get("unfold", 64)
    report = check_certificate(fragment, tree, program.allow_fix or args.allow_fix, budget)
    if report.accepted:
        _emit(args, {"accepted": True, "nodes": report.stats.nodes}, "accepted")
        return 0
    err = report.first_error
    where = "/".join(str(i) for i in err.path) if err.path else "root"
    human = f"rejected: {err.code} at {where}: {err.detail}"
    payload = {
        "accepted": False,
        "code": err.code,
        "path": list(err.path),
        "detail": err.detail,
    }
    _emit(args, payload, human)
    return 1


_COMMANDS = {
    "classify": _cmd_classify,
    "trace": _cmd_trace,
    "model": _cmd_model,
    "member": _cmd_member,
    "prove": _cmd_prove,
    "check": _cmd_check,
}


def main(argv: Optional[list[str]] = None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ParseError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except (TermError, FormulaError) as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except FileNotFoundError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2
    except ValueError as e:
        print(f"error: {e}", file=sys.stderr)
        return 2


if __name__ == "__main__":
    sys.exit(main())
