"""Trusted checker for coinductive uniform proof certificates.

Sequents come in three shapes: a root judgment asserting that a core formula
is coinductively provable, main judgments ``program --> goal``, and focused
judgments decomposing one selected clause against an atomic goal.  The
``co-fix`` rule bridges the root to a main judgment whose program and goal
both carry the coinductive invariant under a guard mark; guarded goals are
reduced only by the guarded rule variants, which keep the hypothesis
unselectable until a left-implication step erases all marks.

Certificates carry explicit payloads (witnesses, eigenvariables, clause
indices), so checking requires no search: for every node the checker
recomputes the expected premises from the conclusion and compares them, and
validates all side conditions (witness closedness and universe restrictions,
eigenvariable freshness, guard discipline, initial-step tree equality).
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Optional, Union

from . import terms
from .formulas import (
    Atom,
    And,
    Exists,
    Forall,
    Formula,
    Fragment,
    Implies,
    Or,
    Program,
    Top,
    UniverseTag,
    formula_alpha_equal,
    formula_closed,
    formula_contains_fix,
    guarded_fixes_ok,
    is_core,
    is_higher_order,
    is_program_clause,
    subst_formula1,
    term_of_formula,
    universe_check,
    _first_order_term,
)
from .terms import (
    BUDGET_EXHAUSTED,
    EQUAL,
    Const,
    Fix,
    Signature,
    SimpleType,
    Term,
    alpha_canonical,
    check_guarded,
    contains_fix,
    fixbeta_equal,
    free_vars,
    is_closed,
    subterms,
    typecheck,
)

# ---------------------------------------------------------------------------
# Rule labels (certificate surface names)

TOP_R = "topR"
AND_R = "andR"
OR_R_LEFT = "orR_left"
OR_R_RIGHT = "orR_right"
IMP_R = "impR"
FORALL_R = "forallR"
EXISTS_R = "existsR"
DECIDE = "decide"
INITIAL = "initial"
IMP_L = "impL"
AND_L_LEFT = "andL_left"
AND_L_RIGHT = "andL_right"
FORALL_L = "forallL"
CO_FIX = "co-fix"
IMP_R_G = "impR<>"
FORALL_R_G = "forallR<>"
AND_R_G = "andR<>"
IMP_L_G = "impL<>"
AND_L_LEFT_G = "andL_left<>"
AND_L_RIGHT_G = "andL_right<>"
FORALL_L_G = "forallL<>"
DECIDE_G = "decide<>"
INITIAL_G = "initial<>"

ALL_RULES = frozenset(
    {
        TOP_R, AND_R, OR_R_LEFT, OR_R_RIGHT, IMP_R, FORALL_R, EXISTS_R,
        DECIDE, INITIAL, IMP_L, AND_L_LEFT, AND_L_RIGHT, FORALL_L, CO_FIX,
        IMP_R_G, FORALL_R_G, AND_R_G, IMP_L_G, AND_L_LEFT_G, AND_L_RIGHT_G,
        FORALL_L_G, DECIDE_G, INITIAL_G,
    }
)

GUARDED_RULES = frozenset(
    {IMP_R_G, FORALL_R_G, AND_R_G, IMP_L_G, AND_L_LEFT_G, AND_L_RIGHT_G,
     FORALL_L_G, DECIDE_G, INITIAL_G}
)

# ---------------------------------------------------------------------------
# Error codes

BAD_RULE_INSTANCE = "BadRuleInstance"
CO_FIX_NOT_AT_ROOT = "CoFixNotAtRoot"
NON_CORE_COINDUCTIVE_GOAL = "NonCoreCoinductiveGoal"
GUARD_VIOLATION = "GuardViolation"
EIGENVARIABLE_CAPTURE = "EigenvariableCapture"
WITNESS_NOT_CLOSED = "WitnessNotClosed"
WITNESS_UNIVERSE_VIOLATION = "WitnessUniverseViolation"
FRAGMENT_VIOLATION = "FragmentViolation"
FIXBETA_BUDGET_EXHAUSTED = "FixBetaBudgetExhausted"


class RejectedCertificate(Exception):
    def __init__(self, report: "CheckReport"):
        self.report = report
        err = report.first_error
        detail = f"{err.code}: {err.detail}" if err else "rejected"
        super().__init__(detail)


# ---------------------------------------------------------------------------
# Sequents and proof trees


@dataclass(frozen=True)
class MarkedFormula:
    formula: Formula
    guarded: bool = False


@dataclass(frozen=True)
class MainSeq:
    sig: Signature
    program: tuple[MarkedFormula, ...]
    goal: MarkedFormula


@dataclass(frozen=True)
class FocusSeq:
    sig: Signature
    program: tuple[MarkedFormula, ...]
    focus: Formula
    goal: MarkedFormula  # always an atom


@dataclass(frozen=True)
class RootSeq:
    sig: Signature
    program: tuple[Formula, ...]
    goal: Formula


Sequent = Union[MainSeq, FocusSeq, RootSeq]


@dataclass(frozen=True)
class WitnessPayload:
    term: Term


@dataclass(frozen=True)
class EigenPayload:
    name: str
    typ: SimpleType


@dataclass(frozen=True)
class DecidePayload:
    index: int
    lemma: bool = False  # provenance audit tag; index is absolute either way


Payload = Union[WitnessPayload, EigenPayload, DecidePayload, None]


@dataclass(frozen=True)
class ProofNode:
    rule: str
    conclusion: Sequent
    premises: tuple["ProofNode", ...] = ()
    payload: Payload = None


@dataclass(frozen=True)
class CheckError:
    path: tuple[int, ...]
    code: str
    detail: str


@dataclass(frozen=True)
class CheckStats:
    nodes: int = 0
    fixbeta_budget_used: int = 0


@dataclass(frozen=True)
class CheckReport:
    accepted: bool
    first_error: Optional[CheckError] = None
    stats: CheckStats = field(default_factory=CheckStats)


# ---------------------------------------------------------------------------
# Structural helpers


def _canon_formula(f: Formula) -> Term:
    return alpha_canonical(term_of_formula(f))


def _marked_equal(a: MarkedFormula, b: MarkedFormula) -> bool:
    return a.guarded == b.guarded and _canon_formula(a.formula) == _canon_formula(b.formula)


def sequent_equal(a: Sequent, b: Sequent) -> bool:
    if type(a) is not type(b):
        return False
    if a.sig.constants != b.sig.constants:
        return False
    if isinstance(a, RootSeq):
        return (
            len(a.program) == len(b.program)
            and all(_canon_formula(x) == _canon_formula(y) for x, y in zip(a.program, b.program))
            and _canon_formula(a.goal) == _canon_formula(b.goal)
        )
    if len(a.program) != len(b.program):
        return False
    if not all(_marked_equal(x, y) for x, y in zip(a.program, b.program)):
        return False
    if isinstance(a, FocusSeq):
        if _canon_formula(a.focus) != _canon_formula(b.focus):
            return False
    return _marked_equal(a.goal, b.goal)


def erase_marks(program: tuple[MarkedFormula, ...]) -> tuple[MarkedFormula, ...]:
    """The same list with every guard mark cleared."""
    return tuple(MarkedFormula(m.formula, False) for m in program)


def apply_cofix(frag: Fragment, root: Sequent, allow_fix: bool = False) -> MainSeq:
    """Open a coinductive proof: append the guarded invariant to the program
    and make the guarded copy the goal."""
    if not isinstance(root, RootSeq):
        raise RejectedCertificate(
            CheckReport(False, CheckError((), BAD_RULE_INSTANCE, "co-fix needs a root sequent"))
        )
    err = _cofix_side_conditions(frag, root, allow_fix)
    if err is not None:
        raise RejectedCertificate(CheckReport(False, CheckError((), err[0], err[1])))
    program = tuple(MarkedFormula(c, False) for c in root.program)
    invariant = MarkedFormula(root.goal, True)
    return MainSeq(root.sig, program + (invariant,), invariant)


def _cofix_side_conditions(
    frag: Fragment, root: RootSeq, allow_fix: bool
) -> Optional[tuple[str, str]]:
    if not formula_closed(root.goal, root.sig):
        return NON_CORE_COINDUCTIVE_GOAL, "coinductive goal is not closed"
    if not is_core(frag, root.goal, allow_fix):
        return NON_CORE_COINDUCTIVE_GOAL, f"goal is not a {frag} core formula"
    if not guarded_fixes_ok(root.goal):
        return GUARD_VIOLATION, "coinductive goal contains an unguarded fix term"
    for i, clause in enumerate(root.program):
        if not formula_closed(clause, root.sig):
            return FRAGMENT_VIOLATION, f"program clause {i} is not closed"
        if not is_program_clause(frag, clause, allow_fix):
            return FRAGMENT_VIOLATION, f"program clause {i} not valid in {frag}"
    return None


# ---------------------------------------------------------------------------
# Witness side conditions


def _witness_error(
    frag: Fragment,
    sig: Signature,
    witness: Term,
    expected_type: SimpleType,
    allow_fix: bool,
) -> Optional[tuple[str, str]]:
    if free_vars(witness):
        return WITNESS_NOT_CLOSED, f"witness has free variables {sorted(free_vars(witness))}"
    if not is_closed(witness, sig):
        return WITNESS_NOT_CLOSED, "witness uses constants outside the signature"
    try:
        ty = typecheck(sig, {}, witness)
    except terms.TermError as e:
        return BAD_RULE_INSTANCE, f"witness does not typecheck: {e}"
    if ty != expected_type:
        return BAD_RULE_INSTANCE, f"witness type {ty} differs from binder type {expected_type}"
    if not allow_fix and contains_fix(witness):
        return WITNESS_UNIVERSE_VIOLATION, "fix terms are not enabled for this program"
    for sub in subterms(witness):
        if isinstance(sub, Fix) and not check_guarded(sub):
            return GUARD_VIOLATION, "witness contains an unguarded fix term"
    if not is_higher_order(frag):
        if not _first_order_term(witness, frozenset()):
            return WITNESS_UNIVERSE_VIOLATION, f"witness must be first order in {frag}"
    else:
        tag = UniverseTag.U1 if frag == Fragment.CO_HOHC else UniverseTag.U2
        if not universe_check(witness, tag):
            return WITNESS_UNIVERSE_VIOLATION, f"witness outside {tag.value} in {frag}"
    return None


# ---------------------------------------------------------------------------
# Rule checking


class _FixbetaMeter:
    def __init__(self, budget: int):
        self.budget = budget
        self.used = 0

    def equal(self, f1: Formula, f2: Formula) -> Optional[bool]:
        """True/False verdicts, None on budget exhaustion."""
        verdict = fixbeta_equal(term_of_formula(f1), term_of_formula(f2), self.budget)
        self.used += verdict.unfolds_used
        if verdict.kind == BUDGET_EXHAUSTED:
            return None
        return verdict.kind == EQUAL


def _expected_premises(
    frag: Fragment,
    rule: str,
    conclusion: Sequent,
    payload: Payload,
    allow_fix: bool,
    meter: _FixbetaMeter,
) -> Union[list[Sequent], tuple[str, str]]:
    """The premise sequents a valid instance must have, or (code, detail)."""
    guarded_rule = rule in GUARDED_RULES

    if rule == CO_FIX:
        if not isinstance(conclusion, RootSeq):
            return BAD_RULE_INSTANCE, "co-fix concludes a root sequent"
        err = _cofix_side_conditions(frag, conclusion, allow_fix)
        if err is not None:
            return err
        return [apply_cofix(frag, conclusion, allow_fix)]

    if isinstance(conclusion, RootSeq):
        return CO_FIX_NOT_AT_ROOT, f"rule {rule} cannot conclude a root sequent"

    goal = conclusion.goal
    if rule in (TOP_R, AND_R, OR_R_LEFT, OR_R_RIGHT, IMP_R, FORALL_R, EXISTS_R,
                DECIDE, AND_R_G, IMP_R_G, FORALL_R_G, DECIDE_G):
        if not isinstance(conclusion, MainSeq):
            return BAD_RULE_INSTANCE, f"rule {rule} concludes a main sequent"
        if goal.guarded != guarded_rule:
            which = "guarded" if guarded_rule else "unguarded"
            return GUARD_VIOLATION, f"rule {rule} needs a {which} goal"
        sig, program = conclusion.sig, conclusion.program

        if rule == TOP_R:
            if not isinstance(goal.formula, Top):
                return BAD_RULE_INSTANCE, "topR goal must be truth"
            return []
        if rule in (AND_R, AND_R_G):
            if not isinstance(goal.formula, And):
                return BAD_RULE_INSTANCE, "andR goal must be a conjunction"
            mk = lambda f: MarkedFormula(f, guarded_rule)
            return [MainSeq(sig, program, mk(goal.formula.left)),
                    MainSeq(sig, program, mk(goal.formula.right))]
        if rule in (OR_R_LEFT, OR_R_RIGHT):
            if not isinstance(goal.formula, Or):
                return BAD_RULE_INSTANCE, "orR goal must be a disjunction"
            side = goal.formula.left if rule == OR_R_LEFT else goal.formula.right
            return [MainSeq(sig, program, MarkedFormula(side, False))]
        if rule in (IMP_R, IMP_R_G):
            if not isinstance(goal.formula, Implies):
                return BAD_RULE_INSTANCE, "impR goal must be an implication"
            hypothesis = MarkedFormula(goal.formula.left, guarded_rule)
            new_goal = MarkedFormula(goal.formula.right, guarded_rule)
            return [MainSeq(sig, program + (hypothesis,), new_goal)]
        if rule in (FORALL_R, FORALL_R_G):
            if not isinstance(goal.formula, Forall):
                return BAD_RULE_INSTANCE, "forallR goal must be universally quantified"
            if not isinstance(payload, EigenPayload):
                return BAD_RULE_INSTANCE, "forallR needs an eigenvariable payload"
            if payload.typ != goal.formula.binder_type:
                return BAD_RULE_INSTANCE, "eigenvariable type differs from binder type"
            if payload.name in sig:
                return EIGENVARIABLE_CAPTURE, f"eigenvariable {payload.name!r} already in signature"
            new_sig = sig.extend(payload.name, payload.typ)
            body = subst_formula1(goal.formula.body, goal.formula.binder, Const(payload.name))
            return [MainSeq(new_sig, program, MarkedFormula(body, guarded_rule))]
        if rule == EXISTS_R:
            if not isinstance(goal.formula, Exists):
                return BAD_RULE_INSTANCE, "existsR goal must be existentially quantified"
            if not isinstance(payload, WitnessPayload):
                return BAD_RULE_INSTANCE, "existsR needs a witness payload"
            err = _witness_error(frag, sig, payload.term, goal.formula.binder_type, allow_fix)
            if err is not None:
                return err
            body = subst_formula1(goal.formula.body, goal.formula.binder, payload.term)
            return [MainSeq(sig, program, MarkedFormula(body, False))]
        # decide / decide<>
        if not isinstance(goal.formula, Atom):
            return BAD_RULE_INSTANCE, "decide fires only on atomic goals"
        if not isinstance(payload, DecidePayload):
            return BAD_RULE_INSTANCE, "decide needs a clause index payload"
        if not (0 <= payload.index < len(program)):
            return BAD_RULE_INSTANCE, f"clause index {payload.index} out of range"
        entry = program[payload.index]
        if entry.guarded:
            return GUARD_VIOLATION, "decide cannot select a guard-marked formula"
        return [FocusSeq(sig, program, entry.formula, goal)]

    # focused rules
    if not isinstance(conclusion, FocusSeq):
        return BAD_RULE_INSTANCE, f"rule {rule} concludes a focused sequent"
    if goal.guarded != guarded_rule:
        which = "guarded" if guarded_rule else "unguarded"
        return GUARD_VIOLATION, f"rule {rule} needs a {which} goal"
    if not isinstance(goal.formula, Atom):
        return BAD_RULE_INSTANCE, "focused goals must be atomic"
    sig, program, focus = conclusion.sig, conclusion.program, conclusion.focus

    if rule in (INITIAL, INITIAL_G):
        if not isinstance(focus, Atom):
            return BAD_RULE_INSTANCE, "initial requires an atomic focus"
        same = meter.equal(focus, goal.formula)
        if same is None:
            return FIXBETA_BUDGET_EXHAUSTED, "tree-equality budget exhausted at initial"
        if not same:
            return BAD_RULE_INSTANCE, "focus and goal atoms are not tree-equal"
        return []
    if rule in (IMP_L, IMP_L_G):
        if not isinstance(focus, Implies):
            return BAD_RULE_INSTANCE, "impL requires an implication focus"
        if rule == IMP_L_G:
            released = erase_marks(program)
            return [FocusSeq(sig, released, focus.right, MarkedFormula(goal.formula, False)),
                    MainSeq(sig, released, MarkedFormula(focus.left, False))]
        return [FocusSeq(sig, program, focus.right, goal),
                MainSeq(sig, program, MarkedFormula(focus.left, False))]
    if rule in (AND_L_LEFT, AND_L_RIGHT, AND_L_LEFT_G, AND_L_RIGHT_G):
        if not isinstance(focus, And):
            return BAD_RULE_INSTANCE, "andL requires a conjunctive focus"
        left = rule in (AND_L_LEFT, AND_L_LEFT_G)
        side = focus.left if left else focus.right
        return [FocusSeq(sig, program, side, goal)]
    if rule in (FORALL_L, FORALL_L_G):
        if not isinstance(focus, Forall):
            return BAD_RULE_INSTANCE, "forallL requires a quantified focus"
        if not isinstance(payload, WitnessPayload):
            return BAD_RULE_INSTANCE, "forallL needs a witness payload"
        err = _witness_error(frag, sig, payload.term, focus.binder_type, allow_fix)
        if err is not None:
            return err
        new_focus = subst_formula1(focus.body, focus.binder, payload.term)
        return [FocusSeq(sig, program, new_focus, goal)]

    return BAD_RULE_INSTANCE, f"unknown rule {rule!r}"


def check_rule_instance(
    frag: Fragment,
    rule: str,
    conclusion: Sequent,
    premises: list[Sequent],
    payload: Payload = None,
    allow_fix: bool = False,
    unfold_budget: int = 64,
    meter: Optional[_FixbetaMeter] = None,
) -> Optional[tuple[str, str]]:
    """Validate one rule application; ``None`` means the instance is valid."""
    if rule not in ALL_RULES:
        return BAD_RULE_INSTANCE, f"unknown rule {rule!r}"
    meter = meter or _FixbetaMeter(unfold_budget)
    expected = _expected_premises(frag, rule, conclusion, payload, allow_fix, meter)
    if isinstance(expected, tuple):
        return expected
    if len(expected) != len(premises):
        return BAD_RULE_INSTANCE, (
            f"rule {rule} needs {len(expected)} premise(s), certificate has {len(premises)}"
        )
    for i, (want, got) in enumerate(zip(expected, premises)):
        if not sequent_equal(want, got):
            return BAD_RULE_INSTANCE, f"premise {i} of {rule} differs from the rule instance"
    return None


def check_proof(
    frag: Fragment,
    tree: ProofNode,
    allow_fix: bool = False,
    unfold_budget: int = 64,
) -> CheckReport:
    """Check a full certificate.

    Accepted iff the root is a single co-fix over a root sequent, co-fix
    occurs nowhere else, every node is a valid rule instance, and all leaves
    close by initial (either form) or truth.
    """
    meter = _FixbetaMeter(unfold_budget)
    nodes = [0]

    def fail(path: tuple[int, ...], code: str, detail: str) -> CheckReport:
        return CheckReport(False, CheckError(path, code, detail),
                           CheckStats(nodes[0], meter.used))

    if not isinstance(tree.conclusion, RootSeq):
        return fail((), BAD_RULE_INSTANCE, "certificate root must be a root sequent")
    if tree.rule != CO_FIX:
        return fail((), CO_FIX_NOT_AT_ROOT, "certificate must start with co-fix")

    def walk(node: ProofNode, path: tuple[int, ...]) -> Optional[CheckReport]:
        nodes[0] += 1
        if path and node.rule == CO_FIX:
            return fail(path, CO_FIX_NOT_AT_ROOT, "co-fix may only appear at the root")
        err = check_rule_instance(
            frag, node.rule, node.conclusion,
            [p.conclusion for p in node.premises],
            node.payload, allow_fix, meter=meter,
        )
        if err is not None:
            return fail(path, err[0], err[1])
        for i, premise in enumerate(node.premises):
            bad = walk(premise, path + (i,))
            if bad is not None:
                return bad
        return None

    bad = walk(tree, ())
    if bad is not None:
        return bad
    return CheckReport(True, None, CheckStats(nodes[0], meter.used))


def check_uniform_proof(
    frag: Fragment,
    tree: ProofNode,
    allow_fix: bool = False,
    unfold_budget: int = 64,
) -> CheckReport:
    """Check an ordinary (co-fix-free) uniform proof of a main sequent, as
    produced for corollaries of registered lemmas."""
    meter = _FixbetaMeter(unfold_budget)
    nodes = [0]

    def fail(path: tuple[int, ...], code: str, detail: str) -> CheckReport:
        return CheckReport(False, CheckError(path, code, detail),
                           CheckStats(nodes[0], meter.used))

    if not isinstance(tree.conclusion, MainSeq):
        return fail((), BAD_RULE_INSTANCE, "uniform certificates conclude a main sequent")

    def walk(node: ProofNode, path: tuple[int, ...]) -> Optional[CheckReport]:
        nodes[0] += 1
        if node.rule == CO_FIX:
            return fail(path, CO_FIX_NOT_AT_ROOT, "co-fix has no place in a uniform certificate")
        err = check_rule_instance(
            frag, node.rule, node.conclusion,
            [p.conclusion for p in node.premises],
            node.payload, allow_fix, meter=meter,
        )
        if err is not None:
            return fail(path, err[0], err[1])
        for i, premise in enumerate(node.premises):
            bad = walk(premise, path + (i,))
            if bad is not None:
                return bad
        return None

    bad = walk(tree, ())
    if bad is not None:
        return bad
    return CheckReport(True, None, CheckStats(nodes[0], meter.used))


def check_certificate(
    frag: Fragment,
    tree: ProofNode,
    allow_fix: bool = False,
    unfold_budget: int = 64,
) -> CheckReport:
    """Dispatch on the certificate's root judgment: coinductive certificates
    start at a root sequent, corollary certificates at a main sequent."""
    if isinstance(tree.conclusion, RootSeq):
        return check_proof(frag, tree, allow_fix, unfold_budget)
    return check_uniform_proof(frag, tree, allow_fix, unfold_budget)


# ---------------------------------------------------------------------------
# Lemma registration


def register_lemma(program: Program, proven_core: Formula, certificate: ProofNode) -> Program:
    """Extend a program with a proven core formula, available to backchaining.

    The certificate must be an accepted coinductive proof of ``proven_core``
    over exactly this program's clauses and lemmas.
    """
    root = certificate.conclusion
    if not isinstance(root, RootSeq):
        raise RejectedCertificate(
            CheckReport(False, CheckError((), BAD_RULE_INSTANCE, "certificate has no root sequent"))
        )
    if root.sig.constants != program.sig.constants:
        raise RejectedCertificate(
            CheckReport(False, CheckError((), BAD_RULE_INSTANCE, "certificate signature differs"))
        )
    expected_entries = program.entries()
    if len(root.program) != len(expected_entries) or not all(
        formula_alpha_equal(a, b) for a, b in zip(root.program, expected_entries)
    ):
        raise RejectedCertificate(
            CheckReport(False, CheckError((), BAD_RULE_INSTANCE, "certificate program differs"))
        )
    if not formula_alpha_equal(root.goal, proven_core):
        raise RejectedCertificate(
            CheckReport(False, CheckError((), BAD_RULE_INSTANCE, "certificate proves a different formula"))
        )
    report = check_proof(program.fragment, certificate, program.allow_fix)
    if not report.accepted:
        raise RejectedCertificate(report)
    return program.with_lemma(proven_core)
