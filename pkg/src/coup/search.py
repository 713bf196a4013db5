"""Goal-directed proof search producing kernel-checkable certificates.

The pipeline mirrors how a coinductive goal is actually established: run a
bounded resolution trace, propose invariant candidates from it (loop
detection over rational unification, anti-unification with optional side
conditions, fixpoint-term synthesis from binding recurrences), prove a
candidate with a single co-fix step followed by guarded uniform search,
register it as a lemma, and finally derive the original goal by ordinary
uniform proof.

Search is deterministic: clauses are selected in source order (search-added
hypotheses most recent first), goals leftmost, candidates in the configured
heuristic order, and iterative deepening doubles a certificate-size budget
from 8 up to the configured limit.  Every certificate returned has been
re-checked by the proof kernel.
"""

from __future__ import annotations

import itertools
import time
from dataclasses import dataclass, field
from typing import Iterator, Optional

from .formulas import (
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Fragment,
    Implies,
    Or,
    Program,
    Top,
    formula_alpha_equal,
    formula_closed,
    formula_contains_fix,
    formula_of_term,
    guarded_fixes_ok,
    is_core,
    is_goal,
    minimal_core_fragment,
    subst_formula,
    subst_formula1,
    term_of_formula,
)
from .kernel import (
    AND_L_LEFT,
    AND_L_LEFT_G,
    AND_L_RIGHT,
    AND_L_RIGHT_G,
    AND_R,
    AND_R_G,
    CO_FIX,
    DECIDE,
    DECIDE_G,
    EXISTS_R,
    FORALL_L,
    FORALL_L_G,
    FORALL_R,
    FORALL_R_G,
    IMP_L,
    IMP_L_G,
    IMP_R,
    IMP_R_G,
    INITIAL,
    INITIAL_G,
    OR_R_LEFT,
    OR_R_RIGHT,
    TOP_R,
    DecidePayload,
    EigenPayload,
    FocusSeq,
    MainSeq,
    MarkedFormula,
    ProofNode,
    RootSeq,
    Sequent,
    WitnessPayload,
    apply_cofix,
    check_proof,
    check_uniform_proof,
    erase_marks,
    register_lemma,
    _witness_error,
)
from .oracle import ground_terms, horn_paths
from .syntax import infer_free_var_types
from .terms import (
    App,
    Arrow,
    BaseType,
    Const,
    Fix,
    FlexibleHeadError,
    Lam,
    Signature,
    SimpleType,
    Substitution,
    Term,
    TermError,
    Var,
    alpha_equal,
    beta_normalize,
    check_guarded,
    contains_fix,
    fixbeta_equal,
    free_vars,
    free_vars_ordered,
    raw_subst,
    spine,
    typecheck,
    unify_rational,
)

# ---------------------------------------------------------------------------
# Configuration and result types

PROVENANCE_LOOP = "loop"
PROVENANCE_GENERALIZE = "generalize"
PROVENANCE_CONDITIONAL = "conditional"
PROVENANCE_FIX = "fix-synthesis"
PROVENANCE_DIRECT = "direct"

DEFAULT_HEURISTIC_ORDER = (
    PROVENANCE_LOOP,
    PROVENANCE_GENERALIZE,
    PROVENANCE_CONDITIONAL,
    PROVENANCE_FIX,
)


@dataclass(frozen=True)
class SearchConfig:
    """Budgets and heuristic order.

    Clause selection is fixed to source order and goal selection to
    leftmost.  ``depth_limit`` bounds the total number of rule applications
    in one certificate.
    """

    depth_limit: int = 256
    unfold_budget: int = 64
    trace_limit: int = 32
    heuristic_order: tuple[str, ...] = DEFAULT_HEURISTIC_ORDER


DEFAULT_CONFIG = SearchConfig()


class FlexibleGoalHead(TermError):
    pass


LOOP_FOUND = "loop_found"
TRACE_BUDGET_EXHAUSTED = "budget_exhausted"
FINITE_SUCCESS = "finite_success"
FINITE_FAILURE = "finite_failure"


@dataclass(frozen=True)
class TraceStep:
    goals: tuple[Formula, ...]
    clause_index: Optional[int]
    substitution: Substitution


@dataclass(frozen=True)
class DerivationTrace:
    steps: tuple[TraceStep, ...]
    verdict: str
    loop: Optional[tuple[int, int]] = None
    loop_subst: Optional[Substitution] = None
    var_types: dict[str, SimpleType] = field(default_factory=dict, compare=False)
    sig: Optional[Signature] = field(default=None, compare=False)


@dataclass(frozen=True)
class InvariantCandidate:
    formula: Formula
    fragment: Fragment
    uses_fix: bool
    provenance: str


@dataclass(frozen=True)
class SearchStats:
    nodes_expanded: int
    elapsed: float


@dataclass(frozen=True)
class SearchResult:
    invariant: InvariantCandidate
    invariant_proof: ProofNode
    corollary_proof: Optional[ProofNode]
    stats: SearchStats


# ---------------------------------------------------------------------------
# Resolution tracing


def _conj_atoms(goal: Formula) -> Optional[list[Formula]]:
    if isinstance(goal, Atom):
        return [goal]
    if isinstance(goal, And):
        left = _conj_atoms(goal.left)
        right = _conj_atoms(goal.right)
        if left is None or right is None:
            return None
        return left + right
    if isinstance(goal, Top):
        return []
    return None


def _atom_pred(f: Formula) -> Optional[str]:
    if not isinstance(f, Atom):
        return None
    head, _ = spine(f.term)
    return head.name if isinstance(head, Const) else None


_Entry = tuple[Formula, tuple[tuple[int, Formula], ...]]  # atom with ancestors


def sld_trace(program: Program, goal: Formula, cfg: SearchConfig = DEFAULT_CONFIG) -> DerivationTrace:
    """Leftmost resolution trace with rational-tree unification.

    Stops with a loop verdict as soon as the selected subgoal unifies with
    one of its own ancestors (same predicate), with exhaustion at the step
    limit, or with finite success/failure.  Free goal variables are treated
    as outputs; their types are inferred from argument positions.
    """
    atoms = _conj_atoms(goal)
    if atoms is None:
        raise FlexibleGoalHead("resolution tracing needs a conjunction of atoms")
    for a in atoms:
        if _atom_pred(a) is None:
            raise FlexibleGoalHead("goal atom has a variable head")

    var_types: dict[str, SimpleType] = {}
    for a in atoms:
        try:
            var_types.update(infer_free_var_types(program.sig, a.term))
        except TermError:
            pass

    entries: list[_Entry] = [(a, ()) for a in atoms]
    steps: list[TraceStep] = [TraceStep(tuple(atoms), None, Substitution({}))]
    clause_plans = [(idx, horn_paths(clause)) for idx, clause in enumerate(program.clauses)]

    while True:
        if not entries:
            return DerivationTrace(tuple(steps), FINITE_SUCCESS,
                                   var_types=var_types, sig=program.sig)
        selected, ancestors = entries[0]
        if _atom_pred(selected) is None:
            raise FlexibleGoalHead("selected subgoal has a variable head")

        for anc_step, anc_atom in ancestors:
            if _atom_pred(anc_atom) != _atom_pred(selected):
                continue
            try:
                sigma = unify_rational(selected.term, anc_atom.term,
                                       var_types=var_types, budget=cfg.unfold_budget)
            except (FlexibleHeadError, TermError):
                continue
            if sigma is not None:
                return DerivationTrace(tuple(steps), LOOP_FOUND,
                                       (anc_step, len(steps) - 1), sigma,
                                       var_types, program.sig)

        if len(steps) > cfg.trace_limit:
            return DerivationTrace(tuple(steps), TRACE_BUDGET_EXHAUSTED,
                                   var_types=var_types, sig=program.sig)

        resolved = None
        for clause_index, paths in clause_plans:
            for path in paths:
                mapping: dict[str, Term] = {}
                step_types: dict[str, SimpleType] = {}
                for name, typ in path.binders:
                    fresh = f"{name}_s{len(steps)}"
                    mapping[name] = Var(fresh)
                    step_types[fresh] = typ
                head = formula_of_term(
                    beta_normalize(raw_subst(term_of_formula(path.head), mapping))
                )
                try:
                    sigma = unify_rational(selected.term, head.term,
                                           var_types={**var_types, **step_types},
                                           budget=cfg.unfold_budget)
                except (FlexibleHeadError, TermError):
                    continue
                if sigma is None:
                    continue
                body_atoms: Optional[list[Formula]] = []
                for g in path.body:
                    flat = _conj_atoms(formula_of_term(
                        beta_normalize(raw_subst(term_of_formula(g), mapping))
                    ))
                    if flat is None:
                        body_atoms = None
                        break
                    body_atoms.extend(flat)
                if body_atoms is None:
                    continue
                resolved = (clause_index, sigma, body_atoms, step_types)
                break
            if resolved:
                break

        if resolved is None:
            return DerivationTrace(tuple(steps), FINITE_FAILURE,
                                   var_types=var_types, sig=program.sig)

        clause_index, sigma, body_atoms, step_types = resolved
        var_types.update(step_types)

        def push(f: Formula) -> Formula:
            return subst_formula(sigma, f)

        selected_after = push(selected)
        new_ancestors = tuple((s, push(a)) for s, a in ancestors)
        new_ancestors += ((len(steps) - 1, selected_after),)
        new_entries: list[_Entry] = [(push(b), new_ancestors) for b in body_atoms]
        for atom, anc in entries[1:]:
            new_entries.append((push(atom), tuple((s, push(a)) for s, a in anc)))
        entries = new_entries
        steps.append(TraceStep(tuple(e[0] for e in entries), clause_index, sigma))


# ---------------------------------------------------------------------------
# Candidate generation


def _close_universally(f: Formula, var_types: dict[str, SimpleType]) -> Optional[Formula]:
    frees = free_vars_ordered(term_of_formula(f))
    closed = f
    for name in reversed(frees):
        typ = var_types.get(name)
        if typ is None:
            return None
        closed = Forall(name, typ, closed)
    return closed


def _candidate(f: Formula, provenance: str) -> Optional[InvariantCandidate]:
    minimal = minimal_core_fragment(f)
    if minimal is None or not guarded_fixes_ok(f):
        return None
    frag, uses_fix = minimal
    return InvariantCandidate(f, frag, uses_fix, provenance)


def detect_loop(trace: DerivationTrace) -> Optional[InvariantCandidate]:
    """The looping subgoal, closed under the loop unifier, as an invariant."""
    if trace.verdict != LOOP_FOUND or trace.loop is None or trace.loop_subst is None:
        return None
    _, step_b = trace.loop
    looping = trace.steps[step_b].goals[0]
    closed = subst_formula(trace.loop_subst, looping)
    candidate = _close_universally(closed, trace.var_types)
    if candidate is None:
        return None
    return _candidate(candidate, PROVENANCE_LOOP)


@dataclass
class _ResolutionRecord:
    selected: Formula          # the resolved atom, instantiated by its step
    produced: list[Formula]    # the body atoms the resolution introduced


def _main_resolutions(trace: DerivationTrace) -> tuple[Optional[str], list[_ResolutionRecord]]:
    if not trace.steps or not trace.steps[0].goals:
        return None, []
    main = _atom_pred(trace.steps[0].goals[0])
    records = []
    for i in range(1, len(trace.steps)):
        prev = trace.steps[i - 1].goals
        cur = trace.steps[i].goals
        selected = prev[0]
        if _atom_pred(selected) != main:
            continue
        produced_count = len(cur) - (len(prev) - 1)
        produced = list(cur[:produced_count])
        sigma = trace.steps[i].substitution
        records.append(_ResolutionRecord(subst_formula(sigma, selected), produced))
    return main, records


class _LggState:
    def __init__(self, avoid: set[str]):
        self.table: dict[tuple[Term, ...], str] = {}
        self.avoid = avoid
        self.names = itertools.chain("xyzuvw", (f"v{i}" for i in itertools.count()))

    def var_for(self, key: tuple[Term, ...]) -> Term:
        if key not in self.table:
            while True:
                name = next(self.names)
                if name not in self.avoid:
                    break
            self.table[key] = name
        return Var(self.table[key])


def _lgg(terms: list[Term], state: _LggState) -> Term:
    first = terms[0]
    if all(t == first for t in terms[1:]):
        return first
    decomposed = [spine(t) for t in terms]
    heads = [h for h, _ in decomposed]
    arities = {len(args) for _, args in decomposed}
    head0 = heads[0]
    same_heads = all(
        (isinstance(h, Const) and isinstance(head0, Const) and h.name == head0.name)
        or (isinstance(h, Fix) and isinstance(head0, Fix) and h == head0)
        for h in heads
    )
    if same_heads and len(arities) == 1 and arities != {0}:
        arity = arities.pop()
        args = [
            _lgg([decomposed[i][1][k] for i in range(len(terms))], state)
            for k in range(arity)
        ]
        out: Term = head0
        for a in args:
            out = App(out, a)
        return out
    return state.var_for(tuple(terms))


def _lgg_var_types(
    sig: Signature, state: _LggState, ambient: dict[str, SimpleType]
) -> Optional[dict[str, SimpleType]]:
    types: dict[str, SimpleType] = {}
    for key, name in state.table.items():
        try:
            types[name] = typecheck(sig, dict(ambient), key[0])
        except TermError:
            return None
    return types


def generalize_invariant(trace: DerivationTrace, program: Program) -> list[InvariantCandidate]:
    """Anti-unify the recurring predicate across the trace, then guard the
    generalization with side predicates that recur alongside it."""
    main, records = _main_resolutions(trace)
    if main is None or len(records) < 2:
        return []
    sig = program.sig
    candidates: list[InvariantCandidate] = []

    state = _LggState(avoid=set(sig.constants) | set(trace.var_types))
    lgg_term = _lgg([beta_normalize(r.selected.term) for r in records
                     if isinstance(r.selected, Atom)], state)
    types = _lgg_var_types(sig, state, trace.var_types)
    if types is not None and state.table:
        closed = _close_universally(Atom(lgg_term), types)
        if closed is not None and formula_closed(closed, sig):
            cand = _candidate(closed, PROVENANCE_GENERALIZE)
            if cand is not None:
                candidates.append(cand)

    side_preds: Optional[set[str]] = None
    for r in records:
        preds = {p for b in r.produced if (p := _atom_pred(b)) not in (None, main)}
        side_preds = preds if side_preds is None else (side_preds & preds)
    for side in sorted(side_preds or ()):
        pairs = []
        for r in records:
            side_atom = next(b for b in r.produced if _atom_pred(b) == side)
            pairs.append((r.selected, side_atom))
        state = _LggState(avoid=set(sig.constants) | set(trace.var_types))
        main_lgg = _lgg([beta_normalize(term_of_formula(p)) for p, _ in pairs], state)
        side_lgg = _lgg([beta_normalize(term_of_formula(s)) for _, s in pairs], state)
        types = _lgg_var_types(sig, state, trace.var_types)
        if types is None:
            continue
        closed = _close_universally(Implies(Atom(side_lgg), Atom(main_lgg)), types)
        if closed is None or not formula_closed(closed, sig):
            continue
        cand = _candidate(closed, PROVENANCE_CONDITIONAL)
        if cand is not None:
            candidates.append(cand)
    return candidates


# ---------------------------------------------------------------------------
# Fixpoint synthesis

_HOLE = "%hole%"


def _one_hole_context(t: Term, var: str) -> Optional[Term]:
    """``t`` with its unique free occurrence of ``var`` replaced by the hole."""
    count = [0]

    def go(t: Term) -> Term:
        if isinstance(t, Var):
            if t.name == var:
                count[0] += 1
                return Var(_HOLE)
            return t
        if isinstance(t, App):
            return App(go(t.fun), go(t.arg))
        if isinstance(t, (Lam, Fix)):
            if t.binder == var:
                return t
            ctor = Lam if isinstance(t, Lam) else Fix
            return ctor(t.binder, t.binder_type, go(t.body))
        return t

    out = go(t)
    return out if count[0] == 1 else None


def _merged_bindings(trace: DerivationTrace) -> dict[str, Term]:
    merged: dict[str, Term] = {}
    for step in trace.steps:
        merged.update(step.substitution.bindings)
    return merged


def _chain_from(start: str, bindings: dict[str, Term],
                known_vars: set[str], limit: int = 8) -> list[tuple[Term, Optional[str]]]:
    """Follow ``start`` through the bindings; each link is a one-hole context
    over the next chain variable."""
    chain: list[tuple[Term, Optional[str]]] = []
    current = start
    for _ in range(limit):
        img = bindings.get(current)
        if img is None:
            break
        img = beta_normalize(img)
        successors = [v for v in free_vars_ordered(img) if v in known_vars]
        if len(successors) != 1:
            chain.append((img, None))
            break
        nxt = successors[0]
        ctx = _one_hole_context(img, nxt)
        if ctx is None:
            chain.append((img, None))
            break
        chain.append((ctx, nxt))
        current = nxt
    return chain


def synthesize_fix_args(trace: DerivationTrace) -> list[InvariantCandidate]:
    """Solve constructor recurrences among output bindings as fix terms.

    Two shapes are recognized: a self-similar recurrence ``v ~ C[v']`` with
    identical closed contexts, giving ``fix \\x. C[x]`` substituted into the
    goal, and a single-parameter stream recurrence ``v ~ C(t, v')`` whose
    parameter advances in lockstep with the traced predicate's input,
    giving an invariant universally quantified over that input.
    """
    if not trace.steps or not trace.steps[0].goals or trace.sig is None:
        return []
    first_goal = trace.steps[0].goals[0]
    if not isinstance(first_goal, Atom):
        return []
    bindings = _merged_bindings(trace)
    known = set(trace.var_types)
    out: list[InvariantCandidate] = []

    # a loop closed by a cyclic unifier already solved its recurrence: the
    # materialized fix bindings give the invariant directly
    if trace.verdict == LOOP_FOUND and trace.loop is not None and trace.loop_subst is not None:
        if any(contains_fix(t) for t in trace.loop_subst.bindings.values()):
            looping = trace.steps[trace.loop[1]].goals[0]
            closed = subst_formula(trace.loop_subst, looping)
            candidate = _close_universally(closed, trace.var_types)
            if candidate is not None and formula_contains_fix(candidate):
                cand = _candidate(candidate, PROVENANCE_FIX)
                if cand is not None:
                    out.append(cand)

    for var in free_vars_ordered(first_goal.term):
        typ = trace.var_types.get(var)
        if typ is None or not isinstance(typ, BaseType):
            continue
        chain = _chain_from(var, bindings, known)
        links = [(ctx, nxt) for ctx, nxt in chain if nxt is not None]
        if len(links) < 2:
            continue
        contexts = [ctx for ctx, _ in links]

        closed_ctx = contexts[0]
        if all(alpha_equal(c, closed_ctx) for c in contexts[1:]) and free_vars(closed_ctx) == {_HOLE}:
            fix_term = Fix("x", typ, raw_subst(closed_ctx, {_HOLE: Var("x")}))
            if check_guarded(fix_term):
                inv = subst_formula1(first_goal, var, beta_normalize(fix_term))
                if formula_closed(inv, trace.sig):
                    cand = _candidate(inv, PROVENANCE_FIX)
                    if cand is not None:
                        out.append(cand)
                        continue

        cand = _stream_candidate(trace, first_goal, var, typ, contexts)
        if cand is not None:
            out.append(cand)
    return out


def _stream_candidate(trace: DerivationTrace, first_goal: Atom, var: str,
                      typ: BaseType, contexts: list[Term]) -> Optional[InvariantCandidate]:
    assert trace.sig is not None
    shapes = [spine(c) for c in contexts]
    head0, args0 = shapes[0]
    if not isinstance(head0, Const) or not args0:
        return None
    if not all(isinstance(h, Const) and h.name == head0.name and len(a) == len(args0)
               for h, a in shapes):
        return None
    hole_positions = {i for _, args in shapes for i, a in enumerate(args)
                      if _HOLE in free_vars(a)}
    if len(hole_positions) != 1:
        return None
    hole_pos = hole_positions.pop()
    if any(args[hole_pos] != Var(_HOLE) for _, args in shapes):
        return None

    progressing: Optional[int] = None
    step_ctx: Optional[Term] = None
    for i in range(len(args0)):
        if i == hole_pos:
            continue
        column = [args[i] for _, args in shapes]
        if all(alpha_equal(c, column[0]) for c in column[1:]):
            continue
        if progressing is not None:
            return None
        progressing = i
        step_ctx = _difference_context(column)
        if step_ctx is None:
            return None
    if progressing is None or step_ctx is None:
        return None

    params = [args[progressing] for _, args in shapes]
    try:
        param_type = typecheck(trace.sig, dict(trace.var_types), params[0])
    except TermError:
        return None

    # the traced predicate's own arguments must follow the same progression
    main_pred = _atom_pred(first_goal)
    main_atoms: list[Formula] = []
    for i in range(1, len(trace.steps)):
        head = trace.steps[i - 1].goals[0] if trace.steps[i - 1].goals else None
        if head is not None and _atom_pred(head) == main_pred:
            main_atoms.append(subst_formula(trace.steps[i].substitution, head))
    if len(main_atoms) < len(params):
        return None

    _, goal_args = spine(first_goal.term)
    input_positions = []
    for pos in range(len(goal_args)):
        column = [spine(term_of_formula(a))[1][pos] for a in main_atoms[: len(params)]]
        if all(alpha_equal(c, p) for c, p in zip(column, params)):
            input_positions.append(pos)
    if len(input_positions) != 1:
        return None
    input_pos = input_positions[0]

    rec_call = App(Var("f"), raw_subst(step_ctx, {_HOLE: Var("n")}))
    body_args: list[Term] = []
    for i, arg in enumerate(args0):
        if i == hole_pos:
            body_args.append(rec_call)
        elif i == progressing:
            body_args.append(Var("n"))
        else:
            body_args.append(arg)
    body: Term = Const(head0.name)
    for a in body_args:
        body = App(body, a)
    fix_term = Fix("f", Arrow(param_type, typ), Lam("n", param_type, body))
    if not check_guarded(fix_term):
        return None
    fix_term = beta_normalize(fix_term)

    head_const, _ = spine(first_goal.term)
    new_args: list[Term] = []
    for pos, arg in enumerate(goal_args):
        if pos == input_pos:
            new_args.append(Var("x"))
        elif arg == Var(var):
            new_args.append(App(fix_term, Var("x")))
        elif not free_vars(arg):
            new_args.append(arg)
        else:
            return None
    atom_term: Term = head_const
    for a in new_args:
        atom_term = App(atom_term, a)
    inv = Forall("x", param_type, Atom(atom_term))
    if not formula_closed(inv, trace.sig):
        return None
    return _candidate(inv, PROVENANCE_FIX)


def _difference_context(column: list[Term]) -> Optional[Term]:
    """One-hole step context ``g`` with ``column[i+1] = g[column[i]]``."""
    step: Optional[Term] = None
    for prev, cur in zip(column, column[1:]):
        ctx = _replace_unique_subterm(cur, prev)
        if ctx is None:
            return None
        if step is None:
            step = ctx
        elif not alpha_equal(step, ctx):
            return None
    return step


def _replace_unique_subterm(t: Term, target: Term) -> Optional[Term]:
    count = [0]

    def go(t: Term) -> Term:
        if alpha_equal(t, target):
            count[0] += 1
            return Var(_HOLE)
        if isinstance(t, App):
            return App(go(t.fun), go(t.arg))
        return t

    out = go(t)
    return out if count[0] == 1 else None


# ---------------------------------------------------------------------------
# Uniform proof search


class _SearchState:
    def __init__(self, frag: Fragment, allow_fix: bool, cfg: SearchConfig,
                 base_len: int, lemma_range: tuple[int, int],
                 hints: tuple[Term, ...]):
        self.frag = frag
        self.allow_fix = allow_fix
        self.cfg = cfg
        self.base_len = base_len
        self.lemma_range = lemma_range
        self.hints = hints
        self.nodes = 0
        self.meta_counter = 0

    def fresh_meta(self) -> str:
        self.meta_counter += 1
        return f"%m{self.meta_counter}%"


def _decide_order(program_len: int, base_len: int) -> list[int]:
    dynamic = list(range(program_len - 1, base_len - 1, -1))
    return dynamic + list(range(min(base_len, program_len)))


def _fresh_eigen(sig: Signature, base: str) -> str:
    if base not in sig:
        return base
    i = 1
    while f"{base}{i}" in sig:
        i += 1
    return f"{base}{i}"


def _witness_ok(state: _SearchState, sig: Signature, witness: Term,
                expected: SimpleType) -> bool:
    return _witness_error(state.frag, sig, witness, expected, state.allow_fix) is None


@dataclass(frozen=True)
class _PlanStep:
    kind: str  # forall | andL | imp
    side: Optional[str] = None


def _clause_plans(f: Formula, steps: tuple[_PlanStep, ...] = ()) -> Iterator[tuple[_PlanStep, ...]]:
    if isinstance(f, Forall):
        yield from _clause_plans(f.body, steps + (_PlanStep("forall"),))
    elif isinstance(f, And):
        yield from _clause_plans(f.left, steps + (_PlanStep("andL", "left"),))
        yield from _clause_plans(f.right, steps + (_PlanStep("andL", "right"),))
    elif isinstance(f, Implies):
        yield from _clause_plans(f.right, steps + (_PlanStep("imp"),))
    elif isinstance(f, Atom):
        yield steps


def _plan_witnesses(state: _SearchState, sig: Signature, clause: Formula,
                    plan: tuple[_PlanStep, ...], goal_atom: Formula) -> Iterator[list[Term]]:
    """Witness lists (one per quantifier step) that make the plan's head atom
    unify with the goal atom; head-unbound variables are closed by bounded
    ground enumeration."""
    metas: list[tuple[str, SimpleType]] = []
    current: Formula = clause
    for step in plan:
        if step.kind == "forall":
            assert isinstance(current, Forall)
            meta = state.fresh_meta()
            metas.append((meta, current.binder_type))
            current = subst_formula1(current.body, current.binder, Var(meta))
        elif step.kind == "andL":
            assert isinstance(current, And)
            current = current.left if step.side == "left" else current.right
        else:
            assert isinstance(current, Implies)
            current = current.right
    if not isinstance(current, Atom):
        return
    var_types = dict(metas)
    try:
        sigma = unify_rational(current.term, goal_atom.term,
                               var_types=var_types, budget=state.cfg.unfold_budget)
    except (FlexibleHeadError, TermError):
        return
    if sigma is None:
        return
    unbound = [(m, t) for m, t in metas if sigma.get(m) is None]
    if not unbound:
        witnesses = [beta_normalize(sigma.bindings[m]) for m, _ in metas]
        if all(not free_vars(w) for w in witnesses):
            yield witnesses
        return
    pools = []
    for _, typ in unbound:
        pool = ground_terms(sig, typ, 2, include_fix=state.allow_fix)
        if not pool:
            return
        pools.append(pool)
    for combo in itertools.islice(itertools.product(*pools), 64):
        assignment = dict(sigma.bindings)
        assignment.update({m: t for (m, _), t in zip(unbound, combo)})
        witnesses = []
        ok = True
        for m, _ in metas:
            w = beta_normalize(raw_subst(assignment[m], assignment))
            if free_vars(w):
                ok = False
                break
            witnesses.append(w)
        if ok:
            yield witnesses


def _prove(state: _SearchState, seq: MainSeq, fuel: int) -> Optional[tuple[ProofNode, int]]:
    if fuel <= 0:
        return None
    state.nodes += 1
    goal = seq.goal
    f = goal.formula

    if goal.guarded:
        if isinstance(f, And):
            return _pair_right(state, seq, AND_R_G, f.left, f.right, True, fuel)
        if isinstance(f, Implies):
            hyp = MarkedFormula(f.left, True)
            premise = MainSeq(seq.sig, seq.program + (hyp,), MarkedFormula(f.right, True))
            return _wrap1(state, IMP_R_G, seq, premise, fuel)
        if isinstance(f, Forall):
            return _forall_right(state, seq, FORALL_R_G, f, True, fuel)
        if isinstance(f, Atom):
            return _decide(state, seq, True, fuel)
        return None

    if isinstance(f, Top):
        return ProofNode(TOP_R, seq), 1
    if isinstance(f, And):
        return _pair_right(state, seq, AND_R, f.left, f.right, False, fuel)
    if isinstance(f, Or):
        for rule, side in ((OR_R_LEFT, f.left), (OR_R_RIGHT, f.right)):
            premise = MainSeq(seq.sig, seq.program, MarkedFormula(side, False))
            sub = _prove(state, premise, fuel - 1)
            if sub is not None:
                node, used = sub
                return ProofNode(rule, seq, (node,)), used + 1
        return None
    if isinstance(f, Implies):
        hyp = MarkedFormula(f.left, False)
        premise = MainSeq(seq.sig, seq.program + (hyp,), MarkedFormula(f.right, False))
        return _wrap1(state, IMP_R, seq, premise, fuel)
    if isinstance(f, Forall):
        return _forall_right(state, seq, FORALL_R, f, False, fuel)
    if isinstance(f, Exists):
        tried: list[Term] = []
        candidates = list(state.hints) + ground_terms(
            seq.sig, f.binder_type, 2, include_fix=state.allow_fix
        )
        for witness in candidates:
            witness = beta_normalize(witness)
            if any(witness == t for t in tried):
                continue
            tried.append(witness)
            if not _witness_ok(state, seq.sig, witness, f.binder_type):
                continue
            body = subst_formula1(f.body, f.binder, witness)
            premise = MainSeq(seq.sig, seq.program, MarkedFormula(body, False))
            sub = _prove(state, premise, fuel - 1)
            if sub is not None:
                node, used = sub
                return ProofNode(EXISTS_R, seq, (node,), WitnessPayload(witness)), used + 1
        return None
    if isinstance(f, Atom):
        return _decide(state, seq, False, fuel)
    return None


def _wrap1(state: _SearchState, rule: str, seq: MainSeq, premise: MainSeq,
           fuel: int) -> Optional[tuple[ProofNode, int]]:
    sub = _prove(state, premise, fuel - 1)
    if sub is None:
        return None
    node, used = sub
    return ProofNode(rule, seq, (node,)), used + 1


def _pair_right(state: _SearchState, seq: MainSeq, rule: str, left: Formula,
                right: Formula, guarded: bool, fuel: int) -> Optional[tuple[ProofNode, int]]:
    sub1 = _prove(state, MainSeq(seq.sig, seq.program, MarkedFormula(left, guarded)), fuel - 1)
    if sub1 is None:
        return None
    node1, used1 = sub1
    sub2 = _prove(state, MainSeq(seq.sig, seq.program, MarkedFormula(right, guarded)),
                  fuel - 1 - used1)
    if sub2 is None:
        return None
    node2, used2 = sub2
    return ProofNode(rule, seq, (node1, node2)), used1 + used2 + 1


def _forall_right(state: _SearchState, seq: MainSeq, rule: str, f: Forall,
                  guarded: bool, fuel: int) -> Optional[tuple[ProofNode, int]]:
    eigen = _fresh_eigen(seq.sig, f.binder)
    new_sig = seq.sig.extend(eigen, f.binder_type)
    body = subst_formula1(f.body, f.binder, Const(eigen))
    premise = MainSeq(new_sig, seq.program, MarkedFormula(body, guarded))
    sub = _prove(state, premise, fuel - 1)
    if sub is None:
        return None
    node, used = sub
    return ProofNode(rule, seq, (node,), EigenPayload(eigen, f.binder_type)), used + 1


def _decide(state: _SearchState, seq: MainSeq, guarded: bool,
            fuel: int) -> Optional[tuple[ProofNode, int]]:
    goal = seq.goal
    rule = DECIDE_G if guarded else DECIDE
    for index in _decide_order(len(seq.program), state.base_len):
        entry = seq.program[index]
        if entry.guarded:
            continue
        for plan in _clause_plans(entry.formula):
            for witnesses in _plan_witnesses(state, seq.sig, entry.formula, plan, goal.formula):
                focused = FocusSeq(seq.sig, seq.program, entry.formula, goal)
                sub = _focus(state, focused, plan, 0, witnesses, 0, guarded, fuel - 1)
                if sub is not None:
                    node, used = sub
                    lemma = state.lemma_range[0] <= index < state.lemma_range[1]
                    return (ProofNode(rule, seq, (node,), DecidePayload(index, lemma)),
                            used + 1)
    return None


def _focus(state: _SearchState, seq: FocusSeq, plan: tuple[_PlanStep, ...],
           step_index: int, witnesses: list[Term], witness_index: int,
           guarded: bool, fuel: int) -> Optional[tuple[ProofNode, int]]:
    if fuel <= 0:
        return None
    state.nodes += 1
    focus = seq.focus
    goal = seq.goal

    if step_index == len(plan):
        if not isinstance(focus, Atom):
            return None
        verdict = fixbeta_equal(term_of_formula(focus), term_of_formula(goal.formula),
                                state.cfg.unfold_budget)
        if not verdict.is_equal:
            return None
        return ProofNode(INITIAL_G if guarded else INITIAL, seq), 1

    step = plan[step_index]
    if step.kind == "forall":
        if not isinstance(focus, Forall):
            return None
        witness = witnesses[witness_index]
        if not _witness_ok(state, seq.sig, witness, focus.binder_type):
            return None
        new_focus = subst_formula1(focus.body, focus.binder, witness)
        premise = FocusSeq(seq.sig, seq.program, new_focus, goal)
        sub = _focus(state, premise, plan, step_index + 1, witnesses,
                     witness_index + 1, guarded, fuel - 1)
        if sub is None:
            return None
        node, used = sub
        rule = FORALL_L_G if guarded else FORALL_L
        return ProofNode(rule, seq, (node,), WitnessPayload(witness)), used + 1

    if step.kind == "andL":
        if not isinstance(focus, And):
            return None
        side = focus.left if step.side == "left" else focus.right
        rule = {
            (True, "left"): AND_L_LEFT_G,
            (True, "right"): AND_L_RIGHT_G,
            (False, "left"): AND_L_LEFT,
            (False, "right"): AND_L_RIGHT,
        }[(guarded, step.side)]
        premise = FocusSeq(seq.sig, seq.program, side, goal)
        sub = _focus(state, premise, plan, step_index + 1, witnesses,
                     witness_index, guarded, fuel - 1)
        if sub is None:
            return None
        node, used = sub
        return ProofNode(rule, seq, (node,)), used + 1

    # implication: continue the focus on the left premise, prove the
    # antecedent on the right; the guarded variant releases all marks
    if not isinstance(focus, Implies):
        return None
    if guarded:
        program = erase_marks(seq.program)
        left_goal = MarkedFormula(goal.formula, False)
        rule = IMP_L_G
        next_guarded = False
    else:
        program = seq.program
        left_goal = goal
        rule = IMP_L
        next_guarded = False
    left_seq = FocusSeq(seq.sig, program, focus.right, left_goal)
    sub_left = _focus(state, left_seq, plan, step_index + 1, witnesses,
                      witness_index, next_guarded, fuel - 1)
    if sub_left is None:
        return None
    node_left, used_left = sub_left
    right_seq = MainSeq(seq.sig, program, MarkedFormula(focus.left, False))
    sub_right = _prove(state, right_seq, fuel - 1 - used_left)
    if sub_right is None:
        return None
    node_right, used_right = sub_right
    return ProofNode(rule, seq, (node_left, node_right)), used_left + used_right + 1


def _fuel_ladder(limit: int) -> list[int]:
    if limit <= 8:
        return [limit]
    ladder = []
    fuel = 8
    while fuel < limit:
        ladder.append(fuel)
        fuel *= 2
    ladder.append(limit)
    return ladder


def uniform_search(
    frag: Fragment,
    sequent: Sequent,
    cfg: SearchConfig = DEFAULT_CONFIG,
    allow_fix: bool = False,
    hints: tuple[Term, ...] = (),
    base_len: Optional[int] = None,
    lemma_range: Optional[tuple[int, int]] = None,
    stats: Optional[list[int]] = None,
) -> Optional[ProofNode]:
    """Depth-bounded goal-directed search from a main or root sequent.

    Right rules decompose compound goals deterministically; backchaining
    tries search-added hypotheses (most recent first), then program entries
    in source order.  Returns a certificate the kernel accepts, or ``None``
    within the budget.
    """
    if isinstance(sequent, RootSeq):
        if not is_core(frag, sequent.goal, allow_fix):
            return None
        try:
            premise_seq = apply_cofix(frag, sequent, allow_fix)
        except Exception:
            return None
        n_base = len(sequent.program) if base_len is None else base_len
        lemmas = lemma_range or (n_base, n_base)
        for fuel in _fuel_ladder(cfg.depth_limit):
            state = _SearchState(frag, allow_fix, cfg, n_base, lemmas, hints)
            sub = _prove(state, premise_seq, fuel - 1)
            if stats is not None:
                stats.append(state.nodes)
            if sub is not None:
                node, _ = sub
                return ProofNode(CO_FIX, sequent, (node,))
        return None

    if not isinstance(sequent, MainSeq):
        raise ValueError("uniform_search starts from a main or root sequent")
    n_base = len(sequent.program) if base_len is None else base_len
    lemmas = lemma_range or (n_base, n_base)
    for fuel in _fuel_ladder(cfg.depth_limit):
        state = _SearchState(frag, allow_fix, cfg, n_base, lemmas, hints)
        sub = _prove(state, sequent, fuel)
        if stats is not None:
            stats.append(state.nodes)
        if sub is not None:
            return sub[0]
    return None


# ---------------------------------------------------------------------------
# The prover pipeline


def _strip_goal(goal: Formula) -> Optional[tuple[list[Formula], dict[str, SimpleType]]]:
    """Flatten an atom-conjunction goal core, opening existential binders as
    output variables."""
    var_types: dict[str, SimpleType] = {}
    used: set[str] = set()

    def fresh(base: str) -> str:
        name = base
        i = 1
        while name in used:
            name = f"{base}{i}"
            i += 1
        used.add(name)
        return name

    def go(f: Formula) -> Optional[list[Formula]]:
        if isinstance(f, Exists):
            name = fresh(f.binder)
            var_types[name] = f.binder_type
            return go(subst_formula1(f.body, f.binder, Var(name)))
        if isinstance(f, And):
            left = go(f.left)
            right = go(f.right)
            if left is None or right is None:
                return None
            return left + right
        if isinstance(f, Atom):
            return [f]
        if isinstance(f, Top):
            return []
        return None

    atoms = go(goal)
    if atoms is None:
        return None
    return atoms, var_types


def _conj_of(atoms: list[Formula]) -> Formula:
    out = atoms[0]
    for a in atoms[1:]:
        out = And(out, a)
    return out


def _hint_terms(sig: Signature, f: Formula) -> tuple[Term, ...]:
    """Closed argument terms of the formula's atoms, usable as witnesses."""
    hints: list[Term] = []

    def from_atom(term: Term) -> None:
        _, args = spine(term)
        for a in args:
            a = beta_normalize(a)
            if not free_vars(a) and a not in hints:
                hints.append(a)

    def go(f: Formula) -> None:
        if isinstance(f, Atom):
            from_atom(f.term)
        elif isinstance(f, (And, Or, Implies)):
            go(f.left)
            go(f.right)
        elif isinstance(f, (Forall, Exists)):
            go(f.body)

    go(f)
    return tuple(hints)


def _entry_sequent(program: Program, goal: Formula) -> MainSeq:
    entries = tuple(MarkedFormula(c, False) for c in program.entries())
    return MainSeq(program.sig, entries, MarkedFormula(goal, False))


def candidate_invariants(program: Program, trace: DerivationTrace,
                         order: tuple[str, ...] = DEFAULT_HEURISTIC_ORDER) -> list[InvariantCandidate]:
    """All invariant candidates from a trace, bucketed by provenance and
    emitted in heuristic order, deduplicated."""
    generalized = generalize_invariant(trace, program)
    buckets: dict[str, list[InvariantCandidate]] = {
        PROVENANCE_LOOP: [c for c in [detect_loop(trace)] if c is not None],
        PROVENANCE_GENERALIZE: [c for c in generalized if c.provenance == PROVENANCE_GENERALIZE],
        PROVENANCE_CONDITIONAL: [c for c in generalized if c.provenance == PROVENANCE_CONDITIONAL],
        PROVENANCE_FIX: synthesize_fix_args(trace),
    }
    out: list[InvariantCandidate] = []
    seen: list[Formula] = []
    for tag in order:
        for cand in buckets.get(tag, []):
            if any(formula_alpha_equal(cand.formula, s) for s in seen):
                continue
            seen.append(cand.formula)
            out.append(cand)
    return out


def prove(frag: Fragment, program: Program, goal: Formula,
          cfg: SearchConfig = DEFAULT_CONFIG) -> Optional[SearchResult]:
    """Prove a goal coinductively, discovering the invariant when needed.

    Core goals are first attempted directly; otherwise (or on failure) a
    resolution trace supplies invariant candidates, each proved under co-fix
    and then used as a lemma for an ordinary uniform proof of the original
    goal.  Both certificates are re-checked by the kernel before returning.
    """
    allow_fix = program.allow_fix
    if not (is_goal(frag, goal, allow_fix) or is_core(frag, goal, allow_fix)):
        raise ValueError(f"goal is neither a {frag} goal nor a {frag} core formula")
    if not formula_closed(goal, program.sig):
        raise ValueError("goals must be closed")

    started = time.perf_counter()
    nodes: list[int] = []

    def result(inv: InvariantCandidate, inv_proof: ProofNode,
               cor_proof: Optional[ProofNode]) -> SearchResult:
        report = check_proof(frag, inv_proof, allow_fix, cfg.unfold_budget)
        if not report.accepted:
            raise AssertionError(f"search produced a rejected certificate: {report.first_error}")
        if cor_proof is not None:
            cor_report = check_uniform_proof(frag, cor_proof, allow_fix, cfg.unfold_budget)
            if not cor_report.accepted:
                raise AssertionError(
                    f"search produced a rejected corollary: {cor_report.first_error}"
                )
        elapsed = time.perf_counter() - started
        return SearchResult(inv, inv_proof, cor_proof, SearchStats(sum(nodes), elapsed))

    if is_core(frag, goal, allow_fix):
        root = RootSeq(program.sig, program.entries(), goal)
        cert = uniform_search(frag, root, cfg, allow_fix,
                              base_len=len(program.clauses) + len(program.lemmas),
                              lemma_range=(len(program.clauses), len(program.entries())),
                              stats=nodes)
        if cert is not None:
            minimal = minimal_core_fragment(goal)
            inv_frag, uses_fix = minimal if minimal else (frag, formula_contains_fix(goal))
            inv = InvariantCandidate(goal, inv_frag, uses_fix, PROVENANCE_DIRECT)
            return result(inv, cert, None)

    stripped = _strip_goal(goal)
    if stripped is None:
        return None
    atoms, _ = stripped
    if not atoms:
        return None
    try:
        trace = sld_trace(program, _conj_of(atoms), cfg)
    except FlexibleGoalHead:
        return None

    for cand in candidate_invariants(program, trace, cfg.heuristic_order):
        if not is_core(frag, cand.formula, allow_fix):
            continue
        root = RootSeq(program.sig, program.entries(), cand.formula)
        cert = uniform_search(frag, root, cfg, allow_fix,
                              base_len=len(program.entries()),
                              lemma_range=(len(program.clauses), len(program.entries())),
                              stats=nodes)
        if cert is None:
            continue
        extended = register_lemma(program, cand.formula, cert)
        if formula_alpha_equal(cand.formula, goal):
            return result(cand, cert, None)
        hints = _hint_terms(program.sig, cand.formula)
        corollary = uniform_search(
            frag, _entry_sequent(extended, goal), cfg, allow_fix, hints,
            base_len=len(extended.entries()),
            lemma_range=(len(extended.clauses), len(extended.entries())),
            stats=nodes,
        )
        if corollary is not None:
            return result(cand, cert, corollary)
    return None
