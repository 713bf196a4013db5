"""Bounded membership oracle for greatest complete Herbrand models.

An atom is in the greatest model iff it has a (possibly infinite) derivation
tree: some clause instance matches its head up to tree equality and every
body atom is again in the model.  The oracle decides membership for ground
rational atoms by exploring that rule coinductively: atoms already assumed
on the current derivation path count as members (cycle acceptance), chains
still alive at the assumption-budget horizon count as members (gfp
over-approximation, exact on the constructor-growing programs this models),
and ``Out`` is reported only when every derivation attempt fails finitely.
Irrational query atoms and truncated body enumerations yield ``Unknown``.

Independent of the proof kernel: used as a soundness cross-check.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Iterator, Optional, Union

from .formulas import (
    And,
    Atom,
    Exists,
    Forall,
    Formula,
    Implies,
    Or,
    Program,
    Top,
    formula_closed,
    formula_of_term,
    term_of_formula,
)
from .terms import (
    EQUAL,
    FORMULA_TYPE,
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
    alpha_canonical,
    beta_normalize,
    check_guarded,
    contains_fix,
    fixbeta_equal,
    flatten_arrow,
    free_vars,
    one_step_unfold,
    raw_subst,
    spine,
    subterms,
    unify_rational,
)

IN = "in"
OUT = "out"
UNKNOWN = "unknown"

REASON_BUDGET = "budget"
REASON_IRRATIONAL = "irrational"


@dataclass(frozen=True)
class OracleConfig:
    assume_budget: int = 32   # max atoms on one coinductive derivation path
    depth_budget: int = 6     # ground-term depth for body-variable closure
    work_budget: int = 200_000  # total atom evaluations before giving up


@dataclass(frozen=True)
class WitnessStep:
    clause_index: int
    head_instance: Term
    body: tuple[Term, ...]


@dataclass(frozen=True)
class MembershipVerdict:
    kind: str  # in | out | unknown
    reason: Optional[str] = None
    witness: dict[Term, WitnessStep] = field(default_factory=dict, compare=False)

    @property
    def is_in(self) -> bool:
        return self.kind == IN


# ---------------------------------------------------------------------------
# Rational atoms


@dataclass(frozen=True)
class RationalAtom:
    atom: Formula
    ground: bool
    is_rational: bool


def _successors(t: Term) -> list[Term]:
    head, args = spine(t)
    if isinstance(head, Fix):
        return [one_step_unfold(t)]
    if isinstance(head, (Lam,)):
        return [head.body] + args
    return args


def term_is_rational(t: Term, budget: int = 64) -> bool:
    """Finitely many distinct subtrees up to unfolding, within ``budget``."""
    states: set[Term] = set()
    frontier = [beta_normalize(t)]
    while frontier:
        current = alpha_canonical(frontier.pop())
        if current in states:
            continue
        states.add(current)
        if len(states) > budget:
            return False
        frontier.extend(_successors(current))
    return True


def make_rational_atom(sig: Signature, f: Formula, budget: int = 64) -> RationalAtom:
    if not isinstance(f, Atom):
        raise TermError("membership queries take atoms")
    ground = formula_closed(f, sig)
    if not ground:
        raise TermError("membership queries take ground atoms")
    for sub in subterms(f.term):
        if isinstance(sub, Fix) and not check_guarded(sub):
            raise TermError("query atom contains an unguarded fix term")
    return RationalAtom(f, ground, term_is_rational(f.term, budget))


# ---------------------------------------------------------------------------
# Ground-term enumeration


def base_types_of(sig: Signature) -> list[BaseType]:
    found: list[BaseType] = []
    for typ in sig.constants.values():
        args, result = flatten_arrow(typ)
        for t in args + [result]:
            if isinstance(t, BaseType) and t != FORMULA_TYPE and t not in found:
                found.append(t)
    return found


def _constructors(sig: Signature, typ: BaseType) -> list[tuple[str, list[SimpleType]]]:
    out = []
    for name, ctype in sig.constants.items():
        args, result = flatten_arrow(ctype)
        if result == typ and all(isinstance(a, BaseType) and a != FORMULA_TYPE for a in args):
            out.append((name, args))
    return out


def _finite_terms(
    sig: Signature, typ: SimpleType, depth: int, extra_leaf: Optional[tuple[str, SimpleType]] = None
) -> list[Term]:
    """Ground constructor terms of ``typ`` with depth at most ``depth``;
    ``extra_leaf`` admits one variable as an additional leaf."""
    if not isinstance(typ, BaseType):
        return []
    result: list[Term] = []
    if extra_leaf is not None and extra_leaf[1] == typ:
        result.append(Var(extra_leaf[0]))
    for name, args in _constructors(sig, typ):
        if not args:
            result.append(Const(name))
        elif depth > 0:
            pools = [_finite_terms(sig, a, depth - 1, extra_leaf) for a in args]
            for combo in itertools.product(*pools):
                term = Const(name)
                for arg in combo:
                    term = App(term, arg)
                result.append(term)
    return result


def rational_terms(sig: Signature, typ: SimpleType, depth: int) -> list[Term]:
    """Guarded fix terms of base type with representation depth <= depth,
    deduplicated up to tree equality."""
    if not isinstance(typ, BaseType):
        return []
    binder = "x"
    bodies = [
        b
        for b in _finite_terms(sig, typ, depth, extra_leaf=(binder, typ))
        if isinstance(b, App) and binder in free_vars(b)
    ]
    candidates = []
    for body in bodies:
        fix = Fix(binder, typ, body)
        if check_guarded(fix):
            candidates.append(beta_normalize(fix))
    unique: list[Term] = []
    for cand in candidates:
        if not any(fixbeta_equal(cand, seen, 16).is_equal for seen in unique):
            unique.append(cand)
    return unique


_GROUND_CACHE: dict[tuple, list[Term]] = {}


def _sig_key(sig: Signature) -> tuple:
    return tuple(sig.constants.items())


def ground_terms(sig: Signature, typ: SimpleType, depth: int, include_fix: bool = True) -> list[Term]:
    key = (_sig_key(sig), typ, depth, include_fix)
    cached = _GROUND_CACHE.get(key)
    if cached is None:
        finite = _finite_terms(sig, typ, depth)
        cached = finite if not include_fix else finite + rational_terms(sig, typ, depth)
        if len(_GROUND_CACHE) > 512:
            _GROUND_CACHE.clear()
        _GROUND_CACHE[key] = cached
    return list(cached)


def universe_is_finite(sig: Signature, typ: SimpleType) -> bool:
    """Whether the ground constructor universe at ``typ`` is finite (no
    constructor can recurse through this type)."""
    if not isinstance(typ, BaseType):
        return True

    seen: set[BaseType] = set()

    def reachable(t: BaseType) -> Iterator[BaseType]:
        for _, args in _constructors(sig, t):
            for a in args:
                if isinstance(a, BaseType):
                    yield a

    frontier = [typ]
    while frontier:
        current = frontier.pop()
        for nxt in reachable(current):
            if nxt == typ:
                return False
            if nxt not in seen:
                seen.add(nxt)
                frontier.append(nxt)
    return True


# ---------------------------------------------------------------------------
# Clause decomposition (Horn paths)


@dataclass(frozen=True)
class HornPath:
    binders: tuple[tuple[str, SimpleType], ...]
    body: tuple[Formula, ...]
    head: Formula  # an atom


def horn_paths(clause: Formula) -> list[HornPath]:
    """All routes through a program clause to one of its head atoms."""
    paths: list[HornPath] = []

    def go(f: Formula, binders: tuple, body: tuple) -> None:
        if isinstance(f, Forall):
            go(f.body, binders + ((f.binder, f.binder_type),), body)
        elif isinstance(f, And):
            go(f.left, binders, body)
            go(f.right, binders, body)
        elif isinstance(f, Implies):
            go(f.right, binders, body + (f.left,))
        elif isinstance(f, Atom):
            paths.append(HornPath(binders, body, f))

    go(clause, (), ())
    return paths


def _rename_path(path: HornPath, suffix: str) -> tuple[HornPath, dict[str, SimpleType]]:
    mapping: dict[str, Term] = {}
    var_types: dict[str, SimpleType] = {}
    binders = []
    for name, typ in path.binders:
        fresh = f"{name}_{suffix}"
        mapping[name] = Var(fresh)
        var_types[fresh] = typ
        binders.append((fresh, typ))
    body = tuple(
        formula_of_term(beta_normalize(raw_subst(term_of_formula(g), mapping)))
        for g in path.body
    )
    head = formula_of_term(beta_normalize(raw_subst(term_of_formula(path.head), mapping)))
    return HornPath(tuple(binders), body, head), var_types


def _flatten_goal(g: Formula) -> Optional[list[list[Formula]]]:
    """Disjunctive normal view of a clause body goal: a list of alternative
    atom conjunctions (existential binders become free variables to close by
    enumeration).  ``None`` when the body goal is not Horn-shaped."""
    if isinstance(g, Top):
        return [[]]
    if isinstance(g, Atom):
        return [[g]]
    if isinstance(g, And):
        left = _flatten_goal(g.left)
        right = _flatten_goal(g.right)
        if left is None or right is None:
            return None
        return [l + r for l in left for r in right]
    if isinstance(g, Or):
        left = _flatten_goal(g.left)
        right = _flatten_goal(g.right)
        if left is None or right is None:
            return None
        return left + right
    if isinstance(g, Exists):
        return _flatten_goal(g.body)
    return None


# ---------------------------------------------------------------------------
# Membership

_TRUE = "T"
_FALSE = "F"
_UNKNOWN = "U"


class _Flags:
    __slots__ = ("dep", "opt", "truncated")

    def __init__(self) -> None:
        self.dep = False
        self.opt = False
        self.truncated = False


def gfp_member(program: Program, atom: RationalAtom, cfg: OracleConfig = OracleConfig()) -> MembershipVerdict:
    """Decide membership of a ground rational atom in the greatest model."""
    if not atom.is_rational:
        return MembershipVerdict(UNKNOWN, REASON_IRRATIONAL)

    sig = program.sig
    clauses = program.clauses
    false_memo: set[Term] = set()
    true_memo: set[Term] = set()
    witness: dict[Term, WitnessStep] = {}
    counter = itertools.count()
    work = [0]

    def head_pred(f: Formula) -> Optional[str]:
        head, _ = spine(term_of_formula(f))
        return head.name if isinstance(head, Const) else None

    all_paths = [
        (clause_index, horn, head_pred(horn.head))
        for clause_index, clause in enumerate(clauses)
        for horn in horn_paths(clause)
    ]

    def eval_atom(term: Term, path: tuple[Term, ...], flags: _Flags) -> str:
        term = beta_normalize(term)
        if term in true_memo:
            return _TRUE
        if term in false_memo:
            return _FALSE
        work[0] += 1
        if work[0] > cfg.work_budget:
            flags.truncated = True
            return _UNKNOWN
        head, _ = spine(term)
        for assumed in path:
            assumed_head, _ = spine(assumed)
            if isinstance(head, Const) and isinstance(assumed_head, Const):
                if head.name != assumed_head.name:
                    continue
            if term == assumed or fixbeta_equal(term, assumed, 16).is_equal:
                flags.dep = True
                return _TRUE
        if len(path) >= cfg.assume_budget:
            flags.opt = True
            return _TRUE
        if contains_fix(term) and not term_is_rational(term, 64):
            flags.truncated = True
            return _UNKNOWN

        goal_head, _ = spine(term)
        goal_pred = goal_head.name if isinstance(goal_head, Const) else None
        any_unknown = False
        for clause_index, horn, pred in all_paths:
            if pred is not None and goal_pred is not None and pred != goal_pred:
                continue
            renamed, var_types = _rename_path(horn, f"c{next(counter)}")
            try:
                sigma = unify_rational(
                    term_of_formula(renamed.head), term, var_types=var_types, budget=16
                )
            except (FlexibleHeadError, TermError):
                any_unknown = True
                continue
            if sigma is None:
                continue
            status = eval_instance(
                clause_index, renamed, sigma, var_types, term, path, flags
            )
            if status == _TRUE:
                return _TRUE
            if status == _UNKNOWN:
                any_unknown = True
        if any_unknown:
            return _UNKNOWN
        # finite failure never rests on path assumptions, so it is cacheable
        false_memo.add(term)
        return _FALSE

    def eval_instance(
        clause_index: int,
        horn: HornPath,
        sigma: Substitution,
        var_types: dict[str, SimpleType],
        goal_term: Term,
        path: tuple[Term, ...],
        flags: _Flags,
    ) -> str:
        body_terms = [
            beta_normalize(raw_subst(term_of_formula(g), sigma.bindings)) for g in horn.body
        ]
        alternatives: Optional[list[list[Formula]]] = [[]]
        for bt in body_terms:
            flat = _flatten_goal(formula_of_term(bt))
            if flat is None:
                flags.truncated = True
                return _UNKNOWN
            alternatives = [a + b for a in alternatives for b in flat]

        head_instance = beta_normalize(raw_subst(term_of_formula(horn.head), sigma.bindings))
        any_unknown = False
        for conj in alternatives:
            status = eval_conjunct_set(
                clause_index, head_instance, conj, var_types, goal_term, path, flags
            )
            if status == _TRUE:
                return _TRUE
            if status == _UNKNOWN:
                any_unknown = True
        return _UNKNOWN if any_unknown else _FALSE

    def eval_conjunct_set(
        clause_index: int,
        head_instance: Term,
        conj: list[Formula],
        var_types: dict[str, SimpleType],
        goal_term: Term,
        path: tuple[Term, ...],
        flags: _Flags,
    ) -> str:
        free: list[str] = []
        for g in conj:
            for v in sorted(free_vars(term_of_formula(g))):
                if v not in free:
                    free.append(v)
        assignments: Iterator[dict[str, Term]]
        truncated_enum = False
        if free:
            pools = []
            for v in free:
                typ = var_types.get(v)
                if typ is None or not isinstance(typ, BaseType):
                    flags.truncated = True
                    return _UNKNOWN
                pool = ground_terms(sig, typ, cfg.depth_budget, include_fix=program.allow_fix)
                if not universe_is_finite(sig, typ):
                    truncated_enum = True
                pools.append(pool)
            combos = itertools.product(*pools)
            capped = itertools.islice(combos, 200)
            assignments = ({v: t for v, t in zip(free, combo)} for combo in capped)
        else:
            assignments = iter([{}])

        goal_key = beta_normalize(goal_term)
        any_unknown = truncated_enum
        for assignment in assignments:
            status = _TRUE
            bodies: list[Term] = []
            local = _Flags()
            for g in conj:
                ground = beta_normalize(raw_subst(term_of_formula(g), assignment))
                bodies.append(ground)
                sub = eval_atom(ground, path + (goal_key,), local)
                if sub == _FALSE:
                    status = _FALSE
                    break
                if sub == _UNKNOWN:
                    status = _UNKNOWN
            if status == _TRUE:
                flags.dep |= local.dep
                flags.opt |= local.opt
                witness[goal_key] = WitnessStep(clause_index, head_instance, tuple(bodies))
                if not local.dep and not local.opt:
                    true_memo.add(goal_key)
                return _TRUE
            if status == _UNKNOWN:
                any_unknown = True
        if truncated_enum:
            flags.truncated = True
        return _UNKNOWN if any_unknown else _FALSE

    flags = _Flags()
    status = eval_atom(term_of_formula(atom.atom), (), flags)
    if status == _TRUE:
        return MembershipVerdict(IN, None, dict(witness))
    if status == _FALSE:
        return MembershipVerdict(OUT)
    return MembershipVerdict(UNKNOWN, REASON_BUDGET)


# ---------------------------------------------------------------------------
# Model enumeration


def enumerate_model(
    program: Program, term_depth: int, cfg: Optional[OracleConfig] = None
) -> set[Formula]:
    """All ground atoms over depth-bounded (finite or fix-rational) argument
    terms that the membership oracle accepts."""
    cfg = cfg or OracleConfig()
    sig = program.sig
    model: set[Formula] = set()
    for name, ctype in sig.constants.items():
        arg_types, result = flatten_arrow(ctype)
        if result != FORMULA_TYPE:
            continue
        if not all(isinstance(a, BaseType) and a != FORMULA_TYPE for a in arg_types):
            continue
        pools = [ground_terms(sig, a, term_depth, include_fix=True) for a in arg_types]
        for combo in itertools.product(*pools):
            term: Term = Const(name)
            for arg in combo:
                term = App(term, arg)
            atom = Atom(alpha_canonical(term))
            verdict = gfp_member(program, make_rational_atom(sig, atom), cfg)
            if verdict.is_in:
                model.add(atom)
    return model
