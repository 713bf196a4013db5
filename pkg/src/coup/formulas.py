"""Formula AST, atom classification, term universes, and fragment grammars.

Formulas are views of terms of type ``o``: logical structure lives in a
dedicated tree (atoms, truth, conjunction, disjunction, implication,
quantifiers) with conversions both ways, so substitution and equality reuse
the term machinery.  The four language fragments (first-order/higher-order x
Horn/hereditary Harrop) each define which formulas are program clauses,
goals, and core formulas; a separate ``allow_fix`` capability gates fixpoint
terms orthogonally.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from typing import Optional, Union

from .terms import (
    AND_NAME,
    EXISTS_NAME,
    FORALL_NAME,
    FORMULA_TYPE,
    IMPLIES_NAME,
    LOGICAL_NAMES,
    OR_NAME,
    TOP_NAME,
    App,
    Arrow,
    BaseType,
    Const,
    Fix,
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
    free_vars,
    is_closed,
    raw_subst,
    spine,
    subterms,
    typecheck,
)


class FormulaError(TermError):
    pass


class NotAnAtom(FormulaError):
    pass


# ---------------------------------------------------------------------------
# Formula tree


@dataclass(frozen=True)
class Atom:
    term: Term


@dataclass(frozen=True)
class Top:
    pass


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Implies:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Forall:
    binder: str
    binder_type: SimpleType
    body: "Formula"


@dataclass(frozen=True)
class Exists:
    binder: str
    binder_type: SimpleType
    body: "Formula"


Formula = Union[Atom, Top, And, Or, Implies, Forall, Exists]

TOP = Top()


# ---------------------------------------------------------------------------
# Term embedding


def term_of_formula(f: Formula) -> Term:
    if isinstance(f, Atom):
        return f.term
    if isinstance(f, Top):
        return Const(TOP_NAME)
    if isinstance(f, And):
        return App(App(Const(AND_NAME), term_of_formula(f.left)), term_of_formula(f.right))
    if isinstance(f, Or):
        return App(App(Const(OR_NAME), term_of_formula(f.left)), term_of_formula(f.right))
    if isinstance(f, Implies):
        return App(App(Const(IMPLIES_NAME), term_of_formula(f.left)), term_of_formula(f.right))
    name = FORALL_NAME if isinstance(f, Forall) else EXISTS_NAME
    return App(Const(name), Lam(f.binder, f.binder_type, term_of_formula(f.body)))


_BINARY = {AND_NAME: And, OR_NAME: Or, IMPLIES_NAME: Implies}
_QUANT = {FORALL_NAME: Forall, EXISTS_NAME: Exists}


def formula_of_term(t: Term) -> Formula:
    """Read the logical structure of a term of type ``o``.

    Partial applications of logical constants are rejected; a term with a
    non-logical head becomes an atom.
    """
    head, args = spine(t)
    if isinstance(head, Const) and head.name in LOGICAL_NAMES:
        if head.name == TOP_NAME:
            if args:
                raise FormulaError("truth constant applied to arguments")
            return TOP
        if head.name in _BINARY:
            if len(args) != 2:
                raise FormulaError(f"partial application of {head.name}")
            ctor = _BINARY[head.name]
            return ctor(formula_of_term(args[0]), formula_of_term(args[1]))
        if len(args) != 1 or not isinstance(args[0], Lam):
            raise FormulaError("quantifier must be applied to one abstraction")
        lam = args[0]
        ctor = _QUANT[head.name]
        return ctor(lam.binder, lam.binder_type, formula_of_term(lam.body))
    return Atom(t)


def formula_alpha_canonical(f: Formula) -> Formula:
    return formula_of_term(alpha_canonical(term_of_formula(f)))


def formula_alpha_equal(f1: Formula, f2: Formula) -> bool:
    return alpha_canonical(term_of_formula(f1)) == alpha_canonical(term_of_formula(f2))


def formula_free_vars(f: Formula) -> set[str]:
    return free_vars(term_of_formula(f))


def formula_closed(f: Formula, sig: Signature) -> bool:
    return is_closed(term_of_formula(f), sig)


def formula_contains_fix(f: Formula) -> bool:
    return contains_fix(term_of_formula(f))


def subst_formula(subst: Substitution, f: Formula) -> Formula:
    """Substitute into a formula and beta-normalize the result.

    Normalization matters for flexible atoms: a variable head replaced by an
    abstraction may reduce to a compound formula.
    """
    t = beta_normalize(raw_subst(term_of_formula(f), subst.bindings))
    return formula_of_term(t)


def subst_formula1(f: Formula, name: str, image: Term) -> Formula:
    return subst_formula(Substitution({name: image}), f)


def typecheck_formula(sig: Signature, ctx: dict[str, SimpleType], f: Formula) -> None:
    ty = typecheck(sig, ctx, term_of_formula(f))
    if ty != FORMULA_TYPE:
        raise FormulaError(f"formula has type {ty}, expected o")


def validate_atom(f: Formula) -> Term:
    if not isinstance(f, Atom):
        raise NotAnAtom(f"expected an atom, got {type(f).__name__}")
    head, _ = spine(f.term)
    if isinstance(head, Const) and head.name in LOGICAL_NAMES:
        raise FormulaError("atom head is a logical constant")
    return f.term


# ---------------------------------------------------------------------------
# Fragments


class Fragment(Enum):
    CO_FOHC = "co-fohc"
    CO_FOHH = "co-fohh"
    CO_HOHC = "co-hohc"
    CO_HOHH = "co-hohh"

    def __str__(self) -> str:
        return self.value


_LEQ: dict[Fragment, frozenset[Fragment]] = {
    Fragment.CO_FOHC: frozenset(Fragment),
    Fragment.CO_FOHH: frozenset({Fragment.CO_FOHH, Fragment.CO_HOHH}),
    Fragment.CO_HOHC: frozenset({Fragment.CO_HOHC, Fragment.CO_HOHH}),
    Fragment.CO_HOHH: frozenset({Fragment.CO_HOHH}),
}


def fragment_leq(a: Fragment, b: Fragment) -> bool:
    """Partial order of the fragment diamond (extensions go upward)."""
    return b in _LEQ[a]


def fragments_strictly_below(frag: Fragment, uses_fix: bool) -> list[tuple[Fragment, bool]]:
    """All (fragment, fix-capability) pairs strictly below in the product order."""
    out = []
    for f in Fragment:
        for fx in (False, True):
            if (f, fx) == (frag, uses_fix):
                continue
            if fragment_leq(f, frag) and (not fx or uses_fix):
                out.append((f, fx))
    return out


def is_hereditary_harrop(frag: Fragment) -> bool:
    return frag in (Fragment.CO_FOHH, Fragment.CO_HOHH)


def is_higher_order(frag: Fragment) -> bool:
    return frag in (Fragment.CO_HOHC, Fragment.CO_HOHH)


# ---------------------------------------------------------------------------
# Term universes and atom classification


class UniverseTag(Enum):
    U1 = "U1"
    U2 = "U2"
    UNRESTRICTED = "unrestricted"


def universe_check(t: Term, tag: UniverseTag) -> bool:
    """True iff no forbidden logical constant occurs anywhere in ``t``.

    U1 excludes quantification and implication; U2 excludes implication only.
    """
    names = {s.name for s in subterms(t) if isinstance(s, Const)}
    if tag == UniverseTag.U1:
        return FORALL_NAME not in names and IMPLIES_NAME not in names
    if tag == UniverseTag.U2:
        return IMPLIES_NAME not in names
    return True


def tightest_universe(t: Term) -> UniverseTag:
    if universe_check(t, UniverseTag.U1):
        return UniverseTag.U1
    if universe_check(t, UniverseTag.U2):
        return UniverseTag.U2
    return UniverseTag.UNRESTRICTED


def _first_order_term(t: Term, bound: frozenset[str]) -> bool:
    """Arguments of first-order atoms: individual-typed variables and fully
    applied constants only; fixpoints allowed when base-typed and themselves
    first-order (the fix capability is gated separately)."""
    if isinstance(t, Var):
        return True
    if isinstance(t, Const):
        return t.name not in LOGICAL_NAMES
    if isinstance(t, App):
        head, args = spine(t)
        if isinstance(head, Const):
            if head.name in LOGICAL_NAMES:
                return False
            return all(_first_order_term(a, bound) for a in args)
        return False
    if isinstance(t, Fix):
        if not isinstance(t.binder_type, BaseType):
            return False
        return _first_order_term(t.body, bound | {t.binder})
    return False  # Lam


@dataclass(frozen=True)
class AtomClass:
    rigid: bool
    first_order: bool
    universe: UniverseTag


def classify_atom(sig: Signature, f: Formula) -> AtomClass:
    """Head rigidity, first-order status, and the tightest universe tag."""
    term = validate_atom(f)
    head, args = spine(term)
    rigid = isinstance(head, Const)
    first_order = rigid and all(_first_order_term(a, frozenset()) for a in args)
    return AtomClass(rigid, first_order, tightest_universe(term))


def _atom_ok(frag: Fragment, f: Formula, *, rigid_required: bool) -> bool:
    if not isinstance(f, Atom):
        return False
    head, args = spine(f.term)
    if isinstance(head, Const) and head.name in LOGICAL_NAMES:
        return False
    rigid = isinstance(head, Const)
    if not is_higher_order(frag):
        # first-order fragments admit only rigid first-order atoms
        return rigid and all(_first_order_term(a, frozenset()) for a in args)
    if rigid_required and not rigid:
        return False
    tag = UniverseTag.U1 if frag == Fragment.CO_HOHC else UniverseTag.U2
    return universe_check(f.term, tag)


# ---------------------------------------------------------------------------
# Fragment grammars


def is_program_clause(frag: Fragment, f: Formula, allow_fix: bool = False) -> bool:
    """Does ``f`` match the fragment's program-clause grammar?"""
    if not allow_fix and formula_contains_fix(f):
        return False

    def d(f: Formula) -> bool:
        if isinstance(f, Atom):
            return _atom_ok(frag, f, rigid_required=True)
        if isinstance(f, Implies):
            return g(f.left) and d(f.right)
        if isinstance(f, And):
            return d(f.left) and d(f.right)
        if isinstance(f, Forall):
            return d(f.body)
        return False

    def g(f: Formula) -> bool:
        return _goal_grammar(frag, f, d)

    return d(f)


def is_goal(frag: Fragment, f: Formula, allow_fix: bool = False) -> bool:
    """Does ``f`` match the fragment's goal grammar?"""
    if not allow_fix and formula_contains_fix(f):
        return False

    def d(f: Formula) -> bool:
        if isinstance(f, Atom):
            return _atom_ok(frag, f, rigid_required=True)
        if isinstance(f, Implies):
            return _goal_grammar(frag, f.left, d) and d(f.right)
        if isinstance(f, And):
            return d(f.left) and d(f.right)
        if isinstance(f, Forall):
            return d(f.body)
        return False

    return _goal_grammar(frag, f, d)


def _goal_grammar(frag: Fragment, f: Formula, d) -> bool:
    if isinstance(f, Top):
        return True
    if isinstance(f, Atom):
        return _atom_ok(frag, f, rigid_required=False)
    if isinstance(f, And) or isinstance(f, Or):
        return _goal_grammar(frag, f.left, d) and _goal_grammar(frag, f.right, d)
    if isinstance(f, Exists):
        return _goal_grammar(frag, f.body, d)
    if isinstance(f, Implies):
        return is_hereditary_harrop(frag) and d(f.left) and _goal_grammar(frag, f.right, d)
    if isinstance(f, Forall):
        return is_hereditary_harrop(frag) and _goal_grammar(frag, f.body, d)
    return False


def is_core(frag: Fragment, f: Formula, allow_fix: bool = False) -> bool:
    """Core formulas are valid as both program clauses and goals: atoms and
    conjunctions in the Horn fragments, plus implication and universal
    quantification in the hereditary Harrop fragments.  Truth is not core."""
    if not allow_fix and formula_contains_fix(f):
        return False

    def m(f: Formula) -> bool:
        if isinstance(f, Atom):
            return _atom_ok(frag, f, rigid_required=True)
        if isinstance(f, And):
            return m(f.left) and m(f.right)
        if isinstance(f, Implies):
            return is_hereditary_harrop(frag) and m(f.left) and m(f.right)
        if isinstance(f, Forall):
            return is_hereditary_harrop(frag) and m(f.body)
        return False

    return m(f)


def minimal_core_fragment(f: Formula) -> Optional[tuple[Fragment, bool]]:
    """Least (fragment, uses-fix) pair whose core grammar admits ``f``."""
    uses_fix = formula_contains_fix(f)
    for frag in (Fragment.CO_FOHC, Fragment.CO_FOHH, Fragment.CO_HOHC, Fragment.CO_HOHH):
        if is_core(frag, f, allow_fix=uses_fix):
            return frag, uses_fix
    return None


def guarded_fixes_ok(f: Formula) -> bool:
    return all(
        check_guarded(s) for s in subterms(term_of_formula(f)) if isinstance(s, Fix)
    )


# ---------------------------------------------------------------------------
# Programs


class FragmentViolation(FormulaError):
    pass


@dataclass(frozen=True)
class Program:
    """A signature with an ordered list of clauses plus registered lemmas.

    Order is source order and drives deterministic search.  ``allow_fix``
    gates fixpoint terms in clauses, goals, and witnesses.
    """

    sig: Signature
    fragment: Fragment
    allow_fix: bool
    clauses: tuple[Formula, ...]
    lemmas: tuple[Formula, ...] = field(default_factory=tuple)

    def validate(self) -> None:
        for i, clause in enumerate(self.clauses):
            if not formula_closed(clause, self.sig):
                raise FragmentViolation(f"clause {i} is not closed")
            typecheck_formula(self.sig, {}, clause)
            if not is_program_clause(self.fragment, clause, self.allow_fix):
                raise FragmentViolation(
                    f"clause {i} is not a {self.fragment} program clause"
                )
            if not guarded_fixes_ok(clause):
                raise FragmentViolation(f"clause {i} contains an unguarded fix term")
        for i, lemma in enumerate(self.lemmas):
            if not is_core(self.fragment, lemma, self.allow_fix):
                raise FragmentViolation(f"lemma {i} is not a {self.fragment} core formula")

    def entries(self) -> tuple[Formula, ...]:
        """Clauses then lemmas: everything selectable by backchaining."""
        return self.clauses + self.lemmas

    def with_lemma(self, lemma: Formula) -> "Program":
        return Program(self.sig, self.fragment, self.allow_fix, self.clauses, self.lemmas + (lemma,))
