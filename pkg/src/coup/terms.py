"""Typed term language with guarded fixpoint terms.

Terms are simply typed lambda terms over a user signature, extended with a
``fix`` binder denoting infinite (rational or irrational) trees.  The module
provides type checking, beta normalization (fixpoints kept opaque),
guardedness checking for fixpoints, tree equality up to fixpoint unfolding
(decided by normalize/unfold/bisimulate with a visited-pair set), and
rational-tree unification without occurs check, where cyclic solutions are
materialized as guarded fixpoint terms.

All values are immutable; every operation is pure.  Comparisons are always
modulo alpha-equivalence via :func:`alpha_canonical`.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass
from typing import Iterator, Optional, Union


class TermError(Exception):
    """Base class for term-level failures."""


class TypeMismatch(TermError):
    pass


class UnboundName(TermError):
    pass


class FlexibleHeadError(TermError):
    """Unification refused on a variable-headed application."""


# ---------------------------------------------------------------------------
# Simple types


@dataclass(frozen=True)
class BaseType:
    name: str

    def __str__(self) -> str:
        return self.name


@dataclass(frozen=True)
class Arrow:
    domain: "SimpleType"
    codomain: "SimpleType"

    def __str__(self) -> str:
        dom = f"({self.domain})" if isinstance(self.domain, Arrow) else str(self.domain)
        return f"{dom} -> {self.codomain}"

    def __hash__(self) -> int:  # cached: arrow chains nest
        try:
            return object.__getattribute__(self, "_hash")
        except AttributeError:
            value = hash((Arrow, self.domain, self.codomain))
            object.__setattr__(self, "_hash", value)
            return value


SimpleType = Union[BaseType, Arrow]

FORMULA_TYPE = BaseType("o")


def arrow(*types: SimpleType) -> SimpleType:
    """Right-fold ``types`` into an arrow type; ``arrow(a, b, c) == a -> b -> c``."""
    if not types:
        raise ValueError("arrow() needs at least one type")
    result = types[-1]
    for t in reversed(types[:-1]):
        result = Arrow(t, result)
    return result


def flatten_arrow(t: SimpleType) -> tuple[list[SimpleType], BaseType]:
    args: list[SimpleType] = []
    while isinstance(t, Arrow):
        args.append(t.domain)
        t = t.codomain
    return args, t


def type_mentions(t: SimpleType, name: str) -> bool:
    if isinstance(t, BaseType):
        return t.name == name
    return type_mentions(t.domain, name) or type_mentions(t.codomain, name)


# ---------------------------------------------------------------------------
# Logical constants (reserved, not declarable in a signature)

TOP_NAME = "@top"
AND_NAME = "@and"
OR_NAME = "@or"
IMPLIES_NAME = "@imp"
FORALL_NAME = "@forall"
EXISTS_NAME = "@exists"

LOGICAL_NAMES = frozenset(
    {TOP_NAME, AND_NAME, OR_NAME, IMPLIES_NAME, FORALL_NAME, EXISTS_NAME}
)

BINARY_CONNECTIVES = frozenset({AND_NAME, OR_NAME, IMPLIES_NAME})
QUANTIFIER_NAMES = frozenset({FORALL_NAME, EXISTS_NAME})


# ---------------------------------------------------------------------------
# Signatures


@dataclass(frozen=True)
class Signature:
    """Map from constant names to simple types.

    Logical connectives and quantifiers are implicit and reserved; a constant
    whose result type is not ``o`` must not mention ``o`` anywhere in its type
    (individuals cannot be built from formulae).
    """

    constants: dict[str, SimpleType]

    def __contains__(self, name: str) -> bool:
        return name in self.constants

    def type_of(self, name: str) -> SimpleType:
        try:
            return self.constants[name]
        except KeyError:
            raise UnboundName(f"constant {name!r} not in signature") from None

    def extend(self, name: str, typ: SimpleType) -> "Signature":
        if name in LOGICAL_NAMES:
            raise TermError(f"{name!r} is a reserved logical symbol")
        if name in self.constants:
            raise TermError(f"constant {name!r} already declared")
        new = dict(self.constants)
        new[name] = typ
        return Signature(new)

    def check_constant(self, name: str, typ: SimpleType) -> None:
        """Validate a declaration before extending."""
        _, result = flatten_arrow(typ)
        if result != FORMULA_TYPE and type_mentions(typ, FORMULA_TYPE.name):
            raise TypeMismatch(
                f"constant {name!r}: individuals cannot take or mention formula type o"
            )


def make_signature(decls: dict[str, SimpleType]) -> Signature:
    sig = Signature({})
    for name, typ in decls.items():
        sig.check_constant(name, typ)
        sig = sig.extend(name, typ)
    return sig


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str


@dataclass(frozen=True)
class Const:
    name: str


@dataclass(frozen=True)
class App:
    fun: "Term"
    arg: "Term"


@dataclass(frozen=True)
class Lam:
    binder: str
    binder_type: SimpleType
    body: "Term"


@dataclass(frozen=True)
class Fix:
    binder: str
    binder_type: SimpleType
    body: "Term"


Term = Union[Var, Const, App, Lam, Fix]


def app(fun: Term, *args: Term) -> Term:
    for a in args:
        fun = App(fun, a)
    return fun


def spine(t: Term) -> tuple[Term, list[Term]]:
    """Decompose nested applications into (head, argument list)."""
    args: list[Term] = []
    while isinstance(t, App):
        args.append(t.arg)
        t = t.fun
    args.reverse()
    return t, args


def subterms(t: Term) -> Iterator[Term]:
    yield t
    if isinstance(t, App):
        yield from subterms(t.fun)
        yield from subterms(t.arg)
    elif isinstance(t, (Lam, Fix)):
        yield from subterms(t.body)


def free_vars(t: Term) -> set[str]:
    def go(t: Term, bound: frozenset[str], acc: set[str]) -> None:
        if isinstance(t, Var):
            if t.name not in bound:
                acc.add(t.name)
        elif isinstance(t, App):
            go(t.fun, bound, acc)
            go(t.arg, bound, acc)
        elif isinstance(t, (Lam, Fix)):
            go(t.body, bound | {t.binder}, acc)

    acc: set[str] = set()
    go(t, frozenset(), acc)
    return acc


def free_vars_ordered(t: Term) -> list[str]:
    """Free variable names in first-occurrence (preorder) order."""
    seen: list[str] = []

    def go(t: Term, bound: frozenset[str]) -> None:
        if isinstance(t, Var):
            if t.name not in bound and t.name not in seen:
                seen.append(t.name)
        elif isinstance(t, App):
            go(t.fun, bound)
            go(t.arg, bound)
        elif isinstance(t, (Lam, Fix)):
            go(t.body, bound | {t.binder})

    go(t, frozenset())
    return seen


def constant_names(t: Term) -> set[str]:
    return {s.name for s in subterms(t) if isinstance(s, Const)}


def contains_fix(t: Term) -> bool:
    return any(isinstance(s, Fix) for s in subterms(t))


def is_closed(t: Term, sig: Signature) -> bool:
    """No free variables, and every constant is declared or logical."""
    if free_vars(t):
        return False
    return all(c in LOGICAL_NAMES or c in sig for c in constant_names(t))


# ---------------------------------------------------------------------------
# Alpha canonicalization

_CANON_PREFIX = "x"


@functools.lru_cache(maxsize=1 << 16)
def alpha_canonical(t: Term) -> Term:
    """Rename bound variables to a canonical scheme (x0, x1, ... in preorder).

    Alpha-equal terms produce structurally identical canonical forms; free
    variables and constants are untouched.  Canonical names avoid the free
    variable and constant names of the term (escalating with primes), so the
    result re-parses to the same term.  Idempotent.
    """
    avoid = free_vars(t) | constant_names(t)
    counter = [0]

    def fresh() -> str:
        name = f"{_CANON_PREFIX}{counter[0]}"
        counter[0] += 1
        while name in avoid:
            name += "'"
        return name

    def go(t: Term, env: dict[str, str]) -> Term:
        if isinstance(t, Var):
            return Var(env.get(t.name, t.name))
        if isinstance(t, Const):
            return t
        if isinstance(t, App):
            return App(go(t.fun, env), go(t.arg, env))
        new = fresh()
        inner = dict(env)
        inner[t.binder] = new
        body = go(t.body, inner)
        ctor = Lam if isinstance(t, Lam) else Fix
        return ctor(new, t.binder_type, body)

    return go(t, {})


def alpha_equal(t1: Term, t2: Term) -> bool:
    return alpha_canonical(t1) == alpha_canonical(t2)


# ---------------------------------------------------------------------------
# Substitution


@dataclass(frozen=True)
class Substitution:
    """Finite map from variable names to terms.

    Materialized substitutions produced by this module are idempotent: no
    bound variable occurs free in any image.
    """

    bindings: dict[str, Term]

    def __bool__(self) -> bool:
        return bool(self.bindings)

    def get(self, name: str) -> Optional[Term]:
        return self.bindings.get(name)

    def is_idempotent(self) -> bool:
        bound = set(self.bindings)
        return all(not (free_vars(img) & bound) for img in self.bindings.values())


EMPTY_SUBST = Substitution({})


def _fresh_name(base: str, avoid: set[str]) -> str:
    if base not in avoid:
        return base
    i = 1
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def raw_subst(t: Term, mapping: dict[str, Term]) -> Term:
    """Capture-avoiding substitution of free variables, names preserved."""
    if not mapping:
        return t
    image_frees: set[str] = set()
    for img in mapping.values():
        image_frees |= free_vars(img)

    def go(t: Term, mapping: dict[str, Term]) -> Term:
        if isinstance(t, Var):
            return mapping.get(t.name, t)
        if isinstance(t, Const):
            return t
        if isinstance(t, App):
            return App(go(t.fun, mapping), go(t.arg, mapping))
        inner = {k: v for k, v in mapping.items() if k != t.binder}
        if not inner:
            return t
        binder = t.binder
        body = t.body
        if binder in image_frees:
            binder = _fresh_name(binder, image_frees | free_vars(body) | set(inner))
            body = go(body, {t.binder: Var(binder)})
        ctor = Lam if isinstance(t, Lam) else Fix
        return ctor(binder, t.binder_type, go(body, inner))

    return go(t, mapping)


def apply_subst(subst: Substitution, t: Term) -> Term:
    """Apply a substitution; the result is alpha-canonical."""
    return alpha_canonical(raw_subst(t, subst.bindings))


# ---------------------------------------------------------------------------
# Type checking


def typecheck(sig: Signature, ctx: dict[str, SimpleType], t: Term) -> SimpleType:
    """Return the unique simple type of ``t``.

    ``fix`` binders type like their bodies: ``Fix(x, tau, body)`` is well
    typed iff ``body : tau`` under ``ctx + {x: tau}``.  Quantifier constants
    are typed at their applied occurrences only.
    """
    if isinstance(t, Var):
        if t.name not in ctx:
            raise UnboundName(f"unbound variable {t.name!r}")
        return ctx[t.name]
    if isinstance(t, Const):
        if t.name == TOP_NAME:
            return FORMULA_TYPE
        if t.name in BINARY_CONNECTIVES:
            return Arrow(FORMULA_TYPE, Arrow(FORMULA_TYPE, FORMULA_TYPE))
        if t.name in QUANTIFIER_NAMES:
            raise TypeMismatch("quantifier symbol must be applied to an abstraction")
        return sig.type_of(t.name)
    if isinstance(t, App):
        head, args = spine(t)
        if isinstance(head, Const) and head.name in QUANTIFIER_NAMES:
            if len(args) != 1:
                raise TypeMismatch("quantifier symbol expects exactly one argument")
            arg_ty = typecheck(sig, ctx, args[0])
            if not (isinstance(arg_ty, Arrow) and arg_ty.codomain == FORMULA_TYPE):
                raise TypeMismatch("quantifier argument must have type tau -> o")
            return FORMULA_TYPE
        fun_ty = typecheck(sig, ctx, t.fun)
        if not isinstance(fun_ty, Arrow):
            raise TypeMismatch(f"application head has non-arrow type {fun_ty}")
        arg_ty = typecheck(sig, ctx, t.arg)
        if arg_ty != fun_ty.domain:
            raise TypeMismatch(
                f"argument type {arg_ty} does not match expected {fun_ty.domain}"
            )
        return fun_ty.codomain
    # Lam / Fix
    inner = dict(ctx)
    inner[t.binder] = t.binder_type
    body_ty = typecheck(sig, inner, t.body)
    if isinstance(t, Lam):
        return Arrow(t.binder_type, body_ty)
    if body_ty != t.binder_type:
        raise TypeMismatch(
            f"fix body has type {body_ty}, expected binder type {t.binder_type}"
        )
    return t.binder_type


# ---------------------------------------------------------------------------
# Beta normalization (fixpoints opaque)


def _whnf(t: Term) -> Term:
    while isinstance(t, App):
        fun = _whnf(t.fun)
        if isinstance(fun, Lam):
            t = raw_subst(fun.body, {fun.binder: t.arg})
        else:
            if fun is not t.fun:
                t = App(fun, t.arg)
            return t
    return t


def _nf(t: Term) -> Term:
    t = _whnf(t)
    if isinstance(t, (Var, Const)):
        return t
    if isinstance(t, App):
        return App(_nf(t.fun), _nf(t.arg))
    ctor = Lam if isinstance(t, Lam) else Fix
    return ctor(t.binder, t.binder_type, _nf(t.body))


@functools.lru_cache(maxsize=1 << 16)
def beta_normalize(t: Term) -> Term:
    """Beta-normal form with ``fix`` treated as an opaque head; alpha-canonical."""
    return alpha_canonical(_nf(t))


# ---------------------------------------------------------------------------
# Guardedness


def check_guarded(t: Term) -> bool:
    """Syntactic guardedness of a fixpoint term.

    In the beta-normal body stripped of its lambda prefix, every occurrence
    of the fix-bound variable must (i) not be at the head of the body and
    (ii) sit strictly inside at least one application of a non-logical
    constant, so that each unfolding passes through a constructor.
    """
    if not isinstance(t, Fix):
        raise TermError("check_guarded expects a fix term")
    name = t.binder
    body = _nf(t.body)
    while isinstance(body, Lam):
        if body.binder == name:
            return True  # shadowed: no recursive occurrence below
        body = body.body

    head, _ = spine(body)
    if isinstance(head, Var) and head.name == name:
        return False

    def ok(t: Term, under_constructor: bool) -> bool:
        if isinstance(t, Var):
            return t.name != name or under_constructor
        if isinstance(t, Const):
            return True
        if isinstance(t, (Lam, Fix)):
            if t.binder == name:
                return True
            return ok(t.body, under_constructor)
        head, args = spine(t)
        constructor = isinstance(head, Const) and head.name not in LOGICAL_NAMES
        if not ok(head, under_constructor):
            return False
        inner = under_constructor or constructor
        return all(ok(a, inner) for a in args)

    return ok(body, False)


# ---------------------------------------------------------------------------
# Tree equality up to fixpoint unfolding


EQUAL = "equal"
NOT_EQUAL = "not_equal"
BUDGET_EXHAUSTED = "budget_exhausted"


@dataclass(frozen=True)
class EquivVerdict:
    kind: str  # equal | not_equal | budget_exhausted
    unfolds_used: int = 0

    @property
    def is_equal(self) -> bool:
        return self.kind == EQUAL


class _Budget(Exception):
    pass


class _UnfoldEngine:
    """Shared unfold accounting: at most ``budget`` unfolds per distinct fix node."""

    def __init__(self, budget: int):
        self.budget = budget
        self.counts: dict[Term, int] = {}
        self.total = 0

    def spend(self, fix_node: Fix) -> None:
        key = alpha_canonical(fix_node)
        used = self.counts.get(key, 0)
        if used >= self.budget:
            raise _Budget()
        self.counts[key] = used + 1
        self.total += 1

    def whnf_fix(self, t: Term) -> Term:
        """Unfold fix-headed spines (normalizing after each step) until the
        head is no longer a fix node.  ``t`` must be beta-normal."""
        while True:
            head, args = spine(t)
            if not isinstance(head, Fix):
                return t
            self.spend(head)
            unfolded = raw_subst(head.body, {head.binder: head})
            t = beta_normalize(app(unfolded, *args))


def one_step_unfold(t: Term) -> Term:
    """Contract the head fix node of ``t`` once; beta-normal result."""
    head, args = spine(beta_normalize(t))
    if not isinstance(head, Fix):
        raise TermError("term is not headed by a fix node")
    unfolded = raw_subst(head.body, {head.binder: head})
    return beta_normalize(app(unfolded, *args))


def fixbeta_equal(t1: Term, t2: Term, budget: int = 64) -> EquivVerdict:
    """Decide whether two terms denote the same (possibly infinite) tree.

    Beta normalization is interleaved with fixpoint unfolding under a
    bisimulation memo set of visited pairs: exact on rational trees,
    budget-limited otherwise.  Symmetric and reflexive; coincides with beta
    equivalence on fix-free terms.
    """
    engine = _UnfoldEngine(budget)
    memo: set[tuple[Term, Term]] = set()
    depth = [0]

    def eq(a: Term, b: Term) -> bool:
        if a == b:
            return True
        key = (a, b)
        if key in memo:
            return True
        memo.add(key)
        memo.add((b, a))
        a = engine.whnf_fix(a)
        b = engine.whnf_fix(b)
        if a == b:
            return True
        if isinstance(a, Lam) and isinstance(b, Lam):
            if a.binder_type != b.binder_type:
                return False
            depth[0] += 1
            probe = Var(f"%eq{depth[0]}")
            return eq(
                beta_normalize(raw_subst(a.body, {a.binder: probe})),
                beta_normalize(raw_subst(b.body, {b.binder: probe})),
            )
        if isinstance(a, Lam) or isinstance(b, Lam):
            return False
        ha, args_a = spine(a)
        hb, args_b = spine(b)
        if type(ha) is not type(hb):
            return False
        if isinstance(ha, (Var, Const)) and ha.name != hb.name:
            return False
        if len(args_a) != len(args_b):
            return False
        return all(eq(x, y) for x, y in zip(args_a, args_b))

    a = beta_normalize(t1)
    b = beta_normalize(t2)
    try:
        result = eq(a, b)
    except _Budget:
        return EquivVerdict(BUDGET_EXHAUSTED, engine.total)
    return EquivVerdict(EQUAL if result else NOT_EQUAL, engine.total)


# ---------------------------------------------------------------------------
# Rational-tree unification

_MARKER_PREFIX = "%cyc%"


def unify_rational(
    a1: Term,
    a2: Term,
    var_types: Optional[dict[str, SimpleType]] = None,
    budget: int = 32,
) -> Optional[Substitution]:
    """Most general rational-tree unifier of two first-order terms or atoms.

    No occurs check: cyclic solutions are materialized as guarded fix terms
    (``var_types`` supplies binder types for cyclic variables).  Returns
    ``None`` on head clash; raises :class:`FlexibleHeadError` on a
    variable-headed application.
    """
    engine = _UnfoldEngine(budget)
    bindings: dict[str, Term] = {}
    seen: set[tuple[Term, Term]] = set()

    def walk(t: Term) -> Term:
        while isinstance(t, Var) and t.name in bindings:
            t = bindings[t.name]
        return t

    def uni(s: Term, t: Term) -> bool:
        s = walk(s)
        t = walk(t)
        if s == t:
            return True
        if isinstance(s, Var):
            bindings[s.name] = t
            return True
        if isinstance(t, Var):
            bindings[t.name] = s
            return True
        key = (alpha_canonical(s), alpha_canonical(t))
        if key in seen:
            return True
        seen.add(key)
        hs, args_s = spine(s)
        ht, args_t = spine(t)
        try:
            if isinstance(hs, Fix) and not isinstance(ht, Fix):
                return uni(engine.whnf_fix(s), t)
            if isinstance(ht, Fix) and not isinstance(hs, Fix):
                return uni(s, engine.whnf_fix(t))
            if isinstance(hs, Fix) and isinstance(ht, Fix):
                if alpha_equal(hs, ht) and len(args_s) == len(args_t):
                    return all(uni(x, y) for x, y in zip(args_s, args_t))
                return uni(engine.whnf_fix(s), engine.whnf_fix(t))
        except _Budget:
            return False
        if isinstance(s, Lam) or isinstance(t, Lam):
            return isinstance(s, Lam) and isinstance(t, Lam) and alpha_equal(s, t)
        hs, args_s = spine(s)
        ht, args_t = spine(t)
        if isinstance(hs, Var) or isinstance(ht, Var):
            raise FlexibleHeadError("cannot unify a variable-headed application")
        if not (isinstance(hs, Const) and isinstance(ht, Const)):
            return False
        if hs.name != ht.name or len(args_s) != len(args_t):
            return False
        return all(uni(x, y) for x, y in zip(args_s, args_t))

    a1 = beta_normalize(a1)
    a2 = beta_normalize(a2)
    if not uni(a1, a2):
        return None

    resolved: dict[str, Term] = {}
    var_types = var_types or {}

    def expand_var(name: str, stack: tuple[str, ...]) -> Term:
        """Resolve one binding, closing its own cycle with a fix binder.

        Markers for variables bound higher in ``stack`` may remain in the
        result; each enclosing frame closes its own.
        """
        if name in resolved:
            return resolved[name]
        body = expand(bindings[name], stack + (name,), frozenset())
        marker = _MARKER_PREFIX + name
        if marker in free_vars(body):
            if name not in var_types:
                raise TermError(
                    f"cyclic binding for {name!r} needs a type to build a fix term"
                )
            body = raw_subst(body, {marker: Var(name)})
            fix_term = Fix(name, var_types[name], body)
            if not check_guarded(fix_term):
                raise TermError(f"cyclic binding for {name!r} is not guarded")
            term = beta_normalize(fix_term)
        else:
            term = body
        if not any(v.startswith(_MARKER_PREFIX) for v in free_vars(term)):
            term = beta_normalize(term)
            resolved[name] = term
        return term

    def expand(t: Term, stack: tuple[str, ...], shadow: frozenset[str]) -> Term:
        if isinstance(t, Var):
            if t.name in shadow:
                return t
            if t.name in stack:
                return Var(_MARKER_PREFIX + t.name)
            if t.name in bindings:
                return expand_var(t.name, stack)
            return t
        if isinstance(t, Const):
            return t
        if isinstance(t, App):
            return App(expand(t.fun, stack, shadow), expand(t.arg, stack, shadow))
        ctor = Lam if isinstance(t, Lam) else Fix
        return ctor(t.binder, t.binder_type, expand(t.body, stack, shadow | {t.binder}))

    for name in list(bindings):
        expand_var(name, ())
    return Substitution(resolved)
