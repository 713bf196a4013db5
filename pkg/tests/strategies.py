"""Shared hypothesis strategies over a small fixed first-order signature."""

from hypothesis import strategies as st

from coup.formulas import And, Atom, Exists, Forall, Implies, Or, Program, TOP, Fragment
from coup.terms import (
    App,
    Arrow,
    BaseType,
    Const,
    FORMULA_TYPE,
    Fix,
    Lam,
    Var,
    arrow,
    check_guarded,
    make_signature,
)

IOTA = BaseType("i")

SIG = make_signature(
    {
        "a": IOTA,
        "b": IOTA,
        "f": Arrow(IOTA, IOTA),
        "g": Arrow(IOTA, IOTA),
        "h2": arrow(IOTA, IOTA, IOTA),
        "p": Arrow(IOTA, FORMULA_TYPE),
        "q": Arrow(IOTA, FORMULA_TYPE),
        "r": Arrow(Arrow(IOTA, IOTA), FORMULA_TYPE),
    }
)

VAR_NAMES = ("u1", "u2", "u3")


def first_order_terms(var_names=VAR_NAMES, max_depth=3):
    base = st.one_of(
        st.sampled_from([Const("a"), Const("b")]),
        st.sampled_from([Var(v) for v in var_names]) if var_names else st.nothing(),
    )

    def extend(children):
        unary = st.builds(App, st.sampled_from([Const("f"), Const("g")]), children)
        binary = st.builds(
            lambda l, r: App(App(Const("h2"), l), r), children, children
        )
        return st.one_of(unary, binary)

    return st.recursive(base, extend, max_leaves=max_depth * 2)


def ground_first_order_terms(max_depth=3):
    return first_order_terms(var_names=(), max_depth=max_depth)


def guarded_fix_terms():
    """fix binders whose bodies keep the bound variable under a constructor."""

    def build(ctx_depth, var_occurrences):
        body = Var("w")
        for i in range(var_occurrences - 1):
            body = App(App(Const("h2"), body), Var("w"))
        for i in range(ctx_depth):
            body = App(Const("f"), body)
        if not isinstance(body, App) or body == Var("w"):
            body = App(Const("f"), body)
        return Fix("w", IOTA, body)

    return st.builds(
        build, st.integers(min_value=1, max_value=3), st.integers(min_value=1, max_value=2)
    ).filter(check_guarded)


def fix_or_finite_terms():
    return st.one_of(ground_first_order_terms(), guarded_fix_terms())


def fo_atoms(var_names=VAR_NAMES):
    return st.builds(
        lambda pred, arg: Atom(App(Const(pred), arg)),
        st.sampled_from(["p", "q"]),
        first_order_terms(var_names),
    )


def ho_atoms():
    lam = st.builds(lambda body: Lam("z", IOTA, body), first_order_terms(("z",)))
    rigid_ho = st.builds(lambda t: Atom(App(Const("r"), t)), lam)
    flexible = st.builds(lambda t: Atom(App(Var("H"), t)), ground_first_order_terms())
    return st.one_of(rigid_ho, flexible)


def formulas(max_leaves=8):
    """Formula trees mixing every connective with first- and higher-order atoms."""
    leaves = st.one_of(fo_atoms(), ho_atoms(), st.just(TOP))

    def extend(children):
        binary = st.one_of(
            st.builds(And, children, children),
            st.builds(Or, children, children),
            st.builds(Implies, children, children),
        )
        quant = st.builds(
            lambda ctor, name, body: ctor(name, IOTA, body),
            st.sampled_from([Forall, Exists]),
            st.sampled_from(list(VAR_NAMES)),
            children,
        )
        return st.one_of(binary, quant)

    return st.recursive(leaves, extend, max_leaves=max_leaves)


# --- random Horn programs -------------------------------------------------


def _head_patterns():
    x = Var("x")
    return st.sampled_from(
        [
            App(Const("p"), x),
            App(Const("p"), App(Const("f"), x)),
            App(Const("q"), x),
            App(Const("q"), App(Const("f"), x)),
            App(Const("p"), Const("a")),
            App(Const("q"), Const("a")),
        ]
    )


def _body_atoms():
    x = Var("x")
    return st.lists(
        st.sampled_from(
            [
                Atom(App(Const("p"), x)),
                Atom(App(Const("p"), App(Const("f"), x))),
                Atom(App(Const("q"), x)),
                Atom(App(Const("q"), App(Const("f"), x))),
                Atom(App(Const("p"), Const("a"))),
                Atom(App(Const("q"), Const("a"))),
            ]
        ),
        min_size=0,
        max_size=2,
    )


def horn_clauses():
    def build(head, body):
        from coup.terms import free_vars

        formula = Atom(head)
        if body:
            conj = body[0]
            for b in body[1:]:
                conj = And(conj, b)
            formula = Implies(conj, formula)
        from coup.formulas import term_of_formula

        if "x" in free_vars(term_of_formula(formula)):
            formula = Forall("x", IOTA, formula)
        return formula

    return st.builds(build, _head_patterns(), _body_atoms())


def horn_programs():
    sig = make_signature(
        {
            "a": IOTA,
            "f": Arrow(IOTA, IOTA),
            "p": Arrow(IOTA, FORMULA_TYPE),
            "q": Arrow(IOTA, FORMULA_TYPE),
        }
    )
    return st.builds(
        lambda clauses: Program(sig, Fragment.CO_FOHH, False, tuple(clauses)),
        st.lists(horn_clauses(), min_size=1, max_size=3),
    )


def ground_goal_atoms(max_depth=2):
    def build(pred, depth):
        term = Const("a")
        for _ in range(depth):
            term = App(Const("f"), term)
        return Atom(App(Const(pred), term))

    return st.builds(build, st.sampled_from(["p", "q"]), st.integers(0, max_depth))
