import pytest

from coup.formulas import (
    And,
    Atom,
    Exists,
    Forall,
    Fragment,
    Implies,
    NotAnAtom,
    Or,
    TOP,
    UniverseTag,
    classify_atom,
    formula_alpha_equal,
    fragment_leq,
    fragments_strictly_below,
    is_core,
    is_goal,
    is_program_clause,
    minimal_core_fragment,
    subst_formula,
    universe_check,
)
from coup.syntax import parse_formula, parse_theory, print_formula
from coup.terms import (
    App,
    Arrow,
    BaseType,
    Const,
    FORMULA_TYPE,
    FORALL_NAME,
    IMPLIES_NAME,
    Fix,
    Lam,
    Substitution,
    Var,
    arrow,
    make_signature,
)

IOTA = BaseType("i")
SIG = make_signature(
    {
        "a": IOTA,
        "f": Arrow(IOTA, IOTA),
        "p": Arrow(IOTA, FORMULA_TYPE),
        "q": Arrow(IOTA, FORMULA_TYPE),
        "r": arrow(IOTA, IOTA, FORMULA_TYPE),
    }
)

ALL_FRAGMENTS = list(Fragment)


def atom(src):
    return parse_formula(src, SIG)


class TestClassifyAtom:
    def test_ground_first_order(self):
        cls = classify_atom(SIG, atom("p a"))
        assert cls.rigid and cls.first_order and cls.universe == UniverseTag.U1

    def test_flexible_head(self):
        cls = classify_atom(SIG, Atom(App(Var("h"), Const("a"))))
        assert not cls.rigid

    def test_stream_atom_not_first_order(self, gamma5, fr_str_source):
        f = parse_formula(f"from 0 ({fr_str_source} 0)", gamma5.sig)
        cls = classify_atom(gamma5.sig, f)
        assert cls.rigid and not cls.first_order and cls.universe == UniverseTag.U1

    def test_non_atom_rejected(self):
        with pytest.raises(NotAnAtom):
            classify_atom(SIG, TOP)


class TestProgramClauses:
    def test_regress_clause_everywhere(self):
        clause = atom("forall x:i. p (f x) => p x")
        for frag in ALL_FRAGMENTS:
            assert is_program_clause(frag, clause)

    def test_from_clause_first_order(self, gamma5):
        clause = gamma5.clauses[0]
        assert is_program_clause(Fragment.CO_FOHC, clause)

    def test_disjunctive_clause_nowhere(self):
        clause = Or(atom("p a"), atom("q a"))
        for frag in ALL_FRAGMENTS:
            assert not is_program_clause(frag, clause)

    def test_fix_gated_by_capability(self):
        fx = Fix("x", IOTA, App(Const("f"), Var("x")))
        clause = Atom(App(Const("p"), fx))
        assert not is_program_clause(Fragment.CO_FOHC, clause, allow_fix=False)
        assert is_program_clause(Fragment.CO_FOHC, clause, allow_fix=True)


class TestGoals:
    def test_universal_goal_needs_hereditary_harrop(self):
        goal = atom("forall x:i. p x")
        assert not is_goal(Fragment.CO_FOHC, goal)
        assert is_goal(Fragment.CO_FOHH, goal)

    def test_truth_everywhere(self):
        for frag in ALL_FRAGMENTS:
            assert is_goal(frag, TOP)

    def test_conditional_goal(self):
        goal = atom("forall x:i. q x => p x")
        assert is_goal(Fragment.CO_FOHH, goal)
        assert not is_goal(Fragment.CO_HOHC, goal)

    def test_flexible_goal_atom_higher_order_only(self):
        flex = Atom(App(Var("h"), Const("a")))
        assert not is_goal(Fragment.CO_FOHC, flex)
        assert not is_goal(Fragment.CO_FOHH, flex)
        assert is_goal(Fragment.CO_HOHC, flex)
        assert is_goal(Fragment.CO_HOHH, flex)


class TestCore:
    def test_atom_core_in_horn(self):
        assert is_core(Fragment.CO_FOHC, atom("p a"))

    def test_conditional_core_in_hereditary_harrop(self):
        assert is_core(Fragment.CO_FOHH, atom("forall x:i. q x => p x"))

    def test_existential_never_core(self):
        goal = Exists("x", IOTA, atom("p a"))
        for frag in ALL_FRAGMENTS:
            assert not is_core(frag, goal)

    def test_truth_not_core(self):
        for frag in ALL_FRAGMENTS:
            assert not is_core(frag, TOP)

    def test_core_implies_clause_and_goal(self):
        for src in ("p a", "p a & q a", "forall x:i. p x", "forall x:i. q x => p x"):
            f = atom(src)
            for frag in ALL_FRAGMENTS:
                if is_core(frag, f):
                    assert is_program_clause(frag, f)
                    assert is_goal(frag, f)


class TestUniverses:
    def test_plain_term_in_u1(self):
        assert universe_check(App(Const("f"), Const("a")), UniverseTag.U1)

    def test_implication_escapes_u2(self):
        t = Lam(
            "x", IOTA,
            App(App(Const(IMPLIES_NAME), App(Const("p"), Var("x"))), App(Const("q"), Var("x"))),
        )
        assert not universe_check(t, UniverseTag.U2)

    def test_quantifier_separates_u1_u2(self):
        t = Lam(
            "x", IOTA,
            App(Const(FORALL_NAME), Lam("y", IOTA, App(App(Const("r"), Var("x")), Var("y")))),
        )
        assert universe_check(t, UniverseTag.U2)
        assert not universe_check(t, UniverseTag.U1)


class TestFragmentOrder:
    def test_lattice_shape(self):
        assert fragment_leq(Fragment.CO_FOHC, Fragment.CO_HOHH)
        assert fragment_leq(Fragment.CO_FOHH, Fragment.CO_HOHH)
        assert fragment_leq(Fragment.CO_HOHC, Fragment.CO_HOHH)
        assert not fragment_leq(Fragment.CO_FOHH, Fragment.CO_HOHC)
        assert not fragment_leq(Fragment.CO_HOHC, Fragment.CO_FOHH)

    def test_minimal_fragments(self, gamma5, fr_str_source):
        assert minimal_core_fragment(atom("p a")) == (Fragment.CO_FOHC, False)
        assert minimal_core_fragment(atom("forall x:i. p x")) == (Fragment.CO_FOHH, False)
        fx = Fix("x", IOTA, App(Const("f"), Var("x")))
        assert minimal_core_fragment(Atom(App(Const("p"), fx))) == (Fragment.CO_FOHC, True)
        inv5 = parse_formula(f"forall x:nat. from x ({fr_str_source} x)", gamma5.sig)
        assert minimal_core_fragment(inv5) == (Fragment.CO_HOHH, True)

    def test_strictly_below(self):
        below = fragments_strictly_below(Fragment.CO_FOHH, False)
        assert (Fragment.CO_FOHC, False) in below
        assert (Fragment.CO_FOHC, True) not in below
        assert (Fragment.CO_HOHC, False) not in below


class TestFixtureTheories:
    def test_all_fixture_clauses_are_horn(self, gamma1, gamma2, gamma3, gamma4, gamma5):
        for program in (gamma1, gamma2, gamma3, gamma4, gamma5):
            for clause in program.clauses:
                assert is_program_clause(Fragment.CO_FOHC, clause, allow_fix=True)


class TestSubstitution:
    def test_flexible_atom_reduces_to_compound(self):
        flex = Atom(App(Var("h"), Const("a")))
        image = Lam(
            "y", IOTA,
            App(App(Const(IMPLIES_NAME), App(Const("p"), Var("y"))), App(Const("q"), Var("y"))),
        )
        out = subst_formula(Substitution({"h": image}), flex)
        assert isinstance(out, Implies)
        assert formula_alpha_equal(out, Implies(atom("p a"), atom("q a")))
