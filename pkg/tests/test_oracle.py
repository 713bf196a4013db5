import pytest

from coup.formulas import term_of_formula
from coup.oracle import (
    IN,
    OUT,
    UNKNOWN,
    OracleConfig,
    enumerate_model,
    gfp_member,
    ground_terms,
    make_rational_atom,
    term_is_rational,
)
from coup.syntax import parse_formula, parse_term, print_formula
from coup.terms import BaseType, TermError, fixbeta_equal


def member(program, source, cfg=OracleConfig()):
    atom = make_rational_atom(program.sig, parse_formula(source, program.sig))
    return gfp_member(program, atom, cfg)


def model_strings(program, depth, cfg=OracleConfig()):
    return sorted(print_formula(a) for a in enumerate_model(program, depth, cfg))


class TestMembership:
    def test_gamma1_in(self, gamma1):
        assert member(gamma1, "p a").kind == IN

    def test_gamma3_fix_in_finite_out(self, gamma3):
        assert member(gamma3, "p (fix \\x:i. f x)").kind == IN
        assert member(gamma3, "p a").kind == OUT
        assert member(gamma3, "p (f a)").kind == OUT

    def test_gamma2_all_iterates_in(self, gamma2):
        for source in ("p a", "p (f a)", "p (f (f a))", "p (fix \\x:i. f x)"):
            assert member(gamma2, source).kind == IN, source

    def test_gamma4_side_predicate(self, gamma4):
        assert member(gamma4, "q (f (f a))").kind == IN
        assert member(gamma4, "p a").kind == IN

    def test_irrational_query_unknown(self, gamma5, fr_str_source):
        verdict = member(gamma5, f"from 0 ({fr_str_source} 0)")
        assert verdict.kind == UNKNOWN and verdict.reason == "irrational"

    def test_open_atom_rejected(self, gamma1):
        with pytest.raises(TermError):
            make_rational_atom(gamma1.sig, parse_formula("p x", gamma1.sig))


class TestEnumerateModel:
    def test_gamma1_depth2(self, gamma1):
        assert model_strings(gamma1, 2) == ["p a"]

    def test_gamma2_depth2(self, gamma2):
        assert model_strings(gamma2, 2) == [
            "p (f (f a))",
            "p (f a)",
            "p (fix \\x0:i. f x0)",
            "p a",
        ]

    def test_gamma3_depth2(self, gamma3):
        assert model_strings(gamma3, 2) == ["p (fix \\x0:i. f x0)"]

    def test_monotone_in_depth(self, gamma2):
        small = enumerate_model(gamma2, 1)
        large = enumerate_model(gamma2, 2)
        assert small <= large

    def test_gamma4_both_predicates(self, gamma4):
        atoms = model_strings(gamma4, 1)
        assert "p a" in atoms and "q a" in atoms and "q (f a)" in atoms


class TestWitnessReplay:
    def test_downward_closure(self, gamma1, gamma3, gamma4):
        # every In atom's witness step names a clause whose instantiated head
        # matches it, and each body atom is witnessed, self-assumed against
        # the chain, or independently In
        from coup.formulas import Atom

        cfg = OracleConfig(assume_budget=8, depth_budget=3)
        for program, source in (
            (gamma1, "p a"),
            (gamma3, "p (fix \\x:i. f x)"),
            (gamma4, "p a"),
            (gamma4, "q (f a)"),
        ):
            verdict = member(program, source, cfg)
            assert verdict.kind == IN and verdict.witness
            for atom_term, step in verdict.witness.items():
                assert fixbeta_equal(step.head_instance, atom_term, 32).is_equal
                for body in step.body:
                    in_chain = any(
                        fixbeta_equal(body, other, 32).is_equal
                        for other in verdict.witness
                    )
                    if not in_chain:
                        rational = make_rational_atom(program.sig, Atom(body))
                        assert gfp_member(program, rational, cfg).kind == IN


class TestBudgets:
    def test_monotone_budgets_on_fixtures(self, gamma1, gamma2, gamma3, gamma4):
        queries = [
            (gamma1, "p a"),
            (gamma2, "p a"),
            (gamma2, "p (f a)"),
            (gamma3, "p a"),
            (gamma3, "p (fix \\x:i. f x)"),
            (gamma4, "p a"),
            (gamma4, "q (f a)"),
        ]
        ladders = [OracleConfig(8, 3), OracleConfig(16, 4), OracleConfig(32, 6)]
        for program, source in queries:
            verdicts = [member(program, source, cfg).kind for cfg in ladders]
            settled = [v for v in verdicts if v in (IN, OUT)]
            # enlarging budgets never flips a settled verdict
            assert len(set(settled)) <= 1, (source, verdicts)

    def test_assume_budget_reachable(self, gamma2):
        # a tiny assumption budget still answers the growing chain optimistically
        verdict = member(gamma2, "p a", OracleConfig(assume_budget=4, depth_budget=3))
        assert verdict.kind == IN


class TestRationality:
    def test_finite_terms_rational(self, gamma1):
        assert term_is_rational(parse_term("p a", gamma1.sig))

    def test_fix_terms_rational(self, gamma3):
        assert term_is_rational(parse_term("fix \\x:i. f x", gamma3.sig))

    def test_stream_application_irrational(self, gamma5, fr_str_source):
        assert not term_is_rational(parse_term(f"{fr_str_source} 0", gamma5.sig))


class TestGroundTerms:
    def test_depth_counts_constructors(self, gamma2):
        iota = BaseType("i")
        depth0 = {print_formula_term(t) for t in ground_terms(gamma2.sig, iota, 0, include_fix=False)}
        assert depth0 == {"a"}
        depth2 = {print_formula_term(t) for t in ground_terms(gamma2.sig, iota, 2, include_fix=False)}
        assert depth2 == {"a", "f a", "f (f a)"}

    def test_fix_candidates_deduplicated(self, gamma2):
        iota = BaseType("i")
        fixes = [t for t in ground_terms(gamma2.sig, iota, 3) if "fix" in print_formula_term(t)]
        assert len(fixes) == 1


def print_formula_term(t):
    from coup.syntax import print_term

    return print_term(t)
