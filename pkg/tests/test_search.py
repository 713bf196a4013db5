import pytest

from coup.formulas import Atom, Exists, Fragment, TOP, formula_alpha_equal, is_core
from coup.kernel import MainSeq, MarkedFormula, RootSeq, check_proof, check_uniform_proof
from coup.search import (
    FINITE_FAILURE,
    FINITE_SUCCESS,
    LOOP_FOUND,
    TRACE_BUDGET_EXHAUSTED,
    FlexibleGoalHead,
    SearchConfig,
    candidate_invariants,
    detect_loop,
    generalize_invariant,
    prove,
    sld_trace,
    synthesize_fix_args,
    uniform_search,
)
from coup.syntax import parse_formula, print_certificate, print_formula
from coup.terms import App, Const, Var, fixbeta_equal, raw_subst, spine
from coup.formulas import term_of_formula, subst_formula
from coup.oracle import horn_paths


def rule_sequence(tree):
    out = [tree.rule]
    for p in tree.premises:
        out.extend(rule_sequence(p))
    return out


class TestSldTrace:
    def test_gamma1_loops_at_step_one(self, gamma1):
        trace = sld_trace(gamma1, parse_formula("p a", gamma1.sig))
        assert trace.verdict == LOOP_FOUND
        assert trace.loop == (0, 1)

    def test_gamma2_exhausts_with_deepening_goals(self, gamma2):
        trace = sld_trace(gamma2, parse_formula("p a", gamma2.sig))
        assert trace.verdict == TRACE_BUDGET_EXHAUSTED
        firsts = [print_formula(step.goals[0]) for step in trace.steps[:3]]
        assert firsts == ["p a", "p (f a)", "p (f (f a))"]

    def test_gamma4_interleaves_side_goals(self, gamma4):
        trace = sld_trace(gamma4, parse_formula("p a", gamma4.sig))
        assert trace.verdict == TRACE_BUDGET_EXHAUSTED
        step = trace.steps[2]
        preds = [spine(term_of_formula(g))[0].name for g in step.goals]
        assert preds[0] == "p" and "q" in preds[1:]

    def test_step_soundness(self, gamma4):
        # applying each step's substitution to the selected atom matches the
        # clause-path head up to tree equality
        trace = sld_trace(gamma4, parse_formula("p a", gamma4.sig))
        for i in range(1, len(trace.steps)):
            step = trace.steps[i]
            selected = trace.steps[i - 1].goals[0]
            clause = gamma4.clauses[step.clause_index]
            matched = False
            for path in horn_paths(clause):
                mapping = {name: Var(f"{name}_s{i}") for name, _ in path.binders}
                head = raw_subst(term_of_formula(path.head), mapping)
                lhs = raw_subst(head, step.substitution.bindings)
                rhs = raw_subst(term_of_formula(selected), step.substitution.bindings)
                if fixbeta_equal(lhs, rhs, 32).is_equal:
                    matched = True
                    break
            assert matched, f"step {i} does not replay"

    def test_finite_success(self, gamma4):
        trace = sld_trace(gamma4, parse_formula("q a", gamma4.sig))
        assert trace.verdict == FINITE_SUCCESS

    def test_finite_failure(self, gamma3):
        trace = sld_trace(gamma3, parse_formula("p a", gamma3.sig))
        assert trace.verdict == FINITE_FAILURE

    def test_flexible_goal_refused(self, gamma1):
        with pytest.raises(FlexibleGoalHead):
            sld_trace(gamma1, Atom(App(Var("h"), Const("a"))))


class TestDetectLoop:
    def test_gamma1(self, gamma1):
        trace = sld_trace(gamma1, parse_formula("p a", gamma1.sig))
        cand = detect_loop(trace)
        assert cand is not None
        assert formula_alpha_equal(cand.formula, parse_formula("p a", gamma1.sig))
        assert cand.fragment == Fragment.CO_FOHC
        assert cand.provenance == "loop"

    def test_gamma2_none(self, gamma2):
        trace = sld_trace(gamma2, parse_formula("p a", gamma2.sig))
        assert detect_loop(trace) is None

    def test_gamma5_none(self, gamma5, fr_str_source):
        goal = parse_formula(f"from 0 ({fr_str_source} 0)", gamma5.sig)
        trace = sld_trace(gamma5, goal)
        assert detect_loop(trace) is None

    def test_gamma3_rational_loop(self, gamma3):
        trace = sld_trace(gamma3, Atom(App(Const("p"), Var("x"))))
        cand = detect_loop(trace)
        assert cand is not None
        expected = parse_formula("p (fix \\x:i. f x)", gamma3.sig)
        assert formula_alpha_equal(cand.formula, expected)
        assert cand.uses_fix and cand.fragment == Fragment.CO_FOHC


class TestGeneralize:
    def test_gamma2(self, gamma2):
        trace = sld_trace(gamma2, parse_formula("p a", gamma2.sig))
        cands = generalize_invariant(trace, gamma2)
        assert [print_formula(c.formula) for c in cands] == ["forall x:i. p x"]
        assert cands[0].provenance == "generalize"

    def test_gamma4_plain_then_conditional(self, gamma4):
        trace = sld_trace(gamma4, parse_formula("p a", gamma4.sig))
        cands = generalize_invariant(trace, gamma4)
        rendered = [print_formula(c.formula) for c in cands]
        assert rendered == ["forall x:i. p x", "forall x:i. q x => p x"]
        assert [c.provenance for c in cands] == ["generalize", "conditional"]

    def test_single_step_trace_empty(self, gamma4):
        trace = sld_trace(gamma4, parse_formula("q a", gamma4.sig))
        # one resolution of q(a) to the fact: nothing to generalize over
        assert generalize_invariant(trace, gamma4) == []


class TestSynthesizeFix:
    def test_gamma3_existential(self, gamma3):
        trace = sld_trace(gamma3, Atom(App(Const("p"), Var("x"))))
        cands = synthesize_fix_args(trace)
        assert len(cands) == 1
        expected = parse_formula("p (fix \\x:i. f x)", gamma3.sig)
        assert formula_alpha_equal(cands[0].formula, expected)
        assert cands[0].provenance == "fix-synthesis"

    def test_gamma5_open_output(self, gamma5, fr_str_source):
        trace = sld_trace(gamma5, parse_formula("from 0 y", gamma5.sig))
        cands = synthesize_fix_args(trace)
        assert len(cands) == 1
        expected = parse_formula(f"forall x:nat. from x ({fr_str_source} x)", gamma5.sig)
        assert formula_alpha_equal(cands[0].formula, expected)
        assert cands[0].fragment == Fragment.CO_HOHH and cands[0].uses_fix

    def test_ground_finite_trace_empty(self, gamma4):
        trace = sld_trace(gamma4, parse_formula("q a", gamma4.sig))
        assert synthesize_fix_args(trace) == []


class TestUniformSearch:
    def test_gamma1_guarded_sequent(self, gamma1):
        pa = parse_formula("p a", gamma1.sig)
        root = RootSeq(gamma1.sig, gamma1.entries(), pa)
        cert = uniform_search(Fragment.CO_FOHC, root)
        assert cert is not None
        assert rule_sequence(cert) == [
            "co-fix", "decide<>", "forallL<>", "impL<>", "initial", "decide", "initial",
        ]
        assert check_proof(Fragment.CO_FOHC, cert).accepted

    def test_gamma5_matches_displayed_derivation(self, gamma5, fr_str_source):
        inv = parse_formula(f"forall x:nat. from x ({fr_str_source} x)", gamma5.sig)
        root = RootSeq(gamma5.sig, gamma5.entries(), inv)
        cert = uniform_search(Fragment.CO_HOHH, root, allow_fix=True)
        assert cert is not None
        assert rule_sequence(cert) == [
            "co-fix", "forallR<>", "decide<>", "forallL<>", "forallL<>",
            "impL<>", "initial", "decide", "forallL", "initial",
        ]

    def test_truth_goal(self, gamma1):
        seq = MainSeq(gamma1.sig, (), MarkedFormula(TOP, False))
        cert = uniform_search(Fragment.CO_FOHC, seq)
        assert cert is not None and rule_sequence(cert) == ["topR"]

    def test_search_determinism(self, gamma2):
        inv = parse_formula("forall x:i. p x", gamma2.sig)
        root = RootSeq(gamma2.sig, gamma2.entries(), inv)
        one = uniform_search(Fragment.CO_FOHH, root)
        two = uniform_search(Fragment.CO_FOHH, root)
        assert one == two


class TestProve:
    def test_gamma1_direct(self, gamma1):
        result = prove(Fragment.CO_FOHC, gamma1, parse_formula("p a", gamma1.sig))
        assert result is not None
        assert formula_alpha_equal(result.invariant.formula, parse_formula("p a", gamma1.sig))
        assert result.corollary_proof is None

    def test_gamma2_generalized(self, gamma2):
        result = prove(Fragment.CO_FOHH, gamma2, parse_formula("p a", gamma2.sig))
        assert result is not None
        assert print_formula(result.invariant.formula) == "forall x:i. p x"
        assert result.corollary_proof is not None
        assert check_uniform_proof(Fragment.CO_FOHH, result.corollary_proof).accepted

    def test_gamma3_existential(self, gamma3):
        goal = parse_formula("exists x:i. p x", gamma3.sig)
        result = prove(Fragment.CO_FOHC, gamma3, goal)
        assert result is not None
        expected = parse_formula("p (fix \\x:i. f x)", gamma3.sig)
        assert formula_alpha_equal(result.invariant.formula, expected)
        assert result.corollary_proof is not None
        # the corollary discharges the existential with the synthesized term
        rules = rule_sequence(result.corollary_proof)
        assert rules[0] == "existsR"

    def test_heuristic_order_respected(self, gamma1):
        trace = sld_trace(gamma1, parse_formula("p a", gamma1.sig))
        cands = candidate_invariants(gamma1, trace)
        assert cands and cands[0].provenance == "loop"

    def test_loop_only_fails_on_gamma2(self, gamma2):
        cfg = SearchConfig(heuristic_order=("loop",))
        assert prove(Fragment.CO_FOHH, gamma2, parse_formula("p a", gamma2.sig), cfg) is None

    def test_invalid_goal_rejected(self, gamma1):
        with pytest.raises(ValueError):
            prove(Fragment.CO_FOHC, gamma1, parse_formula("forall x:i. p x", gamma1.sig))

    def test_stats_populated(self, gamma2):
        result = prove(Fragment.CO_FOHH, gamma2, parse_formula("p a", gamma2.sig))
        assert result.stats.nodes_expanded > 0
        assert result.stats.elapsed > 0
