import pytest

from coup.terms import (
    App,
    Arrow,
    BaseType,
    Const,
    FORMULA_TYPE,
    Fix,
    FlexibleHeadError,
    Lam,
    Substitution,
    TermError,
    TypeMismatch,
    Var,
    alpha_canonical,
    alpha_equal,
    apply_subst,
    arrow,
    beta_normalize,
    check_guarded,
    fixbeta_equal,
    make_signature,
    one_step_unfold,
    typecheck,
    unify_rational,
)

IOTA = BaseType("i")
NAT = BaseType("nat")
STREAM = BaseType("stream")

SIG = make_signature(
    {
        "a": IOTA,
        "b": IOTA,
        "f": Arrow(IOTA, IOTA),
        "p": Arrow(IOTA, FORMULA_TYPE),
        "0": NAT,
        "s": Arrow(NAT, NAT),
        "scons": arrow(NAT, STREAM, STREAM),
        "from": arrow(NAT, STREAM, FORMULA_TYPE),
    }
)


def fr_str():
    return Fix(
        "f0",
        Arrow(NAT, STREAM),
        Lam("n", NAT, App(App(Const("scons"), Var("n")), App(Var("f0"), App(Const("s"), Var("n"))))),
    )


def fapp(*names):
    term = Const(names[-1])
    for name in reversed(names[:-1]):
        term = App(Const(name), term)
    return term


class TestTypecheck:
    def test_constant_lookup(self):
        assert typecheck(SIG, {}, Const("a")) == IOTA

    def test_stream_fixpoint_type(self):
        # hand derivation: the binder has type nat -> stream, the body
        # abstracts a nat and produces scons n (f (s n)) : stream
        assert typecheck(SIG, {}, fr_str()) == Arrow(NAT, STREAM)

    def test_self_application_rejected(self):
        with pytest.raises(TypeMismatch):
            typecheck(SIG, {}, App(Const("f"), Const("f")))

    def test_unbound_variable(self):
        with pytest.raises(TermError):
            typecheck(SIG, {}, Var("zzz"))

    def test_fix_body_must_match_binder_type(self):
        with pytest.raises(TypeMismatch):
            typecheck(SIG, {}, Fix("x", IOTA, Const("0")))


class TestBetaNormalize:
    def test_identity_redex(self):
        t = App(Lam("x", IOTA, Var("x")), Const("a"))
        assert beta_normalize(t) == Const("a")

    def test_fix_is_opaque(self):
        t = App(fr_str(), Const("0"))
        assert beta_normalize(t) == alpha_canonical(t)

    def test_two_contractions(self):
        g = make_signature({"g": arrow(IOTA, IOTA, IOTA), "a": IOTA, "b": IOTA})
        t = App(
            App(Lam("x", IOTA, Lam("y", IOTA, App(App(Const("g"), Var("x")), Var("y")))), Const("a")),
            Const("b"),
        )
        assert beta_normalize(t) == App(App(Const("g"), Const("a")), Const("b"))

    def test_canonical_output_idempotent(self):
        t = Lam("q", IOTA, App(Const("f"), Var("q")))
        once = beta_normalize(t)
        assert beta_normalize(once) == once
        assert alpha_canonical(once) == once


class TestGuardedness:
    def test_unary_constructor_loop(self):
        assert check_guarded(Fix("x", IOTA, App(Const("f"), Var("x"))))

    def test_bare_self_reference(self):
        assert not check_guarded(Fix("x", IOTA, Var("x")))

    def test_stream_fixpoint(self):
        assert check_guarded(fr_str())

    def test_head_position_rejected(self):
        # the recursive call heads the stripped body: never productive
        t = Fix("g", Arrow(NAT, STREAM), Lam("n", NAT, App(Var("g"), App(Const("s"), Var("n")))))
        assert not check_guarded(t)

    def test_non_fix_input_rejected(self):
        with pytest.raises(TermError):
            check_guarded(Const("a"))


class TestFixbetaEqual:
    def test_unary_unfolding(self):
        fx = Fix("x", IOTA, App(Const("f"), Var("x")))
        assert fixbeta_equal(fx, App(Const("f"), fx)).is_equal

    def test_stream_unfolding(self):
        lhs = App(fr_str(), Const("0"))
        rhs = App(
            App(Const("scons"), Const("0")),
            App(fr_str(), App(Const("s"), Const("0"))),
        )
        assert fixbeta_equal(lhs, rhs).is_equal

    def test_distinct_constants(self):
        verdict = fixbeta_equal(Const("a"), Const("b"))
        assert verdict.kind == "not_equal"

    def test_different_stream_positions_differ(self):
        lhs = App(fr_str(), Const("0"))
        rhs = App(fr_str(), App(Const("s"), Const("0")))
        assert fixbeta_equal(lhs, rhs).kind == "not_equal"

    def test_coincides_with_beta_on_fix_free(self):
        t1 = App(Lam("x", IOTA, App(Const("f"), Var("x"))), Const("a"))
        t2 = App(Const("f"), Const("a"))
        assert fixbeta_equal(t1, t2).is_equal

    def test_one_step_unfold_invariance(self):
        fx = Fix("x", IOTA, App(Const("f"), App(Const("f"), Var("x"))))
        assert fixbeta_equal(fx, one_step_unfold(fx), budget=4).is_equal

    def test_equal_rational_representations(self):
        one = Fix("x", IOTA, App(Const("f"), Var("x")))
        two = Fix("y", IOTA, App(Const("f"), App(Const("f"), Var("y"))))
        assert fixbeta_equal(one, two).is_equal

    def test_budget_exhaustion_reported(self):
        # two different irrational streams agree on every finite prefix
        # reachable within a tiny budget
        double = Fix(
            "g",
            Arrow(NAT, STREAM),
            Lam(
                "n",
                NAT,
                App(
                    App(Const("scons"), Var("n")),
                    App(
                        App(Const("scons"), App(Const("s"), Var("n"))),
                        App(Var("g"), App(Const("s"), App(Const("s"), Var("n")))),
                    ),
                ),
            ),
        )
        verdict = fixbeta_equal(App(fr_str(), Const("0")), App(double, Const("0")), budget=3)
        assert verdict.kind == "budget_exhausted"
        assert verdict.unfolds_used > 0


class TestApplySubst:
    def test_formula_style_substitution(self):
        subst = Substitution({"x": App(Const("f"), Var("x1"))})
        out = apply_subst(subst, App(Const("p"), Var("x")))
        assert out == App(Const("p"), App(Const("f"), Var("x1")))

    def test_empty_substitution_is_identity(self):
        t = App(Const("p"), Const("a"))
        assert apply_subst(Substitution({}), t) == alpha_canonical(t)

    def test_bound_occurrences_untouched(self):
        subst = Substitution({"x": Const("a")})
        t = Lam("x", IOTA, Var("x"))
        assert alpha_equal(apply_subst(subst, t), t)

    def test_capture_avoided(self):
        # substituting a term mentioning y under a y-binder must rename
        subst = Substitution({"x": Var("y")})
        t = Lam("y", IOTA, App(App(Const("g2"), Var("x")), Var("y")))
        out = apply_subst(subst, t)
        assert isinstance(out, Lam)
        assert out.body.fun.arg == Var("y")          # the free y stays free
        assert out.body.arg == Var(out.binder)       # the bound one follows its binder
        assert out.binder != "y"


class TestUnifyRational:
    def test_from_clause_head(self):
        lhs = App(App(Const("from"), Const("0")), Var("y"))
        rhs = App(
            App(Const("from"), Var("x")),
            App(App(Const("scons"), Var("x")), Var("y'")),
        )
        subst = unify_rational(lhs, rhs, var_types={"x": NAT, "y": STREAM, "y'": STREAM})
        assert subst is not None
        assert subst.bindings["x"] == Const("0")
        assert subst.bindings["y"] == App(App(Const("scons"), Const("0")), Var("y'"))

    def test_identical_atoms(self):
        atom = App(Const("p"), Const("a"))
        subst = unify_rational(atom, atom)
        assert subst is not None and not subst.bindings

    def test_cycle_materializes_guarded_fix(self):
        subst = unify_rational(Var("x"), App(Const("f"), Var("x")), var_types={"x": IOTA})
        assert subst is not None
        fix_term = subst.bindings["x"]
        assert isinstance(fix_term, Fix) and check_guarded(fix_term)
        lhs = apply_subst(subst, Var("x"))
        rhs = apply_subst(subst, App(Const("f"), Var("x")))
        assert fixbeta_equal(lhs, rhs, budget=64).is_equal

    def test_head_clash(self):
        assert unify_rational(Const("a"), Const("b")) is None

    def test_flexible_head_refused(self):
        with pytest.raises(FlexibleHeadError):
            unify_rational(App(Var("h"), Const("a")), App(Const("p"), Const("a")))

    def test_mutual_cycle(self):
        g = make_signature({"g2": arrow(IOTA, IOTA, IOTA)})
        lhs = Var("x")
        rhs = App(App(Const("g2"), Var("y")), Var("x"))
        # x = g2 y x is a direct cycle on x with y free
        subst = unify_rational(lhs, rhs, var_types={"x": IOTA, "y": IOTA})
        assert subst is not None
        assert subst.is_idempotent()
        assert fixbeta_equal(
            apply_subst(subst, lhs), apply_subst(subst, rhs), budget=64
        ).is_equal

    def test_fix_against_constructor_spine(self):
        lhs = App(App(Const("scons"), Var("u")), Var("v"))
        rhs = App(fr_str(), Const("0"))
        subst = unify_rational(lhs, rhs, var_types={"u": NAT, "v": STREAM})
        assert subst is not None
        assert subst.bindings["u"] == Const("0")
        assert alpha_equal(subst.bindings["v"], App(fr_str(), App(Const("s"), Const("0"))))


class TestAlphaCanonical:
    def test_idempotent(self):
        t = Lam("a", IOTA, Lam("b", IOTA, App(Var("a"), Var("b"))))
        assert alpha_canonical(alpha_canonical(t)) == alpha_canonical(t)

    def test_alpha_equal_terms_coincide(self):
        t1 = Lam("u", IOTA, App(Const("f"), Var("u")))
        t2 = Lam("w", IOTA, App(Const("f"), Var("w")))
        assert alpha_canonical(t1) == alpha_canonical(t2)

    def test_free_variables_preserved(self):
        t = Lam("u", IOTA, App(Var("free"), Var("u")))
        out = alpha_canonical(t)
        assert isinstance(out.body.fun, Var) and out.body.fun.name == "free"

    def test_collision_with_free_name_escalates(self):
        t = Lam("u", IOTA, App(Var("x0"), Var("u")))
        out = alpha_canonical(t)
        assert out.binder != "x0"
        assert out.body.fun == Var("x0")


class TestSignature:
    def test_o_cannot_feed_individuals(self):
        with pytest.raises(TermError):
            make_signature({"bad": Arrow(FORMULA_TYPE, IOTA)})

    def test_predicates_may_take_predicates(self):
        sig = make_signature({"j": Arrow(Arrow(IOTA, FORMULA_TYPE), FORMULA_TYPE)})
        assert "j" in sig

    def test_no_duplicate_constants(self):
        with pytest.raises(TermError):
            SIG.extend("a", IOTA)

    def test_reserved_names_rejected(self):
        with pytest.raises(TermError):
            SIG.extend("@and", IOTA)
