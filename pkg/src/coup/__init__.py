"""Coinductive uniform proofs for Horn clause logic.

A proof kernel for coinductive uniform proof certificates, goal-directed
search that discovers coinductive invariants (loop detection, anti-
unification, fixpoint-term synthesis), and an independent bounded oracle for
greatest complete Herbrand model membership, behind one surface syntax and
the ``coup`` command line tool.
"""

__version__ = "0.1.0"

from .terms import (
    App,
    Arrow,
    BaseType,
    Const,
    EquivVerdict,
    Fix,
    FlexibleHeadError,
    Lam,
    Signature,
    SimpleType,
    Substitution,
    Term,
    TermError,
    TypeMismatch,
    UnboundName,
    Var,
    alpha_canonical,
    alpha_equal,
    apply_subst,
    beta_normalize,
    check_guarded,
    fixbeta_equal,
    make_signature,
    one_step_unfold,
    typecheck,
    unify_rational,
)
from .formulas import (
    And,
    Atom,
    AtomClass,
    Exists,
    Forall,
    Formula,
    FormulaError,
    Fragment,
    FragmentViolation,
    Implies,
    NotAnAtom,
    Or,
    Program,
    Top,
    UniverseTag,
    classify_atom,
    fragment_leq,
    is_core,
    is_goal,
    is_program_clause,
    minimal_core_fragment,
    universe_check,
)
from .kernel import (
    CheckReport,
    DecidePayload,
    EigenPayload,
    FocusSeq,
    MainSeq,
    MarkedFormula,
    ProofNode,
    RejectedCertificate,
    RootSeq,
    Sequent,
    WitnessPayload,
    apply_cofix,
    check_certificate,
    check_proof,
    check_rule_instance,
    check_uniform_proof,
    erase_marks,
    register_lemma,
)
from .oracle import (
    MembershipVerdict,
    OracleConfig,
    RationalAtom,
    enumerate_model,
    gfp_member,
    make_rational_atom,
)
from .search import (
    DerivationTrace,
    FlexibleGoalHead,
    InvariantCandidate,
    SearchConfig,
    SearchResult,
    detect_loop,
    generalize_invariant,
    prove,
    sld_trace,
    synthesize_fix_args,
    uniform_search,
)
from .syntax import (
    ParseError,
    TheoryDocument,
    UnknownRuleLabel,
    parse_certificate,
    parse_formula,
    parse_sequent,
    parse_term,
    parse_theory,
    print_certificate,
    print_formula,
    print_sequent,
    print_term,
    print_theory,
)
