"""Parsers and printers for theories, goals, sequents, and certificates.

One expression grammar covers terms and formulas alike: identifiers,
juxtaposition for application, ``\\x:T. body`` and ``fix \\x:T. body``
binders, ``&``/``,`` for conjunction, ``;`` for disjunction, ``=>`` for
implication (right associative), ``forall x:T.`` / ``exists x:T.``
quantifiers, and ``true``.  Formulas are the type-``o`` view of the parsed
term.  ``#`` starts a line comment.

Theory files hold ``kind``/``const``/``fragment`` declarations followed by
clauses, each statement terminated by ``.``.  Certificates are parenthesized
rule trees ``(label {payload} "sequent" premises...)`` with sequents quoted
in surface syntax; a sequent's leading ``[c:T, ...]`` lists the constants it
adds to the theory signature.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional, Union

from .formulas import (
    Atom,
    And,
    Exists,
    Forall,
    Formula,
    FormulaError,
    Fragment,
    Implies,
    Or,
    Program,
    Top,
    FragmentViolation,
    formula_closed,
    formula_free_vars,
    formula_of_term,
    guarded_fixes_ok,
    is_program_clause,
    term_of_formula,
    typecheck_formula,
)
from .kernel import (
    ALL_RULES,
    DECIDE,
    DECIDE_G,
    DecidePayload,
    EXISTS_R,
    EigenPayload,
    FORALL_L,
    FORALL_L_G,
    FORALL_R,
    FORALL_R_G,
    FocusSeq,
    MainSeq,
    MarkedFormula,
    Payload,
    ProofNode,
    RootSeq,
    Sequent,
    WitnessPayload,
)
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
    Term,
    TermError,
    Var,
    check_guarded,
    flatten_arrow,
    spine,
    typecheck,
)


class ParseError(Exception):
    def __init__(self, message: str, line: int, col: int):
        super().__init__(f"line {line}, column {col}: {message}")
        self.message = message
        self.line = line
        self.col = col


class UnknownRuleLabel(ParseError):
    pass


KEYWORDS = frozenset({"forall", "exists", "true", "fix", "kind", "const", "fragment", "lemma"})


# ---------------------------------------------------------------------------
# Lexer

IDENT = "ident"
NUMBER = "number"
STRING = "string"
PUNCT = "punct"
EOF = "eof"

_PUNCT_TOKENS = [
    "-->", "->", "--", "=>", "~>",
    "(", ")", "[", "]", "{", "}", "<", ">",
    ".", ",", ";", ":", "&", "|", "+", "-", "\\",
]


@dataclass(frozen=True)
class Token:
    kind: str
    text: str
    line: int
    col: int


def tokenize(text: str) -> list[Token]:
    tokens: list[Token] = []
    line, col = 1, 1
    i = 0
    n = len(text)
    while i < n:
        c = text[i]
        if c == "\n":
            line += 1
            col = 1
            i += 1
            continue
        if c in " \t\r":
            i += 1
            col += 1
            continue
        if c == "#":
            while i < n and text[i] != "\n":
                i += 1
            continue
        if c == '"':
            j = text.find('"', i + 1)
            if j < 0:
                raise ParseError("unterminated string", line, col)
            content = text[i + 1 : j]
            tokens.append(Token(STRING, content, line, col))
            col += j - i + 1
            i = j + 1
            if "\n" in content:
                line += content.count("\n")
                col = len(content) - content.rfind("\n")
            continue
        if c.isdigit():
            j = i
            while j < n and text[j].isdigit():
                j += 1
            tokens.append(Token(NUMBER, text[i:j], line, col))
            col += j - i
            i = j
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (text[j].isalnum() or text[j] in "_'"):
                j += 1
            tokens.append(Token(IDENT, text[i:j], line, col))
            col += j - i
            i = j
            continue
        for punct in _PUNCT_TOKENS:
            if text.startswith(punct, i):
                tokens.append(Token(PUNCT, punct, line, col))
                col += len(punct)
                i += len(punct)
                break
        else:
            raise ParseError(f"unexpected character {c!r}", line, col)
    tokens.append(Token(EOF, "", line, col))
    return tokens


class _Cursor:
    def __init__(self, tokens: list[Token]):
        self.tokens = tokens
        self.pos = 0

    def peek(self, ahead: int = 0) -> Token:
        return self.tokens[min(self.pos + ahead, len(self.tokens) - 1)]

    def next(self) -> Token:
        tok = self.peek()
        if tok.kind != EOF:
            self.pos += 1
        return tok

    def at_punct(self, text: str) -> bool:
        tok = self.peek()
        return tok.kind == PUNCT and tok.text == text

    def at_keyword(self, word: str) -> bool:
        tok = self.peek()
        return tok.kind == IDENT and tok.text == word

    def expect_punct(self, text: str) -> Token:
        tok = self.peek()
        if not self.at_punct(text):
            raise ParseError(f"expected {text!r}, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        return self.next()

    def expect_ident(self) -> Token:
        tok = self.peek()
        if tok.kind != IDENT:
            raise ParseError(f"expected an identifier, found {tok.text or 'end of input'!r}", tok.line, tok.col)
        if tok.text in KEYWORDS:
            raise ParseError(f"{tok.text!r} is a reserved word", tok.line, tok.col)
        return self.next()

    def error(self, message: str) -> ParseError:
        tok = self.peek()
        return ParseError(message, tok.line, tok.col)


# ---------------------------------------------------------------------------
# Types


def _parse_type(cur: _Cursor) -> SimpleType:
    left = _parse_type_atom(cur)
    if cur.at_punct("->"):
        cur.next()
        return Arrow(left, _parse_type(cur))
    return left


def _parse_type_atom(cur: _Cursor) -> SimpleType:
    if cur.at_punct("("):
        cur.next()
        t = _parse_type(cur)
        cur.expect_punct(")")
        return t
    tok = cur.expect_ident()
    return BaseType(tok.text)


def print_type(t: SimpleType) -> str:
    return str(t)


# ---------------------------------------------------------------------------
# Expressions (terms and formulas share one grammar)

_EXPR_STOP = frozenset({")", "]", "}", ".", "|", "-->", "--", "~>", "<", ">"})


def _parse_expr(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    return _parse_implies(cur, sig, bound)


def _parse_implies(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    left = _parse_disj(cur, sig, bound)
    if cur.at_punct("=>"):
        cur.next()
        right = _parse_implies(cur, sig, bound)
        return App(App(Const(IMPLIES_NAME), left), right)
    return left


def _parse_disj(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    left = _parse_conj(cur, sig, bound)
    while cur.at_punct(";"):
        cur.next()
        right = _parse_conj(cur, sig, bound)
        left = App(App(Const(OR_NAME), left), right)
    return left


def _parse_conj(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    left = _parse_unit(cur, sig, bound)
    while cur.at_punct("&") or cur.at_punct(","):
        cur.next()
        right = _parse_unit(cur, sig, bound)
        left = App(App(Const(AND_NAME), left), right)
    return left


def _parse_binder(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> tuple[str, SimpleType, Term]:
    name = cur.expect_ident().text
    cur.expect_punct(":")
    typ = _parse_type(cur)
    cur.expect_punct(".")
    body = _parse_expr(cur, sig, bound | {name})
    return name, typ, body


def _parse_unit(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    tok = cur.peek()
    if tok.kind == IDENT and tok.text in ("forall", "exists"):
        cur.next()
        name, typ, body = _parse_binder(cur, sig, bound)
        quant = FORALL_NAME if tok.text == "forall" else EXISTS_NAME
        return App(Const(quant), Lam(name, typ, body))
    if cur.at_punct("\\"):
        cur.next()
        name, typ, body = _parse_binder(cur, sig, bound)
        return Lam(name, typ, body)
    if tok.kind == IDENT and tok.text == "fix":
        cur.next()
        cur.expect_punct("\\")
        name, typ, body = _parse_binder(cur, sig, bound)
        fix = Fix(name, typ, body)
        if not check_guarded(fix):
            raise ParseError(f"fix term binding {name!r} is not guarded", tok.line, tok.col)
        return fix
    return _parse_app(cur, sig, bound)


def _parse_app(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    head = _parse_atom_expr(cur, sig, bound)
    while True:
        tok = cur.peek()
        if tok.kind in (IDENT, NUMBER) and tok.text not in KEYWORDS:
            head = App(head, _parse_atom_expr(cur, sig, bound))
        elif cur.at_punct("("):
            head = App(head, _parse_atom_expr(cur, sig, bound))
        else:
            return head


def _parse_atom_expr(cur: _Cursor, sig: Signature, bound: frozenset[str]) -> Term:
    tok = cur.peek()
    if cur.at_punct("("):
        cur.next()
        t = _parse_expr(cur, sig, bound)
        cur.expect_punct(")")
        return t
    if tok.kind == NUMBER:
        cur.next()
        return Const(tok.text)
    if tok.kind == IDENT:
        if tok.text == "true":
            cur.next()
            return Const(TOP_NAME)
        if tok.text in KEYWORDS:
            raise ParseError(f"unexpected keyword {tok.text!r}", tok.line, tok.col)
        cur.next()
        if tok.text in bound:
            return Var(tok.text)
        if tok.text in sig:
            return Const(tok.text)
        return Var(tok.text)
    raise ParseError(f"expected a term, found {tok.text or 'end of input'!r}", tok.line, tok.col)


def parse_term(text: str, sig: Signature) -> Term:
    cur = _Cursor(tokenize(text))
    t = _parse_expr(cur, sig, frozenset())
    tok = cur.peek()
    if tok.kind != EOF:
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return t


def parse_formula(text: str, sig: Signature) -> Formula:
    return formula_of_term(parse_term(text, sig))


# ---------------------------------------------------------------------------
# Printers

_PREC_IMPLIES = 0
_PREC_OR = 1
_PREC_AND = 2
_PREC_APP = 3
_PREC_ATOM = 4


def print_term(t: Term, prec: int = 0) -> str:
    head, args = spine(t)
    if isinstance(head, Const) and head.name in LOGICAL_NAMES:
        if head.name == TOP_NAME and not args:
            return "true"
        if head.name == IMPLIES_NAME and len(args) == 2:
            s = f"{print_term(args[0], _PREC_OR)} => {print_term(args[1], _PREC_IMPLIES)}"
            return f"({s})" if prec > _PREC_IMPLIES else s
        if head.name == OR_NAME and len(args) == 2:
            s = f"{print_term(args[0], _PREC_OR)} ; {print_term(args[1], _PREC_AND)}"
            return f"({s})" if prec > _PREC_OR else s
        if head.name == AND_NAME and len(args) == 2:
            s = f"{print_term(args[0], _PREC_AND)} & {print_term(args[1], _PREC_APP)}"
            return f"({s})" if prec > _PREC_AND else s
        if head.name in (FORALL_NAME, EXISTS_NAME) and len(args) == 1 and isinstance(args[0], Lam):
            word = "forall" if head.name == FORALL_NAME else "exists"
            lam = args[0]
            s = f"{word} {lam.binder}:{print_type(lam.binder_type)}. {print_term(lam.body, 0)}"
            return f"({s})" if prec > 0 else s
        raise FormulaError(f"cannot print partial application of {head.name}")
    if isinstance(t, (Var, Const)):
        return t.name
    if isinstance(t, Lam):
        s = f"\\{t.binder}:{print_type(t.binder_type)}. {print_term(t.body, 0)}"
        return f"({s})" if prec > 0 else s
    if isinstance(t, Fix):
        s = f"fix \\{t.binder}:{print_type(t.binder_type)}. {print_term(t.body, 0)}"
        return f"({s})" if prec > 0 else s
    parts = [print_term(head, _PREC_ATOM)] + [print_term(a, _PREC_ATOM) for a in args]
    s = " ".join(parts)
    return f"({s})" if prec > _PREC_APP else s


def print_formula(f: Formula, prec: int = 0) -> str:
    return print_term(term_of_formula(f), prec)


# ---------------------------------------------------------------------------
# Theories


@dataclass(frozen=True)
class TheoryDocument:
    kinds: tuple[str, ...]
    sig: Signature
    fragment: Fragment
    allow_fix: bool
    clauses: tuple[Formula, ...]

    def to_program(self) -> Program:
        program = Program(self.sig, self.fragment, self.allow_fix, self.clauses)
        program.validate()
        return program


_FRAGMENTS = {f.value: f for f in Fragment}


def _parse_fragment_name(cur: _Cursor) -> Fragment:
    first = cur.expect_ident()
    cur.expect_punct("-")
    second = cur.expect_ident()
    name = f"{first.text}-{second.text}"
    if name not in _FRAGMENTS:
        raise ParseError(f"unknown fragment {name!r}", first.line, first.col)
    return _FRAGMENTS[name]


def infer_free_var_types(sig: Signature, t: Term) -> dict[str, SimpleType]:
    """Infer the types of free variables from their argument positions.

    Works for the applicative first-order shapes clauses are written in; a
    free variable used at two different types, at the head of an application,
    or in an uninferable spot is an error.
    """
    inferred: dict[str, SimpleType] = {}

    def record(name: str, typ: SimpleType, tok_hint: str) -> None:
        old = inferred.get(name)
        if old is not None and old != typ:
            raise TermError(f"variable {name!r} used at both {old} and {typ}")
        inferred[name] = typ

    def go(t: Term, expected: Optional[SimpleType], bound: dict[str, SimpleType]) -> None:
        head, args = spine(t)
        if isinstance(head, Const) and head.name in LOGICAL_NAMES:
            if head.name in (FORALL_NAME, EXISTS_NAME) and args and isinstance(args[0], Lam):
                lam = args[0]
                inner = dict(bound)
                inner[lam.binder] = lam.binder_type
                go(lam.body, FORMULA_TYPE, inner)
                return
            for a in args:
                go(a, FORMULA_TYPE, bound)
            return
        if isinstance(head, (Lam, Fix)):
            inner = dict(bound)
            inner[head.binder] = head.binder_type
            go(head.body, None, inner)
            for a in args:
                go(a, None, bound)
            return
        if isinstance(head, Var) and head.name not in bound:
            if args:
                raise TermError(
                    f"cannot infer types under variable-headed application {head.name!r}"
                )
            if expected is not None:
                record(head.name, expected, head.name)
            return
        head_type: Optional[SimpleType]
        if isinstance(head, Var):
            head_type = bound[head.name]
        else:
            head_type = sig.type_of(head.name) if head.name in sig else None
        if head_type is None:
            raise TermError(f"unknown constant {head.name!r}")
        arg_types, _ = flatten_arrow(head_type)
        if len(args) > len(arg_types):
            raise TermError(f"constant {head.name!r} applied to too many arguments")
        for a, ty in zip(args, arg_types):
            go(a, ty, bound)

    go(t, FORMULA_TYPE, {})
    return inferred


def _autoclose(sig: Signature, f: Formula) -> Formula:
    """Universally close capitalized free variables, inferring binder types."""
    term = term_of_formula(f)
    frees = [v for v in _ordered_free_vars(term) if v[0].isupper()]
    if not frees:
        return f
    types = infer_free_var_types(sig, term)
    closed = f
    for name in reversed(frees):
        if name not in types:
            raise TermError(f"cannot infer a type for variable {name!r}")
        closed = Forall(name, types[name], closed)
    return closed


def _ordered_free_vars(t: Term) -> list[str]:
    from .terms import free_vars_ordered

    return free_vars_ordered(t)


def parse_theory(text: str, autoclose: bool = False) -> TheoryDocument:
    cur = _Cursor(tokenize(text))
    kinds: list[str] = []
    sig = Signature({})
    fragment = Fragment.CO_FOHC
    allow_fix = False
    clauses: list[Formula] = []

    while cur.peek().kind != EOF:
        tok = cur.peek()
        if cur.at_keyword("kind"):
            cur.next()
            while not cur.at_punct("."):
                name = cur.expect_ident().text
                if name == FORMULA_TYPE.name or name in kinds:
                    raise ParseError(f"kind {name!r} already declared", tok.line, tok.col)
                kinds.append(name)
            cur.expect_punct(".")
            continue
        if cur.at_keyword("const"):
            cur.next()
            name_tok = cur.peek()
            if name_tok.kind == NUMBER:
                cur.next()
            else:
                name_tok = cur.expect_ident()
            cur.expect_punct(":")
            typ = _parse_type(cur)
            cur.expect_punct(".")
            _check_kind_refs(typ, kinds, name_tok)
            try:
                sig.check_constant(name_tok.text, typ)
                sig = sig.extend(name_tok.text, typ)
            except TermError as e:
                raise ParseError(str(e), name_tok.line, name_tok.col) from None
            continue
        if cur.at_keyword("fragment"):
            cur.next()
            fragment = _parse_fragment_name(cur)
            if cur.at_punct("+"):
                cur.next()
                fix_tok = cur.peek()
                if not (fix_tok.kind == IDENT and fix_tok.text == "fix"):
                    raise ParseError("expected 'fix' after '+'", fix_tok.line, fix_tok.col)
                cur.next()
                allow_fix = True
            cur.expect_punct(".")
            continue
        # clause
        term = _parse_expr(cur, sig, frozenset())
        cur.expect_punct(".")
        try:
            clause = formula_of_term(term)
            if autoclose:
                clause = _autoclose(sig, clause)
            if not formula_closed(clause, sig):
                frees = sorted(formula_free_vars(clause))
                raise FragmentViolation(
                    f"clause is not closed (free: {', '.join(frees)}); "
                    "universal quantifiers are required (or use autoclose)"
                )
            typecheck_formula(sig, {}, clause)
            if not is_program_clause(fragment, clause, allow_fix):
                raise FragmentViolation(f"clause is not a valid {fragment} program clause")
            if not guarded_fixes_ok(clause):
                raise FragmentViolation("clause contains an unguarded fix term")
        except (TermError, FormulaError) as e:
            raise ParseError(str(e), tok.line, tok.col) from None
        clauses.append(clause)

    return TheoryDocument(tuple(kinds), sig, fragment, allow_fix, tuple(clauses))


def _check_kind_refs(typ: SimpleType, kinds: list[str], tok: Token) -> None:
    if isinstance(typ, BaseType):
        if typ.name != FORMULA_TYPE.name and typ.name not in kinds:
            raise ParseError(f"unknown kind {typ.name!r}", tok.line, tok.col)
        return
    _check_kind_refs(typ.domain, kinds, tok)
    _check_kind_refs(typ.codomain, kinds, tok)


def print_theory(doc: TheoryDocument) -> str:
    lines = []
    for kind in doc.kinds:
        lines.append(f"kind {kind}.")
    for name, typ in doc.sig.constants.items():
        lines.append(f"const {name} : {print_type(typ)}.")
    fix = " +fix" if doc.allow_fix else ""
    lines.append(f"fragment {doc.fragment.value}{fix}.")
    for clause in doc.clauses:
        lines.append(f"{print_formula(clause)}.")
    return "\n".join(lines) + "\n"


# ---------------------------------------------------------------------------
# Sequents

_ARROWS = ("~>", "-->", "--")


def _parse_marked(cur: _Cursor, sig: Signature) -> MarkedFormula:
    if cur.at_punct("<"):
        cur.next()
        f = formula_of_term(_parse_expr(cur, sig, frozenset()))
        cur.expect_punct(">")
        return MarkedFormula(f, True)
    return MarkedFormula(formula_of_term(_parse_expr(cur, sig, frozenset())), False)


def parse_sequent(text: str, base_sig: Signature) -> Sequent:
    cur = _Cursor(tokenize(text))
    seq = _parse_sequent_at(cur, base_sig)
    tok = cur.peek()
    if tok.kind != EOF:
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return seq


def _parse_sequent_at(cur: _Cursor, base_sig: Signature) -> Sequent:
    sig = base_sig
    if cur.at_punct("["):
        cur.next()
        while not cur.at_punct("]"):
            name = cur.expect_ident()
            cur.expect_punct(":")
            typ = _parse_type(cur)
            try:
                sig = sig.extend(name.text, typ)
            except TermError as e:
                raise ParseError(str(e), name.line, name.col) from None
            if cur.at_punct(","):
                cur.next()
        cur.expect_punct("]")

    entries: list[MarkedFormula] = []
    if not any(cur.at_punct(a) for a in _ARROWS):
        entries.append(_parse_marked(cur, sig))
        while cur.at_punct("|"):
            cur.next()
            entries.append(_parse_marked(cur, sig))

    if cur.at_punct("~>"):
        cur.next()
        goal = formula_of_term(_parse_expr(cur, sig, frozenset()))
        for e in entries:
            if e.guarded:
                raise cur.error("root sequents cannot carry guard marks")
        return RootSeq(sig, tuple(e.formula for e in entries), goal)
    if cur.at_punct("-->"):
        cur.next()
        return MainSeq(sig, tuple(entries), _parse_marked(cur, sig))
    if cur.at_punct("--"):
        cur.next()
        focus = formula_of_term(_parse_expr(cur, sig, frozenset()))
        cur.expect_punct("-->")
        return FocusSeq(sig, tuple(entries), focus, _parse_marked(cur, sig))
    raise cur.error("expected '~>', '-->' or '-- focus -->'")


def _print_marked(m: MarkedFormula) -> str:
    body = print_formula(m.formula)
    return f"<{body}>" if m.guarded else body


def print_sequent(seq: Sequent, base_sig: Signature) -> str:
    extra = [
        (name, typ)
        for name, typ in seq.sig.constants.items()
        if name not in base_sig.constants
    ]
    prefix = ""
    if extra:
        decls = ", ".join(f"{n}:{print_type(t)}" for n, t in extra)
        prefix = f"[{decls}] "
    if isinstance(seq, RootSeq):
        prog = " | ".join(print_formula(c) for c in seq.program)
        return f"{prefix}{prog}{' ' if prog else ''}~> {print_formula(seq.goal)}"
    prog = " | ".join(_print_marked(m) for m in seq.program)
    lead = f"{prefix}{prog}{' ' if prog else ''}"
    if isinstance(seq, MainSeq):
        return f"{lead}--> {_print_marked(seq.goal)}"
    return f"{lead}-- {print_formula(seq.focus)} --> {_print_marked(seq.goal)}"


# ---------------------------------------------------------------------------
# Certificates

_WITNESS_RULES = frozenset({EXISTS_R, FORALL_L, FORALL_L_G})
_EIGEN_RULES = frozenset({FORALL_R, FORALL_R_G})
_DECIDE_RULES = frozenset({DECIDE, DECIDE_G})


def parse_certificate(text: str, base_sig: Signature) -> ProofNode:
    cur = _Cursor(tokenize(text))
    node = _parse_cert_node(cur, base_sig)
    tok = cur.peek()
    if tok.kind != EOF:
        raise ParseError(f"unexpected trailing input {tok.text!r}", tok.line, tok.col)
    return node


def _parse_cert_node(cur: _Cursor, base_sig: Signature) -> ProofNode:
    cur.expect_punct("(")
    label_tok = cur.peek()
    label_parts: list[str] = []
    while not cur.at_punct("{"):
        tok = cur.peek()
        if tok.kind == IDENT or (tok.kind == PUNCT and tok.text in ("-", "<", ">")):
            label_parts.append(cur.next().text)
        else:
            raise ParseError(
                f"expected a rule label, found {tok.text or 'end of input'!r}",
                tok.line, tok.col,
            )
    label = "".join(label_parts)
    if label not in ALL_RULES:
        raise UnknownRuleLabel(f"unknown rule label {label!r}", label_tok.line, label_tok.col)

    cur.expect_punct("{")
    payload_tokens: list[Token] = []
    depth = 1
    while True:
        tok = cur.peek()
        if tok.kind == EOF:
            raise ParseError("unterminated payload", tok.line, tok.col)
        if tok.kind == PUNCT and tok.text == "{":
            depth += 1
        elif tok.kind == PUNCT and tok.text == "}":
            depth -= 1
            if depth == 0:
                cur.next()
                break
        payload_tokens.append(cur.next())

    seq_tok = cur.peek()
    if seq_tok.kind != STRING:
        raise ParseError("expected a quoted sequent", seq_tok.line, seq_tok.col)
    cur.next()
    try:
        conclusion = parse_sequent(seq_tok.text, base_sig)
    except ParseError as e:
        raise ParseError(f"in sequent: {e.message}", seq_tok.line, seq_tok.col) from None

    payload = _interpret_payload(label, payload_tokens, conclusion.sig, seq_tok)

    premises = []
    while cur.at_punct("("):
        premises.append(_parse_cert_node(cur, base_sig))
    cur.expect_punct(")")
    return ProofNode(label, conclusion, tuple(premises), payload)


def _interpret_payload(
    label: str, toks: list[Token], sig: Signature, at: Token
) -> Payload:
    def fail(msg: str) -> ParseError:
        where = toks[0] if toks else at
        return ParseError(msg, where.line, where.col)

    if label in _DECIDE_RULES:
        lemma = False
        idx_toks = toks
        if len(toks) >= 2 and toks[0].kind == IDENT and toks[0].text == "lemma":
            if toks[1].kind != PUNCT or toks[1].text != ":":
                raise fail("expected ':' after 'lemma'")
            lemma = True
            idx_toks = toks[2:]
        if len(idx_toks) != 1 or idx_toks[0].kind != NUMBER:
            raise fail(f"{label} payload must be a program index")
        return DecidePayload(int(idx_toks[0].text), lemma)
    if label in _EIGEN_RULES:
        sub = _Cursor(toks + [Token(EOF, "", at.line, at.col)])
        name = sub.expect_ident()
        sub.expect_punct(":")
        typ = _parse_type(sub)
        if sub.peek().kind != EOF:
            raise fail("trailing tokens in eigenvariable payload")
        return EigenPayload(name.text, typ)
    if label in _WITNESS_RULES:
        sub = _Cursor(toks + [Token(EOF, "", at.line, at.col)])
        term = _parse_expr(sub, sig, frozenset())
        if sub.peek().kind != EOF:
            raise fail("trailing tokens in witness payload")
        return WitnessPayload(term)
    if toks:
        raise fail(f"rule {label} takes no payload")
    return None


def _print_payload(node: ProofNode) -> str:
    p = node.payload
    if p is None:
        return "{}"
    if isinstance(p, DecidePayload):
        return f"{{lemma:{p.index}}}" if p.lemma else f"{{{p.index}}}"
    if isinstance(p, EigenPayload):
        return f"{{{p.name} : {print_type(p.typ)}}}"
    return f"{{{print_term(p.term)}}}"


def print_certificate(node: ProofNode, base_sig: Signature) -> str:
    def render(node: ProofNode, indent: int) -> str:
        pad = "  " * indent
        head = f"{pad}({node.rule} {_print_payload(node)}\n"
        head += f"{pad}  \"{print_sequent(node.conclusion, base_sig)}\""
        if not node.premises:
            return head + ")"
        parts = [render(p, indent + 1) for p in node.premises]
        return head + "\n" + "\n".join(parts) + ")"

    return render(node, 0) + "\n"
