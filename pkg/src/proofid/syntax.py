"""Terms, formulas, contexts, sequents and substitutions.

Binders are locally nameless: bound variables are de Bruijn indices
(`BVar`/`BProp`), free variables carry names (`Var`/`PropVar`).  Alpha
equivalence is therefore plain structural equality; binder name hints are
kept for printing only and excluded from comparison.

Two variable sorts share the lowercase lexical space: identifiers starting
with p, q or r are propositional variables, everything else is an
individual variable.  Predicate and atom names are capitalized.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Iterator, Mapping, Union


class SyntaxError_(Exception):
    """Parse or well-formedness error, with position info when parsing."""


# ---------------------------------------------------------------------------
# Terms


@dataclass(frozen=True)
class Var:
    name: str

    def __repr__(self):
        return f"Var({self.name})"


@dataclass(frozen=True)
class BVar:
    index: int

    def __repr__(self):
        return f"BVar({self.index})"


@dataclass(frozen=True)
class App:
    fn: str
    args: tuple["Term", ...]

    def __repr__(self):
        return f"App({self.fn}, {list(self.args)})"


Term = Union[Var, BVar, App]


def term_free_vars(t: Term) -> frozenset[str]:
    if isinstance(t, Var):
        return frozenset((t.name,))
    if isinstance(t, App):
        out: frozenset[str] = frozenset()
        for a in t.args:
            out |= term_free_vars(a)
        return out
    return frozenset()


def term_subst(t: Term, theta: "Substitution") -> Term:
    if isinstance(t, Var):
        return theta.get(t.name)
    if isinstance(t, App):
        return App(t.fn, tuple(term_subst(a, theta) for a in t.args))
    return t


def term_replace(t: Term, old: Term, new: Term) -> Term:
    """Replace every occurrence of the subterm `old` by `new`."""
    if t == old:
        return new
    if isinstance(t, App):
        return App(t.fn, tuple(term_replace(a, old, new) for a in t.args))
    return t


def term_open(t: Term, k: int, u: Term) -> Term:
    if isinstance(t, BVar):
        return u if t.index == k else t
    if isinstance(t, App):
        return App(t.fn, tuple(term_open(a, k, u) for a in t.args))
    return t


def term_close(t: Term, name: str, k: int) -> Term:
    if isinstance(t, Var) and t.name == name:
        return BVar(k)
    if isinstance(t, App):
        return App(t.fn, tuple(term_close(a, name, k) for a in t.args))
    return t


def term_size(t: Term) -> int:
    if isinstance(t, App):
        return 1 + sum(term_size(a) for a in t.args)
    return 1


# ---------------------------------------------------------------------------
# Formulas


@dataclass(frozen=True)
class Atom:
    pred: str
    args: tuple[Term, ...] = ()


@dataclass(frozen=True)
class Eq:
    lhs: Term
    rhs: Term


@dataclass(frozen=True)
class TrueF:
    pass


@dataclass(frozen=True)
class PropVar:
    name: str


@dataclass(frozen=True)
class BProp:
    index: int


@dataclass(frozen=True)
class And:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Or:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class Imp:
    left: "Formula"
    right: "Formula"


@dataclass(frozen=True)
class ForallI:
    body: "Formula"
    hint: str = field(default="x", compare=False)


@dataclass(frozen=True)
class ExistsI:
    body: "Formula"
    hint: str = field(default="x", compare=False)


@dataclass(frozen=True)
class ForallP:
    body: "Formula"
    hint: str = field(default="p", compare=False)


@dataclass(frozen=True)
class ExistsP:
    body: "Formula"
    hint: str = field(default="p", compare=False)


Formula = Union[
    Atom, Eq, TrueF, PropVar, BProp, And, Or, Imp, ForallI, ExistsI, ForallP, ExistsP
]

_BINARY = (And, Or, Imp)
_IND_BINDERS = (ForallI, ExistsI)
_PROP_BINDERS = (ForallP, ExistsP)
_BINDERS = _IND_BINDERS + _PROP_BINDERS


def is_prop_name(name: str) -> bool:
    return name[0] in "pqr"


def formula_map_terms(a: Formula, f) -> Formula:
    """Rebuild `a` applying `f` to every term leaf position."""
    if isinstance(a, Atom):
        return Atom(a.pred, tuple(f(t) for t in a.args))
    if isinstance(a, Eq):
        return Eq(f(a.lhs), f(a.rhs))
    if isinstance(a, _BINARY):
        return type(a)(formula_map_terms(a.left, f), formula_map_terms(a.right, f))
    if isinstance(a, _BINDERS):
        return type(a)(formula_map_terms(a.body, f), a.hint)
    return a


def free_ind_vars(a: Formula) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    if isinstance(a, Atom):
        for t in a.args:
            out |= term_free_vars(t)
    elif isinstance(a, Eq):
        out = term_free_vars(a.lhs) | term_free_vars(a.rhs)
    elif isinstance(a, _BINARY):
        out = free_ind_vars(a.left) | free_ind_vars(a.right)
    elif isinstance(a, _BINDERS):
        out = free_ind_vars(a.body)
    return out


def free_prop_vars(a: Formula) -> frozenset[str]:
    if isinstance(a, PropVar):
        return frozenset((a.name,))
    if isinstance(a, _BINARY):
        return free_prop_vars(a.left) | free_prop_vars(a.right)
    if isinstance(a, _BINDERS):
        return free_prop_vars(a.body)
    return frozenset()


def open_ind(a: Formula, t: Term, k: int = 0) -> Formula:
    """Instantiate bound individual index `k` with `t`."""
    if isinstance(a, (Atom, Eq)):
        return formula_map_terms(a, lambda u: term_open(u, k, t))
    if isinstance(a, _BINARY):
        return type(a)(open_ind(a.left, t, k), open_ind(a.right, t, k))
    if isinstance(a, _IND_BINDERS):
        return type(a)(open_ind(a.body, t, k + 1), a.hint)
    if isinstance(a, _PROP_BINDERS):
        return type(a)(open_ind(a.body, t, k), a.hint)
    return a


def close_ind(a: Formula, name: str, k: int = 0) -> Formula:
    if isinstance(a, (Atom, Eq)):
        return formula_map_terms(a, lambda u: term_close(u, name, k))
    if isinstance(a, _BINARY):
        return type(a)(close_ind(a.left, name, k), close_ind(a.right, name, k))
    if isinstance(a, _IND_BINDERS):
        return type(a)(close_ind(a.body, name, k + 1), a.hint)
    if isinstance(a, _PROP_BINDERS):
        return type(a)(close_ind(a.body, name, k), a.hint)
    return a


def open_prop(a: Formula, c: Formula, k: int = 0) -> Formula:
    if isinstance(a, BProp):
        return c if a.index == k else a
    if isinstance(a, _BINARY):
        return type(a)(open_prop(a.left, c, k), open_prop(a.right, c, k))
    if isinstance(a, _IND_BINDERS):
        return type(a)(open_prop(a.body, c, k), a.hint)
    if isinstance(a, _PROP_BINDERS):
        return type(a)(open_prop(a.body, c, k + 1), a.hint)
    return a


def close_prop(a: Formula, name: str, k: int = 0) -> Formula:
    if isinstance(a, PropVar) and a.name == name:
        return BProp(k)
    if isinstance(a, _BINARY):
        return type(a)(close_prop(a.left, name, k), close_prop(a.right, name, k))
    if isinstance(a, _IND_BINDERS):
        return type(a)(close_prop(a.body, name, k), a.hint)
    if isinstance(a, _PROP_BINDERS):
        return type(a)(close_prop(a.body, name, k + 1), a.hint)
    return a


def forall_ind(name: str, body: Formula) -> Formula:
    return ForallI(close_ind(body, name), name)


def exists_ind(name: str, body: Formula) -> Formula:
    return ExistsI(close_ind(body, name), name)


def forall_prop(name: str, body: Formula) -> Formula:
    return ForallP(close_prop(body, name), name)


def exists_prop(name: str, body: Formula) -> Formula:
    return ExistsP(close_prop(body, name), name)


def fresh_name(base: str, avoid: Iterable[str]) -> str:
    avoid = set(avoid)
    if base not in avoid:
        return base
    i = 0
    while f"{base}{i}" in avoid:
        i += 1
    return f"{base}{i}"


def formula_size(a: Formula) -> int:
    if isinstance(a, _BINARY):
        return 1 + formula_size(a.left) + formula_size(a.right)
    if isinstance(a, _BINDERS):
        return 1 + formula_size(a.body)
    return 1


def subformulas(a: Formula) -> set[Formula]:
    """All subformulas, opening binders with their hint names.

    Quantified bodies contribute their named opening, which is the usual
    convention for the subformula property ("A[x:=e] for some term").
    Structural comparison against this set ignores witness terms, so the
    scanner treats any instantiation of the body as matching via
    `is_subformula_of`.
    """
    out = {a}
    if isinstance(a, _BINARY):
        out |= subformulas(a.left) | subformulas(a.right)
    elif isinstance(a, _IND_BINDERS):
        out |= subformulas(open_ind(a.body, Var(a.hint)))
    elif isinstance(a, _PROP_BINDERS):
        out |= subformulas(open_prop(a.body, PropVar(a.hint)))
    return out


# ---------------------------------------------------------------------------
# Logic tiers

TIER_PROP = 0
TIER_FO = 1
TIER_SO = 2


def tier(a: Formula) -> int:
    """Smallest logic tier the formula lives in."""
    if isinstance(a, Atom):
        return TIER_FO if a.args else TIER_PROP
    if isinstance(a, (Eq, ForallI, ExistsI)):
        base = tier(a.body) if isinstance(a, _IND_BINDERS) else TIER_FO
        return max(TIER_FO, base)
    if isinstance(a, (PropVar, BProp, ForallP, ExistsP)):
        base = tier(a.body) if isinstance(a, _PROP_BINDERS) else TIER_SO
        return max(TIER_SO, base)
    if isinstance(a, _BINARY):
        return max(tier(a.left), tier(a.right))
    return TIER_PROP


# ---------------------------------------------------------------------------
# Substitutions (individual variables -> terms)


@dataclass(frozen=True)
class Substitution:
    """Finite-support map from individual variable names to terms."""

    pairs: tuple[tuple[str, Term], ...]

    @staticmethod
    def of(mapping: Mapping[str, Term]) -> "Substitution":
        return Substitution(tuple(sorted(mapping.items())))

    @staticmethod
    def identity(support: Iterable[str]) -> "Substitution":
        return Substitution.of({x: Var(x) for x in support})

    @property
    def support(self) -> frozenset[str]:
        return frozenset(x for x, _ in self.pairs)

    def as_dict(self) -> dict[str, Term]:
        return dict(self.pairs)

    def get(self, name: str) -> Term:
        for x, t in self.pairs:
            if x == name:
                return t
        return Var(name)

    def is_identity(self) -> bool:
        return all(t == Var(x) for x, t in self.pairs)

    def __iter__(self) -> Iterator[tuple[str, Term]]:
        return iter(self.pairs)


def subst_formula(a: Formula, theta: Substitution) -> Formula:
    """Apply `theta` to every free individual variable of `a`.

    Bound variables are indices, so capture cannot occur.
    """
    return formula_map_terms(a, lambda t: term_subst(t, theta))


def subst_prop(a: Formula, p: str, c: Formula) -> Formula:
    """Capture-free replacement of the free propositional variable `p` by `c`."""
    if isinstance(a, PropVar):
        return c if a.name == p else a
    if isinstance(a, _BINARY):
        return type(a)(subst_prop(a.left, p, c), subst_prop(a.right, p, c))
    if isinstance(a, _BINDERS):
        return type(a)(subst_prop(a.body, p, c), a.hint)
    return a


def compose_subst(lam: Substitution, theta: Substitution) -> Substitution:
    """The substitution lam*theta with t(lam*theta) = (t lam) theta."""
    out: dict[str, Term] = {}
    for x, t in lam:
        out[x] = term_subst(t, theta)
    for x, t in theta:
        if x not in out:
            out[x] = t
    return Substitution.of(out)


def gamma_theta(theta: Substitution) -> frozenset[Formula]:
    """The equation set {x = theta(x) | x in supp(theta)} characterizing theta."""
    return frozenset(Eq(Var(x), t) for x, t in theta)


def subst_from_gamma(eqs: Iterable[Formula]) -> Substitution:
    """Inverse of gamma_theta; raises if some element is not Eq(Var, t)."""
    out: dict[str, Term] = {}
    for e in eqs:
        if not (isinstance(e, Eq) and isinstance(e.lhs, Var)):
            raise ValueError(f"not a substitution equation: {e!r}")
        out[e.lhs.name] = e.rhs
    return Substitution.of(out)


def positive_occurrences_only(a: Formula, p: str, positive: bool = True) -> bool:
    """True iff every free occurrence of `p` in `a` sits in positive position.

    Polarity flips on the left of an implication; quantifiers are transparent.
    """
    if isinstance(a, PropVar):
        return positive or a.name != p
    if isinstance(a, Imp):
        return positive_occurrences_only(
            a.left, p, not positive
        ) and positive_occurrences_only(a.right, p, positive)
    if isinstance(a, (And, Or)):
        return positive_occurrences_only(a.left, p, positive) and positive_occurrences_only(
            a.right, p, positive
        )
    if isinstance(a, _BINDERS):
        return positive_occurrences_only(a.body, p, positive)
    return True


# ---------------------------------------------------------------------------
# Contexts and sequents


Context = tuple[Formula, ...]


@dataclass(frozen=True)
class Sequent:
    ante: Context
    succ: Formula

    def __repr__(self):
        return f"Sequent({print_sequent(self)!r})"


def sequent_free_ind_vars(s: Sequent) -> frozenset[str]:
    out = free_ind_vars(s.succ)
    for a in s.ante:
        out |= free_ind_vars(a)
    return out


def sequent_free_prop_vars(s: Sequent) -> frozenset[str]:
    out = free_prop_vars(s.succ)
    for a in s.ante:
        out |= free_prop_vars(a)
    return out


# ---------------------------------------------------------------------------
# Signature


class Signature:
    """Session signature fixing predicate and function arities.

    The first use of a symbol fixes its arity; later uses must agree.
    """

    def __init__(self, preds: Mapping[str, int] | None = None, fns: Mapping[str, int] | None = None):
        self.preds: dict[str, int] = dict(preds or {})
        self.fns: dict[str, int] = dict(fns or {})

    def check_pred(self, name: str, arity: int) -> None:
        known = self.preds.setdefault(name, arity)
        if known != arity:
            raise SyntaxError_(
                f"arity mismatch for predicate {name}: saw {arity}, signature says {known}"
            )

    def check_fn(self, name: str, arity: int) -> None:
        known = self.fns.setdefault(name, arity)
        if known != arity:
            raise SyntaxError_(
                f"arity mismatch for function {name}: saw {arity}, signature says {known}"
            )


# ---------------------------------------------------------------------------
# Parser
#
# Grammar (UTF-8 text):
#   formula  := binder | '(' formula op formula ')' | '(' term '=' term ')' | atom
#   binder   := ('forall' | 'exists') ident '.' formula
#   atom     := 'True' | UPPER ident [ '(' term {',' term} ')' ] | lower ident
#   term     := lower ident [ '(' term {',' term} ')' ]
#   op       := '/\' | '\/' | '->'
#   sequent  := [ formula {',' formula} ] '|-' formula
# Parentheses are mandatory around binary connectives and equations.


class _Tok:
    def __init__(self, kind: str, text: str, line: int, col: int):
        self.kind, self.text, self.line, self.col = kind, text, line, col

    def __repr__(self):
        return f"{self.kind}:{self.text}@{self.line}:{self.col}"


_PUNCT = {
    "/\\": "AND",
    "\\/": "OR",
    "->": "IMP",
    "|-": "TURNSTILE",
    "(": "LP",
    ")": "RP",
    ",": "COMMA",
    ".": "DOT",
    "=": "EQ",
}


def _lex(src: str) -> list[_Tok]:
    toks: list[_Tok] = []
    i, line, col = 0, 1, 1
    n = len(src)
    while i < n:
        c = src[i]
        if c == "\n":
            i, line, col = i + 1, line + 1, 1
            continue
        if c.isspace():
            i, col = i + 1, col + 1
            continue
        two = src[i : i + 2]
        if two in _PUNCT:
            toks.append(_Tok(_PUNCT[two], two, line, col))
            i, col = i + 2, col + 2
            continue
        if c in _PUNCT:
            toks.append(_Tok(_PUNCT[c], c, line, col))
            i, col = i + 1, col + 1
            continue
        if c.isalpha() or c == "_":
            j = i
            while j < n and (src[j].isalnum() or src[j] == "_" or src[j] == "'"):
                j += 1
            toks.append(_Tok("IDENT", src[i:j], line, col))
            col += j - i
            i = j
            continue
        raise SyntaxError_(f"unexpected character {c!r} at line {line}, column {col}")
    toks.append(_Tok("EOF", "", line, col))
    return toks


class _Parser:
    def __init__(self, src: str, sig: Signature | None):
        self.toks = _lex(src)
        self.pos = 0
        self.sig = sig or Signature()

    def peek(self) -> _Tok:
        return self.toks[self.pos]

    def next(self) -> _Tok:
        t = self.toks[self.pos]
        self.pos += 1
        return t

    def expect(self, kind: str) -> _Tok:
        t = self.next()
        if t.kind != kind:
            raise SyntaxError_(
                f"expected {kind}, found {t.text or 'end of input'!r} at line {t.line}, column {t.col}"
            )
        return t

    def fail(self, msg: str) -> None:
        t = self.peek()
        raise SyntaxError_(f"{msg} at line {t.line}, column {t.col}")

    # terms ----------------------------------------------------------------

    def term(self) -> Term:
        t = self.expect("IDENT")
        if not t.text[0].islower():
            raise SyntaxError_(
                f"term expected (lowercase), found {t.text!r} at line {t.line}, column {t.col}"
            )
        if self.peek().kind == "LP":
            self.next()
            args: list[Term] = []
            if self.peek().kind != "RP":
                args.append(self.term())
                while self.peek().kind == "COMMA":
                    self.next()
                    args.append(self.term())
            self.expect("RP")
            self.sig.check_fn(t.text, len(args))
            return App(t.text, tuple(args))
        if t.text in self.sig.fns and self.sig.fns[t.text] == 0:
            return App(t.text, ())
        return Var(t.text)

    # formulas --------------------------------------------------------------

    def formula(self) -> Formula:
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text in ("forall", "exists"):
            self.next()
            v = self.expect("IDENT")
            self.expect("DOT")
            body = self.formula()
            if is_prop_name(v.text):
                return (forall_prop if tok.text == "forall" else exists_prop)(v.text, body)
            return (forall_ind if tok.text == "forall" else exists_ind)(v.text, body)
        if tok.kind == "LP":
            return self.parens()
        if tok.kind == "IDENT":
            return self.atom()
        self.fail("formula expected")
        raise AssertionError

    def parens(self) -> Formula:
        self.expect("LP")
        # an equation starts with a term (lowercase head)
        tok = self.peek()
        if tok.kind == "IDENT" and tok.text[0].islower() and tok.text not in ("forall", "exists"):
            lhs = self.term()
            self.expect("EQ")
            rhs = self.term()
            self.expect("RP")
            return Eq(lhs, rhs)
        left = self.formula()
        op = self.next()
        if op.kind not in ("AND", "OR", "IMP"):
            raise SyntaxError_(
                f"connective expected, found {op.text!r} at line {op.line}, column {op.col}"
            )
        right = self.formula()
        self.expect("RP")
        return {"AND": And, "OR": Or, "IMP": Imp}[op.kind](left, right)

    def atom(self) -> Formula:
        t = self.expect("IDENT")
        if t.text == "True":
            return TrueF()
        if t.text[0].isupper():
            if self.peek().kind == "LP":
                self.next()
                args = [self.term()]
                while self.peek().kind == "COMMA":
                    self.next()
                    args.append(self.term())
                self.expect("RP")
                self.sig.check_pred(t.text, len(args))
                return Atom(t.text, tuple(args))
            self.sig.check_pred(t.text, 0)
            return Atom(t.text)
        if is_prop_name(t.text):
            return PropVar(t.text)
        raise SyntaxError_(
            f"propositional variables start with p, q or r; found {t.text!r} "
            f"at line {t.line}, column {t.col}"
        )

    def sequent(self) -> Sequent:
        ante: list[Formula] = []
        if self.peek().kind != "TURNSTILE":
            ante.append(self.formula())
            while self.peek().kind == "COMMA":
                self.next()
                ante.append(self.formula())
        self.expect("TURNSTILE")
        succ = self.formula()
        return Sequent(tuple(ante), succ)


def parse_term(src: str, sig: Signature | None = None) -> Term:
    p = _Parser(src, sig)
    t = p.term()
    p.expect("EOF")
    return t


def parse_formula(src: str, sig: Signature | None = None) -> Formula:
    p = _Parser(src, sig)
    a = p.formula()
    p.expect("EOF")
    return a


def parse_sequent(src: str, sig: Signature | None = None) -> Sequent:
    p = _Parser(src, sig)
    s = p.sequent()
    p.expect("EOF")
    return s


# ---------------------------------------------------------------------------
# Printing (inverse of the parser on all values)


def print_term(t: Term) -> str:
    if isinstance(t, Var):
        return t.name
    if isinstance(t, BVar):
        return f"_b{t.index}"  # only reachable on dangling indices
    return f"{t.fn}({', '.join(print_term(a) for a in t.args)})"


def print_formula(a: Formula, depth: int = 0, hints: tuple[str, ...] = ()) -> str:
    if isinstance(a, Atom):
        if not a.args:
            return a.pred
        return f"{a.pred}({', '.join(print_term(t) for t in a.args)})"
    if isinstance(a, Eq):
        return f"({print_term(a.lhs)} = {print_term(a.rhs)})"
    if isinstance(a, TrueF):
        return "True"
    if isinstance(a, PropVar):
        return a.name
    if isinstance(a, BProp):
        return f"_q{a.index}"
    if isinstance(a, _BINARY):
        op = {And: "/\\", Or: "\\/", Imp: "->"}[type(a)]
        return f"({print_formula(a.left)} {op} {print_formula(a.right)})"
    if isinstance(a, _BINDERS):
        kw = "forall" if isinstance(a, (ForallI, ForallP)) else "exists"
        taken = free_ind_vars(a) | free_prop_vars(a)
        want_prop = isinstance(a, _PROP_BINDERS)
        hint = a.hint if is_prop_name(a.hint) == want_prop else ("p" if want_prop else "x")
        name = fresh_name(hint, taken)
        if isinstance(a, _IND_BINDERS):
            body = open_ind(a.body, Var(name))
        else:
            body = open_prop(a.body, PropVar(name))
        return f"{kw} {name}. {print_formula(body)}"
    raise TypeError(f"not a formula: {a!r}")


def print_sequent(s: Sequent) -> str:
    left = ", ".join(print_formula(a) for a in s.ante)
    return f"{left} |- {print_formula(s.succ)}" if left else f"|- {print_formula(s.succ)}"
