"""The categorical layer: context functors, hole functors, positive-formula
functors, the category of terms, and the equational transport derivation.

Arrows of the formula category in natural deduction form are derivations
with one designated open assumption (the source); composing is replacing
that assumption.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

from .derivation import (
    CheckError,
    Derivation,
    all_labels,
    assume,
    contract_block,
    nd,
    nd_hole,
    open_assumptions,
    sc,
    sc_hole,
    subst_assumption,
)
from .rules import M, SchemaError
from .syntax import (
    And,
    App,
    Context,
    Eq,
    ExistsI,
    ExistsP,
    ForallI,
    ForallP,
    Formula,
    Imp,
    Or,
    PropVar,
    Sequent,
    Substitution,
    Term,
    Var,
    free_ind_vars,
    free_prop_vars,
    fresh_name,
    gamma_theta,
    open_ind,
    open_prop,
    close_ind,
    positive_occurrences_only,
    subst_formula,
    subst_prop,
    term_subst,
    term_free_vars,
    term_replace,
)


@dataclass(frozen=True)
class FunctorSpec:
    """Description of one of the workbench's functors."""

    kind: str
    variance: str
    formula: Formula | None = None
    ctx: Context = ()
    var: str | None = None

    def __post_init__(self):
        if self.kind == "so-formula" and not positive_occurrences_only(self.formula, self.var):
            raise SchemaError("so-formula functor needs only positive occurrences")


@dataclass(frozen=True)
class NDArrow:
    """A natural-deduction arrow: derivation with a designated assumption."""

    label: str
    deriv: Derivation

    @property
    def src(self) -> Formula:
        opens = dict(open_assumptions(self.deriv))
        if self.label not in opens:
            raise CheckError(f"designated assumption {self.label} is not open")
        return opens[self.label]

    @property
    def tgt(self) -> Formula:
        return self.deriv.concl

    def relabel(self, new: str) -> "NDArrow":
        if new == self.label:
            return self
        src = self.src
        return NDArrow(new, subst_assumption(self.deriv, self.label, assume(new, src)))

    def compose(self, inner: "NDArrow") -> "NDArrow":
        """Feed `inner`'s conclusion into this arrow's designated assumption."""
        if inner.tgt != self.src:
            raise SchemaError("NDArrow.compose: source/target mismatch")
        return NDArrow(inner.label, subst_assumption(self.deriv, self.label, inner.deriv))


def identity_arrow(a: Formula, label: str = "src") -> NDArrow:
    return NDArrow(label, assume(label, a))


@dataclass(frozen=True)
class TermArrow:
    source: Term
    target: Term
    theta: Substitution

    def __post_init__(self):
        if term_subst(self.source, self.theta) != self.target:
            raise SchemaError("term arrow: target is not source under theta")


def term_arrow(t: Term, theta: Substitution) -> TermArrow:
    return TermArrow(t, term_subst(t, theta), theta)


# ---------------------------------------------------------------------------
# Context functors (sequent calculus)


def phi_on_arrows(a: Formula, pis: list[Derivation], hole_id: str = "phi") -> Derivation:
    """Transport of the schematic sequent Gamma |- a along an arrow list.

    pis is an arrow E |- F of the context category (componentwise
    derivations of E |- F_i); the result proves E |- a from the dashed
    axiom F |- a, witnessing contravariance.
    """
    if not pis:
        return sc_hole(hole_id, Sequent((), a))
    src = pis[0].concl.ante
    tgt = tuple(p.concl.succ for p in pis)
    for p in pis:
        if p.concl.ante != src:
            raise SchemaError("phi_on_arrows: arrow components disagree on the source")
    d = sc_hole(hole_id, Sequent(tgt, a))
    n = len(pis)
    for i in range(n - 1, -1, -1):
        d = sc("cut", M(pos=i), [pis[i], d])
    for _ in range(n - 1):
        d = contract_block(d, 0, len(src))
    return d


def phi_conj_on_arrows(
    dctx: Context, conj: Formula, pis: list[Derivation], hole_id: str = "phi"
) -> Derivation:
    """Like phi_on_arrows with a fixed left block dctx (conclusion dctx, E |- conj)."""
    if not pis:
        return sc_hole(hole_id, Sequent(dctx, conj))
    src = pis[0].concl.ante
    tgt = tuple(p.concl.succ for p in pis)
    d = sc_hole(hole_id, Sequent(dctx + tgt, conj))
    k = len(dctx)
    n = len(pis)
    for i in range(n - 1, -1, -1):
        d = sc("cut", M(pos=k + i), [pis[i], d])
    for _ in range(n - 1):
        d = contract_block(d, k, len(src))
    return d


def rule_component_and(
    dctx: Context, ectx: Context, a: Formula, b: Formula, holes: tuple[str, str] = ("l", "r")
) -> Derivation:
    """The conjunction right rule over two dashed axioms."""
    return sc(
        "andR",
        M(),
        [sc_hole(holes[0], Sequent(dctx, a)), sc_hole(holes[1], Sequent(ectx, b))],
    )


def rule_component_orL(
    dctx: Context, a: Formula, b: Formula, c: Formula, holes: tuple[str, str] = ("l", "r")
) -> Derivation:
    """The disjunction left rule over two dashed axioms."""
    return sc(
        "orL",
        M(pos=len(dctx)),
        [
            sc_hole(holes[0], Sequent(dctx + (a,), c)),
            sc_hole(holes[1], Sequent(dctx + (b,), c)),
        ],
    )


# ---------------------------------------------------------------------------
# Natural deduction hole functors for the disjunction square


@dataclass(frozen=True)
class HoleFunctors:
    const: FunctorSpec
    psi_a: FunctorSpec
    psi_b: FunctorSpec
    ident: FunctorSpec
    disj: Formula

    def const_map(self, lam: NDArrow, label: str = "maj") -> Derivation:
        return assume(label, self.disj)

    def psi_map(self, side: str, lam: NDArrow, hole_id: str = "psi") -> Derivation:
        a = self.disj.left if side == "a" else self.disj.right
        hole = nd_hole(hole_id, {f"{hole_id}_src": a}, lam.src)
        return subst_assumption(lam.deriv, lam.label, hole)

    def ident_map(self, lam: NDArrow, hole_id: str = "id") -> Derivation:
        hole = nd_hole(hole_id, {}, lam.src)
        return subst_assumption(lam.deriv, lam.label, hole)


def nd_hole_functors(dctx: Context, disj: Formula) -> HoleFunctors:
    if not isinstance(disj, Or):
        raise SchemaError("nd_hole_functors expects a disjunction")
    return HoleFunctors(
        const=FunctorSpec("nd-const", "covariant", disj, dctx),
        psi_a=FunctorSpec("nd-psi", "covariant", disj.left, dctx),
        psi_b=FunctorSpec("nd-psi", "covariant", disj.right, dctx),
        ident=FunctorSpec("nd-ident", "covariant", None, dctx),
        disj=disj,
    )


# ---------------------------------------------------------------------------
# Positive second-order formula functors


class _Names:
    def __init__(self, taken):
        self.taken = set(taken)

    def fresh(self, base):
        n = fresh_name(base, self.taken)
        self.taken.add(n)
        return n


def _arrow_names(sigma: NDArrow, *formulas: Formula):
    taken = set(all_labels(sigma.deriv))
    for _, node in sigma.deriv.nodes():
        taken |= free_ind_vars(node.concl) | free_prop_vars(node.concl)
    for f in formulas:
        taken |= free_ind_vars(f) | free_prop_vars(f)
    return _Names(taken)


def so_formula_on_arrow(a: Formula, p: str, sigma: NDArrow, label: str = "in") -> NDArrow:
    """Transport a[p:=E] |- a[p:=F] along sigma: E |- F.

    Structural recursion over the positive positions of p.  The clauses
    for conjunction, disjunction and the quantifiers extend the three base
    cases compositionally; the second-order existential uses the evident
    unpack/repack wrapper.
    """
    if not positive_occurrences_only(a, p):
        raise SchemaError("so_formula_on_arrow: only positive occurrences supported")
    names = _arrow_names(sigma, a)
    if label in names.taken:
        label = names.fresh(label)
    else:
        names.taken.add(label)
    e, f = sigma.src, sigma.tgt
    return NDArrow(label, _transport(a, p, sigma, assume(label, subst_prop(a, p, e)), names))


def _transport(a: Formula, p: str, sigma: NDArrow, src: Derivation, names: _Names) -> Derivation:
    """Derivation of a[p:=F] from the derivation `src` of a[p:=E]."""
    if p not in free_prop_vars(a):
        return src
    if a == PropVar(p):
        fresh = names.fresh("cur")
        arrow = sigma.relabel(fresh)
        return subst_assumption(arrow.deriv, fresh, src)
    e, f = sigma.src, sigma.tgt
    if isinstance(a, And):
        return nd(
            "andI",
            M(),
            [
                _transport(a.left, p, sigma, nd("andE1", M(), [src]), names),
                _transport(a.right, p, sigma, nd("andE2", M(), [src]), names),
            ],
        )
    if isinstance(a, Or):
        r1, r2 = names.fresh("l"), names.fresh("r")
        left = nd(
            "orI1",
            M(formula=subst_prop(a.right, p, f)),
            [_transport(a.left, p, sigma, assume(r1, subst_prop(a.left, p, e)), names)],
        )
        right = nd(
            "orI2",
            M(formula=subst_prop(a.left, p, f)),
            [_transport(a.right, p, sigma, assume(r2, subst_prop(a.right, p, e)), names)],
        )
        return nd("orE", M(p=r1, q=r2), [src, left, right])
    if isinstance(a, Imp):
        r = names.fresh("arg")
        body = _transport(
            a.right, p, sigma, nd("impE", M(), [src, assume(r, a.left)]), names
        )
        return nd("impI", M(label=r, formula=a.left), [body])
    if isinstance(a, ForallI):
        ev = names.fresh(a.hint if a.hint else "x")
        inst = nd("allE", M(term=Var(ev)), [src])
        body = _transport(open_ind(a.body, Var(ev)), p, sigma, inst, names)
        return nd("allI", M(eigen=ev), [body])
    if isinstance(a, ExistsI):
        ev = names.fresh(a.hint if a.hint else "x")
        s = names.fresh("open")
        opened = open_ind(a.body, Var(ev))
        inner = _transport(opened, p, sigma, assume(s, subst_prop(opened, p, e)), names)
        tgt = subst_prop(a, p, f)
        packed = nd("exI", M(term=Var(ev), formula=tgt), [inner])
        return nd("exE", M(s=s, eigen=ev), [src, packed])
    if isinstance(a, ForallP):
        q = names.fresh(a.hint if a.hint else "q")
        inst = nd("allpE", M(inst=PropVar(q)), [src])
        body = _transport(open_prop(a.body, PropVar(q)), p, sigma, inst, names)
        return nd("allpI", M(eigen=q), [body])
    if isinstance(a, ExistsP):
        q = names.fresh(a.hint if a.hint else "q")
        s = names.fresh("open")
        opened = open_prop(a.body, PropVar(q))
        inner = _transport(opened, p, sigma, assume(s, subst_prop(opened, p, e)), names)
        tgt = subst_prop(a, p, f)
        packed = nd("expI", M(inst=PropVar(q), formula=tgt), [inner])
        return nd("expE", M(s=s, eigen=q), [src, packed])
    raise SchemaError(f"so_formula_on_arrow: unsupported shape {a!r}")


# ---------------------------------------------------------------------------
# First-order transport: the equational rewriting chain


@dataclass(frozen=True)
class EqTransport:
    equations: frozenset[Formula]
    arrow: NDArrow

    @property
    def deriv(self) -> Derivation:
        return self.arrow.deriv


def eq_label(var: str) -> str:
    return f"eq_{var}"


def pi_P_theta(p_formula: Formula, x: str, theta: Substitution, t: Term, label: str = "in") -> EqTransport:
    """The transport P[x:=t] |- P[x:=t theta] under the equations of theta.

    One equality elimination per support variable, in lexicographic order;
    each step rewrites exactly the occurrences of that variable coming
    from t, so the chain lands on the simultaneous instance.
    """
    pt = subst_formula(p_formula, Substitution.of({x: t}))
    d = assume(label, pt)
    taken = (
        free_ind_vars(p_formula)
        | term_free_vars(t)
        | theta.support
        | {v for _, u in theta for v in term_free_vars(u)}
    )
    done: dict[str, Term] = {}
    for v, image in theta:
        y = fresh_name("yhole", taken)
        t_mid = term_subst(term_replace(t, Var(v), Var(y)), Substitution.of(done))
        pat_open = subst_formula(p_formula, Substitution.of({x: t_mid}))
        pattern = close_ind(pat_open, y)
        done[v] = image
        if not pattern_has_hole(pattern):
            continue
        eq_prem = assume(eq_label(v), Eq(Var(v), image))
        d = nd("eqE", M(pattern=pattern), [eq_prem, d])
    return EqTransport(gamma_theta(theta), NDArrow(label, d))


def pattern_has_hole(pattern: Formula, k: int = 0) -> bool:
    """True when the rewriting pattern actually mentions its hole index."""
    from .syntax import Atom, BVar

    def in_term(u, k) -> bool:
        if isinstance(u, BVar):
            return u.index == k
        if isinstance(u, App):
            return any(in_term(a, k) for a in u.args)
        return False

    if isinstance(pattern, Atom):
        return any(in_term(u, k) for u in pattern.args)
    if isinstance(pattern, Eq):
        return in_term(pattern.lhs, k) or in_term(pattern.rhs, k)
    if isinstance(pattern, (And, Or, Imp)):
        return pattern_has_hole(pattern.left, k) or pattern_has_hole(pattern.right, k)
    if isinstance(pattern, (ForallI, ExistsI)):
        return pattern_has_hole(pattern.body, k + 1)
    if isinstance(pattern, (ForallP, ExistsP)):
        return pattern_has_hole(pattern.body, k)
    return False


# ---------------------------------------------------------------------------
# Enumeration oracle for the term category laws


def enumerate_terms(vars_: list[str], fns: list[tuple[str, int]], depth: int, cap: int = 4000):
    """Terms over the given symbols up to the given depth (bounded count)."""
    out: list[Term] = [Var(v) for v in vars_]
    level = list(out)
    for _ in range(depth - 1):
        new: list[Term] = []
        for fn, arity in fns:
            for combo in itertools.product(level, repeat=arity):
                new.append(App(fn, tuple(combo)))
                if len(out) + len(new) >= cap:
                    return out + new
        out.extend(new)
        level = level + new
    return out
