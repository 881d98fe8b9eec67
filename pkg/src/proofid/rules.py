"""Rule schemas for the sequent calculus and natural deduction.

Every rule application is positional: structural and left rules carry the
antecedent positions they act on in their meta, so derivations are fully
deterministic data and exchange is never silent.

Sequent-calculus conventions (antecedents are ordered lists):

  cut(i):      from  G |- phi   and  D1, phi@i, D2 |- C
               infer D1, G, D2 |- C                      (replace in place)
  impL(i):     from  D1, B@i, D2 |- C   and  G |- A
               infer D1, (A->B)@i, G, D2 |- C
  w(i, F):     insert F at position i
  c(i, j):     premise has equal formulas at i < j, drop j
  e(i):        swap positions i and i+1

Natural-deduction nodes carry their conclusion formula; open assumptions
are recovered from assume/hole leaves minus discharged labels.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any

from .syntax import (
    And,
    Atom,
    Context,
    Eq,
    ExistsI,
    ExistsP,
    ForallI,
    ForallP,
    Formula,
    Imp,
    Or,
    Sequent,
    Term,
    TrueF,
    close_ind,
    close_prop,
    free_ind_vars,
    free_prop_vars,
    open_ind,
    open_prop,
    Var,
    PropVar,
)


class SchemaError(Exception):
    """A rule application that does not fit its schema."""


@dataclass(frozen=True)
class Meta:
    """Small immutable record of rule-specific fields."""

    items: tuple[tuple[str, Any], ...] = ()

    def __getattr__(self, key):
        for k, v in object.__getattribute__(self, "items"):
            if k == key:
                return v
        raise AttributeError(key)

    def get(self, key, default=None):
        for k, v in self.items:
            if k == key:
                return v
        return default

    def replace(self, **kw) -> "Meta":
        d = dict(self.items)
        d.update(kw)
        return Meta(tuple(sorted(d.items())))

    def keys(self):
        return [k for k, _ in self.items]


def M(**kw) -> Meta:
    return Meta(tuple(sorted(kw.items())))


# ---------------------------------------------------------------------------
# Rule tables

SC_RULES = {
    "ax", "hole", "cut", "e", "w", "c",
    "andR", "andR2", "andL", "orL", "orR", "impL", "impR",
    "allR", "allL", "exR", "exL", "allpR", "allpL", "expR", "expL",
}

ND_RULES = {
    "assume", "hole", "trueI",
    "andI", "andE1", "andE2", "andEg",
    "orI1", "orI2", "orE",
    "impI", "impE", "impEg",
    "allI", "allE", "exI", "exE",
    "allpI", "allpE", "expI", "expE",
    "eqI", "eqE",
}

SC_PREMISES = {
    "ax": 0, "hole": 0, "cut": 2, "e": 1, "w": 1, "c": 1,
    "andR": 2, "andR2": 2, "andL": 1, "orL": 2, "orR": 1,
    "impL": 2, "impR": 1,
    "allR": 1, "allL": 1, "exR": 1, "exL": 1,
    "allpR": 1, "allpL": 1, "expR": 1, "expL": 1,
}

ND_PREMISES = {
    "assume": 0, "hole": 0, "trueI": 0, "eqI": 0,
    "andI": 2, "andE1": 1, "andE2": 1, "andEg": 2,
    "orI1": 1, "orI2": 1, "orE": 3,
    "impI": 1, "impE": 2, "impEg": 3,
    "allI": 1, "allE": 1, "exI": 1, "exE": 2,
    "allpI": 1, "allpE": 1, "expI": 1, "expE": 2,
    "eqE": 2,
}

STRUCTURAL = {"e", "w", "c"}

# generalized eliminations: conclusion is the schematic formula of some minors
GEN_ELIMS = {"orE": (1, 2), "exE": (1,), "andEg": (1,), "impEg": (2,), "expE": (1,)}

# eliminations and the premise slot holding the major premiss
ND_ELIMS = {
    "andE1": 0, "andE2": 0, "andEg": 0,
    "orE": 0, "impE": 0, "impEg": 0,
    "allE": 0, "exE": 0, "allpE": 0, "expE": 0,
    "eqE": 0,
}

ND_INTROS = {
    "andI", "orI1", "orI2", "impI", "allI", "exI", "allpI", "expI", "eqI", "trueI",
}

# which ND rules discharge labels, and from which premise slots
ND_DISCHARGES = {
    "impI": ((0, "label"),),
    "orE": ((1, "p"), (2, "q")),
    "andEg": ((1, "p"), (1, "q")),
    "impEg": ((2, "p"),),
    "exE": ((1, "s"),),
    "expE": ((1, "s"),),
}


def _ins(ctx: Context, i: int, items: Context) -> Context:
    return ctx[:i] + items + ctx[i:]


def _del(ctx: Context, i: int) -> Context:
    return ctx[:i] + ctx[i + 1 :]


def _need(cond: bool, msg: str):
    if not cond:
        raise SchemaError(msg)


# ---------------------------------------------------------------------------
# Sequent calculus schema


def sc_apply(rule: str, meta: Meta, prem: list[Sequent]) -> Sequent:
    """Compute the conclusion sequent of an SC rule application.

    Raises SchemaError when the premises do not have the required shape.
    """
    _need(rule in SC_RULES, f"unknown SC rule {rule}")
    _need(len(prem) == SC_PREMISES[rule], f"{rule}: wrong premise count")

    if rule == "e":
        (s,) = prem
        i = meta.pos
        _need(0 <= i < len(s.ante) - 1, "e: position out of range")
        a = list(s.ante)
        a[i], a[i + 1] = a[i + 1], a[i]
        return Sequent(tuple(a), s.succ)

    if rule == "w":
        (s,) = prem
        i = meta.pos
        _need(0 <= i <= len(s.ante), "w: position out of range")
        return Sequent(_ins(s.ante, i, (meta.formula,)), s.succ)

    if rule == "c":
        (s,) = prem
        i, j = meta.pos, meta.pos2
        _need(0 <= i < j < len(s.ante), "c: positions out of range")
        _need(s.ante[i] == s.ante[j], "c: contracted formulas differ")
        return Sequent(_del(s.ante, j), s.succ)

    if rule == "cut":
        left, right = prem
        i = meta.pos
        _need(0 <= i < len(right.ante), "cut: position out of range")
        _need(right.ante[i] == left.succ, "cut: cut formula mismatch")
        return Sequent(right.ante[:i] + left.ante + right.ante[i + 1 :], right.succ)

    if rule == "andR":
        l, r = prem
        return Sequent(l.ante + r.ante, And(l.succ, r.succ))

    if rule == "andR2":
        l, r = prem
        _need(l.ante == r.ante, "andR2: contexts must agree")
        return Sequent(l.ante, And(l.succ, r.succ))

    if rule == "andL":
        (s,) = prem
        i, side, other = meta.pos, meta.side, meta.formula
        _need(0 <= i < len(s.ante), "andL: position out of range")
        x = s.ante[i]
        conj = And(x, other) if side == 1 else And(other, x)
        a = list(s.ante)
        a[i] = conj
        return Sequent(tuple(a), s.succ)

    if rule == "orL":
        l, r = prem
        i = meta.pos
        _need(0 <= i < len(l.ante), "orL: position out of range")
        _need(l.succ == r.succ, "orL: succedents differ")
        _need(l.ante[:i] == r.ante[:i] and l.ante[i + 1 :] == r.ante[i + 1 :],
              "orL: contexts differ outside the active position")
        a = list(l.ante)
        a[i] = Or(l.ante[i], r.ante[i])
        return Sequent(tuple(a), l.succ)

    if rule == "orR":
        (s,) = prem
        side, other = meta.side, meta.formula
        return Sequent(s.ante, Or(s.succ, other) if side == 1 else Or(other, s.succ))

    if rule == "impL":
        main, side = prem
        i = meta.pos
        _need(0 <= i < len(main.ante), "impL: position out of range")
        imp = Imp(side.succ, main.ante[i])
        return Sequent(
            main.ante[:i] + (imp,) + side.ante + main.ante[i + 1 :], main.succ
        )

    if rule == "impR":
        (s,) = prem
        i = meta.pos
        _need(0 <= i < len(s.ante), "impR: position out of range")
        return Sequent(_del(s.ante, i), Imp(s.ante[i], s.succ))

    if rule == "allR":
        (s,) = prem
        e = meta.eigen
        return Sequent(s.ante, ForallI(close_ind(s.succ, e), e))

    if rule == "allL":
        (s,) = prem
        i, t, q = meta.pos, meta.term, meta.formula
        _need(isinstance(q, ForallI), "allL: meta formula must be universal")
        _need(0 <= i < len(s.ante), "allL: position out of range")
        _need(s.ante[i] == open_ind(q.body, t), "allL: premise is not the instance")
        a = list(s.ante)
        a[i] = q
        return Sequent(tuple(a), s.succ)

    if rule == "exR":
        (s,) = prem
        t, q = meta.term, meta.formula
        _need(isinstance(q, ExistsI), "exR: meta formula must be existential")
        _need(s.succ == open_ind(q.body, t), "exR: premise is not the instance")
        return Sequent(s.ante, q)

    if rule == "exL":
        (s,) = prem
        i, e = meta.pos, meta.eigen
        _need(0 <= i < len(s.ante), "exL: position out of range")
        a = list(s.ante)
        a[i] = ExistsI(close_ind(a[i], e), e)
        return Sequent(tuple(a), s.succ)

    if rule == "allpR":
        (s,) = prem
        pv = meta.eigen
        return Sequent(s.ante, ForallP(close_prop(s.succ, pv), pv))

    if rule == "allpL":
        (s,) = prem
        i, c, q = meta.pos, meta.inst, meta.formula
        _need(isinstance(q, ForallP), "allpL: meta formula must be universal")
        _need(0 <= i < len(s.ante), "allpL: position out of range")
        _need(s.ante[i] == open_prop(q.body, c), "allpL: premise is not the instance")
        a = list(s.ante)
        a[i] = q
        return Sequent(tuple(a), s.succ)

    if rule == "expR":
        (s,) = prem
        c, q = meta.inst, meta.formula
        _need(isinstance(q, ExistsP), "expR: meta formula must be existential")
        _need(s.succ == open_prop(q.body, c), "expR: premise is not the instance")
        return Sequent(s.ante, q)

    if rule == "expL":
        (s,) = prem
        i, pv = meta.pos, meta.eigen
        _need(0 <= i < len(s.ante), "expL: position out of range")
        a = list(s.ante)
        a[i] = ExistsP(close_prop(a[i], pv), pv)
        return Sequent(tuple(a), s.succ)

    raise SchemaError(f"{rule}: leaf rule applied with premises")


def sc_eigen_violation(rule: str, meta: Meta, concl: Sequent) -> str | None:
    """Eigenvariable side conditions, checked against the conclusion."""
    if rule == "allR":
        if meta.eigen in free_ind_vars_of_ctx(concl.ante):
            return f"allR: eigenvariable {meta.eigen} occurs in the context"
    elif rule == "exL":
        if meta.eigen in sequent_ind_vars(concl):
            return f"exL: eigenvariable {meta.eigen} occurs in the conclusion"
    elif rule == "allpR":
        if meta.eigen in free_prop_vars_of_ctx(concl.ante):
            return f"allpR: eigenvariable {meta.eigen} occurs in the context"
    elif rule == "expL":
        if meta.eigen in sequent_prop_vars(concl):
            return f"expL: eigenvariable {meta.eigen} occurs in the conclusion"
    return None


def free_ind_vars_of_ctx(ctx: Context) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for a in ctx:
        out |= free_ind_vars(a)
    return out


def free_prop_vars_of_ctx(ctx: Context) -> frozenset[str]:
    out: frozenset[str] = frozenset()
    for a in ctx:
        out |= free_prop_vars(a)
    return out


def sequent_ind_vars(s: Sequent) -> frozenset[str]:
    return free_ind_vars_of_ctx(s.ante) | free_ind_vars(s.succ)


def sequent_prop_vars(s: Sequent) -> frozenset[str]:
    return free_prop_vars_of_ctx(s.ante) | free_prop_vars(s.succ)


# ---------------------------------------------------------------------------
# Position tracking (used by the free-permutation engine)


@dataclass(frozen=True)
class Tracking:
    """How a rule instance moves antecedent positions around.

    ctx[k]        dict premise-position -> conclusion-position
    active[k]     premise antecedent positions consumed by the rule
    succ_ctx[k]   True when premise k's succedent becomes the conclusion's
    concl_active  conclusion antecedent positions introduced by the rule
    concl_succ_active  True when the rule introduces the succedent
    """

    ctx: tuple[dict, ...]
    active: tuple[frozenset, ...]
    succ_ctx: tuple[bool, ...]
    concl_active: frozenset
    concl_succ_active: bool


def _idmap(n: int, skip=(), shift_from: int | None = None, shift: int = 0) -> dict:
    out = {}
    for k in range(n):
        if k in skip:
            continue
        out[k] = k + (shift if shift_from is not None and k >= shift_from else 0)
    return out


def sc_tracking(rule: str, meta: Meta, prem: list[Sequent], concl: Sequent) -> Tracking:
    n = [len(s.ante) for s in prem]

    if rule == "e":
        i = meta.pos
        m = _idmap(n[0])
        m[i], m[i + 1] = i + 1, i
        return Tracking((m,), (frozenset(),), (True,), frozenset((i, i + 1)), False)

    if rule == "w":
        i = meta.pos
        return Tracking(
            (_idmap(n[0], shift_from=i, shift=1),),
            (frozenset(),),
            (True,),
            frozenset((i,)),
            False,
        )

    if rule == "c":
        i, j = meta.pos, meta.pos2
        m = _idmap(n[0], skip=(j,), shift_from=j, shift=-1)
        return Tracking((m,), (frozenset((i, j)),), (True,), frozenset((i,)), False)

    if rule == "cut":
        i = meta.pos
        g = n[0]
        m0 = {k: i + k for k in range(g)}
        m1 = _idmap(n[1], skip=(i,), shift_from=i, shift=g - 1)
        return Tracking(
            (m0, m1), (frozenset(), frozenset((i,))), (False, True), frozenset(), False
        )

    if rule == "andR":
        m0 = _idmap(n[0])
        m1 = {k: k + n[0] for k in range(n[1])}
        return Tracking(
            (m0, m1), (frozenset(), frozenset()), (False, False), frozenset(), True
        )

    if rule == "andR2":
        m = _idmap(n[0])
        return Tracking(
            (m, dict(m)), (frozenset(), frozenset()), (False, False), frozenset(), True
        )

    if rule in ("andL", "allL", "allpL"):
        i = meta.pos
        return Tracking(
            (_idmap(n[0], skip=(i,)),),
            (frozenset((i,)),),
            (True,),
            frozenset((i,)),
            False,
        )

    if rule in ("exL", "expL"):
        i = meta.pos
        return Tracking(
            (_idmap(n[0], skip=(i,)),),
            (frozenset((i,)),),
            (True,),
            frozenset((i,)),
            False,
        )

    if rule == "orL":
        i = meta.pos
        m = _idmap(n[0], skip=(i,))
        return Tracking(
            (m, dict(m)),
            (frozenset((i,)), frozenset((i,))),
            (True, True),
            frozenset((i,)),
            False,
        )

    if rule in ("orR", "exR", "expR"):
        return Tracking((_idmap(n[0]),), (frozenset(),), (False,), frozenset(), True)

    if rule == "impL":
        i = meta.pos
        g = n[1]
        m0 = _idmap(n[0], skip=(i,), shift_from=i, shift=g)
        m1 = {k: i + 1 + k for k in range(g)}
        return Tracking(
            (m0, m1),
            (frozenset((i,)), frozenset()),
            (True, False),
            frozenset((i,)),
            False,
        )

    if rule == "impR":
        i = meta.pos
        m = _idmap(n[0], skip=(i,), shift_from=i, shift=-1)
        return Tracking((m,), (frozenset((i,)),), (False,), frozenset(), True)

    if rule in ("allR", "allpR"):
        return Tracking((_idmap(n[0]),), (frozenset(),), (False,), frozenset(), True)

    raise SchemaError(f"sc_tracking: no tracking for {rule}")


# ---------------------------------------------------------------------------
# Natural deduction schema


def nd_apply(rule: str, meta: Meta, prem: list[Formula]) -> Formula:
    """Compute the conclusion formula of an ND rule from premise conclusions."""
    _need(rule in ND_RULES, f"unknown ND rule {rule}")
    _need(len(prem) == ND_PREMISES[rule], f"{rule}: wrong premise count")

    if rule == "trueI":
        return TrueF()
    if rule == "eqI":
        return Eq(meta.term, meta.term)
    if rule == "andI":
        return And(prem[0], prem[1])
    if rule == "andE1":
        _need(isinstance(prem[0], And), "andE1: premise not a conjunction")
        return prem[0].left
    if rule == "andE2":
        _need(isinstance(prem[0], And), "andE2: premise not a conjunction")
        return prem[0].right
    if rule == "andEg":
        _need(isinstance(prem[0], And), "andEg: major premise not a conjunction")
        return prem[1]
    if rule == "orI1":
        return Or(prem[0], meta.formula)
    if rule == "orI2":
        return Or(meta.formula, prem[0])
    if rule == "orE":
        _need(isinstance(prem[0], Or), "orE: major premise not a disjunction")
        _need(prem[1] == prem[2], "orE: minor conclusions differ")
        return prem[1]
    if rule == "impI":
        return Imp(meta.formula, prem[0])
    if rule == "impE":
        _need(isinstance(prem[0], Imp), "impE: major premise not an implication")
        _need(prem[0].left == prem[1], "impE: argument mismatch")
        return prem[0].right
    if rule == "impEg":
        _need(isinstance(prem[0], Imp), "impEg: major premise not an implication")
        _need(prem[0].left == prem[1], "impEg: argument mismatch")
        return prem[2]
    if rule == "allI":
        return ForallI(close_ind(prem[0], meta.eigen), meta.eigen)
    if rule == "allE":
        _need(isinstance(prem[0], ForallI), "allE: premise not universal")
        return open_ind(prem[0].body, meta.term)
    if rule == "exI":
        q = meta.formula
        _need(isinstance(q, ExistsI), "exI: meta formula must be existential")
        _need(prem[0] == open_ind(q.body, meta.term), "exI: premise is not the instance")
        return q
    if rule == "exE":
        _need(isinstance(prem[0], ExistsI), "exE: major premise not existential")
        return prem[1]
    if rule == "allpI":
        return ForallP(close_prop(prem[0], meta.eigen), meta.eigen)
    if rule == "allpE":
        _need(isinstance(prem[0], ForallP), "allpE: premise not universal")
        return open_prop(prem[0].body, meta.inst)
    if rule == "expI":
        q = meta.formula
        _need(isinstance(q, ExistsP), "expI: meta formula must be existential")
        _need(prem[0] == open_prop(q.body, meta.inst), "expI: premise is not the instance")
        return q
    if rule == "expE":
        _need(isinstance(prem[0], ExistsP), "expE: major premise not existential")
        return prem[1]
    if rule == "eqE":
        eq, main = prem
        _need(isinstance(eq, Eq), "eqE: first premise not an equation")
        pat = meta.pattern
        _need(main == open_ind(pat, eq.lhs), "eqE: main premise does not match the pattern")
        return open_ind(pat, eq.rhs)

    raise SchemaError(f"{rule}: leaf rule applied with premises")


def nd_discharged_assumption(rule: str, meta: Meta, prem: list[Formula], slot: int, key: str) -> Formula:
    """The formula a discharge label must carry at the given premise slot."""
    if rule == "impI":
        return meta.formula
    if rule == "orE":
        assert isinstance(prem[0], Or)
        return prem[0].left if key == "p" else prem[0].right
    if rule == "andEg":
        assert isinstance(prem[0], And)
        return prem[0].left if key == "p" else prem[0].right
    if rule == "impEg":
        assert isinstance(prem[0], Imp)
        return prem[0].right
    if rule == "exE":
        assert isinstance(prem[0], ExistsI)
        return open_ind(prem[0].body, Var(meta.eigen))
    if rule == "expE":
        assert isinstance(prem[0], ExistsP)
        return open_prop(prem[0].body, PropVar(meta.eigen))
    raise SchemaError(f"{rule} does not discharge")
