"""Forgetful translation from first-order into propositional derivations.

Formulas: equations become the truth constant, predicates lose their
arguments, quantifiers vanish.  Derivations: equality eliminations and
quantifier rules are deleted (the existential eliminator splices its minor
onto its major), reflexivity leaves become truth introductions.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .derivation import (
    CheckError,
    Derivation,
    assume,
    nd,
    nd_hole,
    subst_assumption,
)
from .rules import M, SchemaError
from .syntax import (
    And,
    Atom,
    Eq,
    ExistsI,
    ExistsP,
    ForallI,
    ForallP,
    Formula,
    Imp,
    Or,
    PropVar,
    TrueF,
    Var,
    open_ind,
    tier,
    TIER_SO,
)


@dataclass
class TranslationReport:
    source: Derivation
    target: Derivation
    erased_nodes: list[tuple[tuple[int, ...], str]] = field(default_factory=list)


def forget_formula(a: Formula) -> Formula:
    """Erase first-order structure; idempotent, propositional result."""
    if isinstance(a, Eq):
        return TrueF()
    if isinstance(a, Atom):
        return Atom(a.pred)
    if isinstance(a, TrueF):
        return a
    if isinstance(a, (And, Or, Imp)):
        return type(a)(forget_formula(a.left), forget_formula(a.right))
    if isinstance(a, (ForallI, ExistsI)):
        return forget_formula(open_ind(a.body, Var(a.hint)))
    raise SchemaError("the forgetful translation does not cover second-order formulas")


def forget_derivation(d: Derivation) -> TranslationReport:
    """Delete equality eliminations and quantifier rules from a checked
    first-order natural deduction derivation."""
    if d.is_sc:
        raise CheckError("the forgetful translation works on natural deduction")
    erased: list[tuple[tuple[int, ...], str]] = []
    target = _forget(d, (), erased)
    return TranslationReport(d, target, erased)


def _forget(d: Derivation, path, erased) -> Derivation:
    r = d.rule
    if r in ("allpI", "allpE", "expI", "expE") or tier(d.concl) >= TIER_SO:
        raise SchemaError("no second-order erasure")
    if r == "assume":
        return assume(d.meta.label, forget_formula(d.concl))
    if r == "hole":
        return nd_hole(
            d.meta.hole,
            tuple((l, forget_formula(a)) for l, a in d.meta.assumes),
            forget_formula(d.concl),
        )
    if r == "eqI":
        erased.append((path, "eqI"))
        return nd("trueI", M(), [])
    if r == "eqE":
        erased.append((path, "eqE"))
        return _forget(d.premises[1], path + (1,), erased)
    if r in ("allI", "allE"):
        erased.append((path, r))
        return _forget(d.premises[0], path + (0,), erased)
    if r == "exI":
        erased.append((path, "exI"))
        return _forget(d.premises[0], path + (0,), erased)
    if r == "exE":
        erased.append((path, "exE"))
        major = _forget(d.premises[0], path + (0,), erased)
        minor = _forget(d.premises[1], path + (1,), erased)
        return subst_assumption(minor, d.meta.s, major)
    prem = [_forget(p, path + (i,), erased) for i, p in enumerate(d.premises)]
    meta = d.meta
    if meta.get("formula") is not None:
        meta = meta.replace(formula=forget_formula(meta.formula))
    return nd(r, meta, prem)
