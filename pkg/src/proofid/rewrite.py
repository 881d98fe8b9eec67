"""Conversion relations and equivalence decisions.

Sequent calculus: Gentzen cut reduction (deterministic uppermost-rightmost
strategy, with a structural cleanup pass), free permutations of rules, and
the bounded bidirectional closure search for the permutation equivalence.

Natural deduction: beta, bounded eta expansion, the equality beta/eta of
the first-order fragment, permutations of generalized eliminations
(permutative conversions are the oriented special case), the Prawitz-style
normalizer, and the bounded closure equivalence with pluggable naturality
square moves.
"""

from __future__ import annotations

import functools
import itertools
from collections import deque
from dataclasses import dataclass, field

from . import rules as R
from .derivation import (
    CheckError,
    Derivation,
    all_discharge_labels,
    all_eigenvars,
    all_labels,
    assume,
    canonical_key,
    check,
    discharge_labels,
    instantiate_prop,
    instantiate_term,
    nd,
    open_assumptions,
    rename_label,
    sc,
    freshen_labels,
    freshen_eigens,
)
from .rules import M, Meta, SchemaError
from .syntax import (
    And,
    BVar,
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
    Term,
    TrueF,
    Var,
    formula_size,
    free_ind_vars,
    free_prop_vars,
    fresh_name,
    open_ind,
    open_prop,
    subformulas,
)


class RewriteBudgetError(Exception):
    pass


@dataclass(frozen=True)
class RewriteStep:
    kind: str
    path: tuple[int, ...]
    before: Derivation
    after: Derivation
    reverse: bool = False

    def inverted(self) -> "RewriteStep":
        return RewriteStep(self.kind, self.path, self.after, self.before, not self.reverse)


@dataclass
class EquivVerdict:
    related: bool
    witness: list[RewriteStep] = field(default_factory=list)
    bound_exhausted: bool = False
    expansions: int = 0

    def __bool__(self):
        return self.related


def replay_ok(a: Derivation, b: Derivation, witness: list[RewriteStep]) -> bool:
    """Witness steps must chain exactly from a to b."""
    cur = a
    for s in witness:
        if s.before != cur:
            return False
        cur = s.after
    return cur == b


# ---------------------------------------------------------------------------
# Exchange chains


def exchange_chain(d: Derivation, src: int, dst: int) -> Derivation:
    """Move the antecedent formula at position src to position dst."""
    if src == dst:
        return d
    if src > dst:
        for m in range(src - 1, dst - 1, -1):
            d = sc("e", M(pos=m), [d])
    else:
        for m in range(src, dst):
            d = sc("e", M(pos=m), [d])
    return d


def reorder_to(d: Derivation, target: tuple[Formula, ...]) -> Derivation:
    """Append exchange steps until the antecedent equals `target` (stable)."""
    cur = list(d.concl.ante)
    assert sorted(map(repr, cur)) == sorted(map(repr, target)), "reorder: not a permutation"
    for idx in range(len(target)):
        if cur[idx] == target[idx]:
            continue
        k = next(m for m in range(idx + 1, len(cur)) if cur[m] == target[idx])
        d = exchange_chain(d, k, idx)
        cur.insert(idx, cur.pop(k))
    return d


# ---------------------------------------------------------------------------
# Cut reduction

_RIGHT_INTROS = {
    "andR": And, "andR2": And, "orR": Or, "impR": Imp,
    "allR": ForallI, "exR": ExistsI, "allpR": ForallP, "expR": ExistsP,
}
_LEFT_RULES = {
    "andL": And, "orL": Or, "impL": Imp,
    "allL": ForallI, "exL": ExistsI, "allpL": ForallP, "expL": ExistsP,
}

# rule meta position fields and their coordinate system
_POS_FIELDS = {
    "e": (("pos", "same"),),
    "w": (("pos", "concl"),),
    "c": (("pos", "prem0"), ("pos2", "prem0")),
    "cut": (("pos", "prem1"),),
    "andL": (("pos", "same"),),
    "orL": (("pos", "same"),),
    "impL": (("pos", "same"),),
    "impR": (("pos", "prem0"),),
    "allL": (("pos", "same"),),
    "exL": (("pos", "same"),),
    "allpL": (("pos", "same"),),
    "expL": (("pos", "same"),),
}


def _weaken_in(d: Derivation, at: int, ctx: tuple[Formula, ...]) -> Derivation:
    for idx, f in enumerate(ctx):
        d = sc("w", M(pos=at + idx, formula=f), [d])
    return d


def reduce_cut(dcut: Derivation) -> Derivation | None:
    """One reduction of the given cut node, or None when it is stuck."""
    L, Rt = dcut.premises
    i = dcut.meta.pos
    gam = L.concl.ante
    g = len(gam)
    phi = L.concl.succ

    if L.rule == "ax":
        return Rt
    if Rt.rule == "ax":
        return L

    # the consumer's structural rule acts on the cut formula itself
    if Rt.rule == "w" and Rt.meta.pos == i:
        return _weaken_in(Rt.premises[0], i, gam)
    if Rt.rule == "c":
        k, k2 = Rt.meta.pos, Rt.meta.pos2
        if i == k:
            inner = sc("cut", M(pos=k2), [L, Rt.premises[0]])
            inner = sc("cut", M(pos=k), [L, inner])
            s = k2 + g - 1
            for m in range(g):
                inner = sc("c", M(pos=k + m, pos2=s), [inner])
            return inner
    if Rt.rule == "e":
        k = Rt.meta.pos
        if i == k:
            inner = sc("cut", M(pos=k + 1), [L, Rt.premises[0]])
            return exchange_chain(inner, k, k + g)
        if i == k + 1:
            inner = sc("cut", M(pos=k), [L, Rt.premises[0]])
            return exchange_chain(inner, k + g, k)

    # principal reduction
    if L.rule in _RIGHT_INTROS and Rt.rule in _LEFT_RULES and Rt.meta.get("pos") == i:
        out = _principal(dcut, L, Rt, i)
        if out is not None:
            return out

    # commute into the consumer
    if Rt.premises:
        trk = R.sc_tracking(Rt.rule, Rt.meta, [p.concl for p in Rt.premises], Rt.concl)
        if i not in trk.concl_active:
            out = _commute_right(dcut, L, Rt, i, trk)
            if out is not None:
                return out

    # commute into the producer
    if L.premises:
        trk = R.sc_tracking(L.rule, L.meta, [p.concl for p in L.premises], L.concl)
        if any(trk.succ_ctx):
            out = _commute_left(dcut, L, Rt, i, trk)
            if out is not None:
                return out

    return None


def _principal(dcut, L, Rt, i) -> Derivation | None:
    phi = L.concl.succ
    target = dcut.concl.ante
    if isinstance(phi, And) and L.rule in ("andR", "andR2") and Rt.rule == "andL":
        side = Rt.meta.side
        sub = L.premises[side - 1]
        out = sc("cut", M(pos=i), [sub, Rt.premises[0]])
        if L.rule == "andR":
            other = L.premises[2 - side]
            at = i + len(sub.concl.ante) if side == 1 else i
            out = _weaken_in(out, at, other.concl.ante)
        return reorder_to(out, target)
    if isinstance(phi, Or) and L.rule == "orR" and Rt.rule == "orL":
        side = L.meta.side
        out = sc("cut", M(pos=i), [L.premises[0], Rt.premises[side - 1]])
        return reorder_to(out, target)
    if isinstance(phi, Imp) and L.rule == "impR" and Rt.rule == "impL":
        j = L.meta.pos
        c1 = sc("cut", M(pos=j), [Rt.premises[1], L.premises[0]])
        c2 = sc("cut", M(pos=i), [c1, Rt.premises[0]])
        return reorder_to(c2, target)
    if isinstance(phi, ForallI) and L.rule == "allR" and Rt.rule == "allL":
        inst = instantiate_term(L.premises[0], L.meta.eigen, Rt.meta.term)
        out = sc("cut", M(pos=i), [inst, Rt.premises[0]])
        return reorder_to(out, target)
    if isinstance(phi, ExistsI) and L.rule == "exR" and Rt.rule == "exL":
        inst = instantiate_term(Rt.premises[0], Rt.meta.eigen, L.meta.term)
        out = sc("cut", M(pos=i), [L.premises[0], inst])
        return reorder_to(out, target)
    if isinstance(phi, ForallP) and L.rule == "allpR" and Rt.rule == "allpL":
        inst = instantiate_prop(L.premises[0], L.meta.eigen, Rt.meta.inst)
        out = sc("cut", M(pos=i), [inst, Rt.premises[0]])
        return reorder_to(out, target)
    if isinstance(phi, ExistsP) and L.rule == "expR" and Rt.rule == "expL":
        inst = instantiate_prop(Rt.premises[0], Rt.meta.eigen, L.meta.inst)
        out = sc("cut", M(pos=i), [L.premises[0], inst])
        return reorder_to(out, target)
    return None


def _commute_right(dcut, L, Rt, i, trk) -> Derivation | None:
    """Push the cut into the consumer's premises that carry position i."""
    g = len(L.concl.ante)
    new_prem = []
    received = []
    for k, p in enumerate(Rt.premises):
        inv = {v: q for q, v in trk.ctx[k].items()}
        if i in inv:
            ip = inv[i]
            new_prem.append(sc("cut", M(pos=ip), [L, p]))
            received.append((k, ip))
        else:
            new_prem.append(p)
    if not received:
        return None
    # eigenvariable rules must stay fresh for the incoming context
    if Rt.rule in ("allR", "exL", "allpR", "expL"):
        e = Rt.meta.eigen
        bad = R.sequent_ind_vars(L.concl) | R.sequent_prop_vars(L.concl)
        if e in bad:
            return None
    meta = _shift_meta_commute(Rt.rule, Rt.meta, i, g, received)
    try:
        out = sc(Rt.rule, meta, new_prem)
    except SchemaError:
        return None
    if out.concl != dcut.concl:
        try:
            out = reorder_to(out, dcut.concl.ante) if out.concl.succ == dcut.concl.succ else None
        except (AssertionError, SchemaError):
            return None
        if out is None or out.concl != dcut.concl:
            return None
    return out


def _shift_meta_commute(rule: str, meta: Meta, i: int, g: int, received) -> Meta:
    out = meta
    recv = dict(received)
    for fieldname, coord in _POS_FIELDS.get(rule, ()):
        v = out.get(fieldname)
        if v is None:
            continue
        if coord == "concl":
            if v > i:
                out = out.replace(**{fieldname: v + g - 1})
        elif coord == "same":
            if v > i:
                out = out.replace(**{fieldname: v + g - 1})
        elif coord.startswith("prem"):
            k = int(coord[4:])
            if k in recv and v > recv[k]:
                out = out.replace(**{fieldname: v + g - 1})
    return out


def _commute_left(dcut, L, Rt, i, trk) -> Derivation | None:
    """Push the cut into the producer's succedent-carrying premises."""
    new_prem = []
    received = []
    for k, p in enumerate(L.premises):
        if trk.succ_ctx[k]:
            new_prem.append(sc("cut", M(pos=i), [p, Rt]))
            received.append(k)
        else:
            new_prem.append(p)
    if not received:
        return None
    if L.rule in ("allR", "exL", "allpR", "expL"):
        e = L.meta.eigen
        bad = R.sequent_ind_vars(Rt.concl) | R.sequent_prop_vars(Rt.concl)
        if e in bad:
            return None
    meta = L.meta
    out_meta = meta
    for fieldname, coord in _POS_FIELDS.get(L.rule, ()):
        v = out_meta.get(fieldname)
        if v is None:
            continue
        if coord in ("same", "concl") or (coord.startswith("prem") and int(coord[4:]) in received):
            out_meta = out_meta.replace(**{fieldname: v + i})
    try:
        out = sc(L.rule, out_meta, new_prem)
    except SchemaError:
        return None
    if out.concl != dcut.concl:
        try:
            if out.concl.succ != dcut.concl.succ:
                return None
            out = reorder_to(out, dcut.concl.ante)
        except (AssertionError, SchemaError):
            return None
        if out.concl != dcut.concl:
            return None
    return out


# ---------------------------------------------------------------------------
# Structural cleanup: contractions cancel against weakenings, exchange noise
# collapses, weakening stacks take a canonical order


def erase_position(d: Derivation, pos: int) -> Derivation | None:
    """Remove antecedent position `pos` of the root, when it traces back to
    weakenings only (duplicated along context-sharing rules as needed)."""
    if d.rule == "w" and d.meta.pos == pos:
        return d.premises[0]
    if not d.premises or not d.is_sc:
        return None
    try:
        trk = R.sc_tracking(d.rule, d.meta, [p.concl for p in d.premises], d.concl)
    except SchemaError:
        return None
    if pos in trk.concl_active:
        return None
    new_prem = []
    erased_at: dict[int, int] = {}
    for k, p in enumerate(d.premises):
        inv = {v: q for q, v in trk.ctx[k].items()}
        if pos in inv:
            ep = erase_position(p, inv[pos])
            if ep is None:
                return None
            erased_at[k] = inv[pos]
            new_prem.append(ep)
        else:
            new_prem.append(p)
    if not erased_at:
        return None
    meta = d.meta
    for fieldname, coord in _POS_FIELDS.get(d.rule, ()):
        v = meta.get(fieldname)
        if v is None:
            continue
        if coord in ("concl", "same"):
            if v > pos:
                meta = meta.replace(**{fieldname: v - 1})
        elif coord.startswith("prem"):
            k = int(coord[4:])
            if k in erased_at and v > erased_at[k]:
                meta = meta.replace(**{fieldname: v - 1})
    try:
        out = sc(d.rule, meta, new_prem)
    except SchemaError:
        return None
    want = d.concl.ante[:pos] + d.concl.ante[pos + 1 :]
    if out.concl != Sequent(want, d.concl.succ):
        return None
    return out


def _cleanup_once(d: Derivation) -> Derivation | None:
    if d.rule == "c":
        i, j = d.meta.pos, d.meta.pos2
        gone = erase_position(d.premises[0], j)
        if gone is not None:
            return gone
        gone = erase_position(d.premises[0], i)
        if gone is not None:
            return exchange_chain(gone, j - 1, i)
    if d.rule == "e":
        p = d.premises[0]
        # inverse pair, or an exchange of equal formulas
        if p.rule == "e" and p.meta.pos == d.meta.pos:
            return p.premises[0]
        i = d.meta.pos
        if p.concl.ante[i] == p.concl.ante[i + 1]:
            return p
    if d.rule == "w" and d.premises[0].rule == "w":
        # bubble the smaller final insertion position to the bottom
        i = d.meta.pos
        up = d.premises[0]
        k = up.meta.pos
        k_final = k if k < i else k + 1
        if k_final < i:
            inner = sc("w", M(pos=i - 1, formula=d.meta.formula), [up.premises[0]])
            return sc("w", M(pos=k_final, formula=up.meta.formula), [inner])
    return None


def structural_cleanup(d: Derivation, cap: int = 4000) -> Derivation:
    steps = 0
    changed = True
    while changed:
        changed = False
        for path, node in sorted(d.nodes(), key=lambda pn: -len(pn[0])):
            out = _cleanup_once(node)
            if out is not None:
                d = d.replace_at(path, out)
                steps += 1
                if steps > cap:
                    raise RewriteBudgetError("structural cleanup did not terminate")
                changed = True
                break
    return d


# ---------------------------------------------------------------------------
# normalize_cut


def _reducible_cuts(d: Derivation) -> list[tuple[int, ...]]:
    out = []
    for path, node in d.nodes():
        if node.rule == "cut" and reduce_cut(node) is not None:
            out.append(path)
    return out


def cut_elim_step(d: Derivation) -> tuple[Derivation, RewriteStep] | None:
    """Reduce the uppermost-rightmost reducible cut one step."""
    cands = _reducible_cuts(d)
    if not cands:
        return None
    uppermost = [
        p for p in cands if not any(q != p and q[: len(p)] == p for q in cands)
    ]
    path = max(uppermost)
    new_local = reduce_cut(d.at(path))
    assert new_local is not None
    out = d.replace_at(path, new_local)
    return out, RewriteStep("cut-elim", path, d, out)


@functools.lru_cache(maxsize=None)
def normalize_cut(d: Derivation, cap: int = 20000) -> Derivation:
    """Deterministic cut elimination followed by structural cleanup."""
    steps = 0
    while True:
        nxt = cut_elim_step(d)
        if nxt is None:
            break
        d = nxt[0]
        steps += 1
        if steps > cap:
            raise RewriteBudgetError("cut elimination exceeded the step cap")
    return structural_cleanup(d)


def normalize_cut_trace(d: Derivation, cap: int = 20000) -> tuple[Derivation, list[RewriteStep]]:
    steps: list[RewriteStep] = []
    cur = d
    n = 0
    while True:
        nxt = cut_elim_step(cur)
        if nxt is None:
            break
        cur, st = nxt
        steps.append(st)
        n += 1
        if n > cap:
            raise RewriteBudgetError("cut elimination exceeded the step cap")
    cleaned = structural_cleanup(cur)
    if cleaned != cur:
        steps.append(RewriteStep("cut-elim", (), cur, cleaned))
    return cleaned, steps


def equiv_cut(a: Derivation, b: Derivation) -> EquivVerdict:
    """Related iff the deterministic normal forms coincide (mod alpha)."""
    na, ta = normalize_cut_trace(a)
    nb, tb = normalize_cut_trace(b)
    if canonical_key(na) == canonical_key(nb):
        wit = ta + [s.inverted() for s in reversed(tb)]
        return EquivVerdict(True, wit)
    return EquivVerdict(False)


# ---------------------------------------------------------------------------
# Free permutations (sequent calculus)


def transpose(parent: Derivation, slot: int) -> list[Derivation]:
    """Candidates for pushing the rule above `slot` to the bottom.

    Returns subtree replacements with the same root; each candidate places
    the upper rule at the root and re-applies the parent rule inside its
    premises (duplicating the parent's other premises when the upper rule
    has several).
    """
    Lr = parent
    U = parent.premises[slot]
    if not U.premises or Lr.rule in ("ax", "hole") or not Lr.is_sc or not U.is_sc:
        return []
    try:
        trkL = R.sc_tracking(Lr.rule, Lr.meta, [p.concl for p in Lr.premises], Lr.concl)
        trkU = R.sc_tracking(U.rule, U.meta, [p.concl for p in U.premises], U.concl)
    except SchemaError:
        return []

    ALj = trkL.active[slot]
    if trkU.concl_active & ALj:
        return []
    if trkU.concl_succ_active and not trkL.succ_ctx[slot]:
        return []

    out = []
    for cand in _transpose_build(Lr, slot, U, trkL, trkU):
        if cand.concl == Lr.concl and check(cand).ok and cand != Lr:
            out.append(cand)
    return _dedup(out)


def _dedup(ds):
    seen = set()
    out = []
    for d in ds:
        k = canonical_key(d)
        if k not in seen:
            seen.add(k)
            out.append(d)
    return out


def _transpose_build(Lr, slot, U, trkL, trkU):
    ALj = sorted(trkL.active[slot])
    consumes_succ = not trkL.succ_ctx[slot]
    results = []
    m = len(U.premises)

    # context-sharing upper rules (orL, andR2) keep one context across all
    # premises, so the lower rule must be rebased into every premise; for
    # context-splitting rules it lands in the premise holding its action.
    images = [set(trkU.ctx[k].values()) for k in range(m)]
    sharing = U.rule in ("orL", "andR2")

    def fits(k: int) -> bool:
        has_all = all(a in images[k] for a in ALj)
        return has_all and (not consumes_succ or trkU.succ_ctx[k])

    if sharing:
        choices = [tuple(range(m))] if all(fits(k) for k in range(m)) else []
    elif ALj or consumes_succ:
        choices = [(k,) for k in range(m) if fits(k)]
    else:
        # weakening-like lower rule: any single premise may host it
        choices = [(k,) for k in range(m)]

    for S in choices:
        if not S:
            continue
        new_prem_sets = []
        ok = True
        for k in range(len(U.premises)):
            if k not in S:
                new_prem_sets.append([U.premises[k]])
                continue
            inv = {v: q for q, v in trkU.ctx[k].items()}
            variants = _rebase_lower(Lr, slot, U.premises[k], inv)
            if not variants:
                ok = False
                break
            new_prem_sets.append(variants)
        if not ok:
            continue
        for combo in itertools.product(*new_prem_sets):
            metas = _bottom_metas(U, Lr, slot, combo, trkL)
            for mu in metas:
                try:
                    cand = sc(U.rule, mu, list(combo))
                except SchemaError:
                    continue
                results.append(cand)
    return results


def _rebase_lower(Lr, slot, new_mid: Derivation, inv: dict) -> list[Derivation]:
    """Re-apply the lower rule with its premise `slot` replaced by `new_mid`."""
    prem = list(Lr.premises)
    prem[slot] = new_mid
    fields = _POS_FIELDS.get(Lr.rule, ())
    base = Lr.meta
    variants: list[Meta] = []

    def remap(meta: Meta) -> Meta | None:
        out = meta
        for fieldname, coord in fields:
            v = out.get(fieldname)
            if v is None:
                continue
            # "same" fields live in premise-0 coordinates (orL shares them
            # across both premises); prem-anchored fields move only when
            # their own premise is the one being rebased.
            anchored = coord == f"prem{slot}" or (
                coord == "same" and (slot == 0 or Lr.rule == "orL")
            )
            if anchored:
                if v not in inv:
                    return None
                out = out.replace(**{fieldname: inv[v]})
        return out

    if Lr.rule == "w":
        # the inserted formula may land at any position producing the root
        for p in range(len(new_mid.concl.ante) + 1):
            variants.append(base.replace(pos=p))
    elif Lr.rule == "e":
        v = base.pos
        if v in inv and (v + 1) in inv and inv[v + 1] == inv[v] + 1:
            variants.append(base.replace(pos=inv[v]))
        elif v in inv and (v + 1) in inv and inv[v] == inv[v + 1] + 1:
            variants.append(base.replace(pos=inv[v + 1]))
    else:
        m = remap(base)
        if m is not None:
            variants.append(m)

    out = []
    for mv in variants:
        try:
            out.append(sc(Lr.rule, mv, prem))
        except SchemaError:
            continue
    return out


def _bottom_metas(U, Lr, slot, combo, trkL):
    """Candidate metas for the upper rule once it sits at the bottom."""
    fields = _POS_FIELDS.get(U.rule, ())
    base = U.meta
    if not fields:
        return [base]
    cm = trkL.ctx[slot]
    outs = []
    exact = base
    bad = False
    for fieldname, coord in fields:
        v = base.get(fieldname)
        if v is None:
            continue
        if coord in ("same", "concl"):
            if v in cm:
                exact = exact.replace(**{fieldname: cm[v]})
            else:
                bad = True
        elif coord.startswith("prem"):
            k = int(coord[4:])
            sub = combo[k]
            if sub is U.premises[k]:
                continue
            try:
                trk2 = R.sc_tracking(sub.rule, sub.meta, [p.concl for p in sub.premises], sub.concl)
                sigma = trk2.ctx[slot]
                if v in sigma:
                    exact = exact.replace(**{fieldname: sigma[v]})
                else:
                    bad = True
            except SchemaError:
                bad = True
    if not bad:
        outs.append(exact)
    # bounded fallback search keeps the engine honest when the exact remap
    # misses (validated against the root either way)
    n = max(len(c.concl.ante) for c in combo) + 2
    names = [f for f, _ in fields]
    if len(names) == 1:
        for p in range(n):
            outs.append(base.replace(**{names[0]: p}))
    elif len(names) == 2:
        for p in range(n):
            for p2 in range(p + 1, n):
                outs.append(base.replace(**{names[0]: p, names[1]: p2}))
    return outs


def merge_candidates(node: Derivation) -> list[Derivation]:
    """Inverse transpositions: pull a rule shared by all premises below.

    Candidates m are valid exactly when `node` is a transposition of m, so
    each one is validated by re-transposing.
    """
    U = node
    if not U.is_sc or len(U.premises) == 0 or not U.premises[0].premises:
        return []
    Lrule = U.premises[0].rule
    if Lrule in ("ax", "hole") or any(p.rule != Lrule for p in U.premises):
        return []
    Ls = list(U.premises)
    nprem = len(Ls[0].premises)
    if any(len(p.premises) != nprem for p in Ls):
        return []
    out = []
    for j in range(nprem):
        sides_equal = all(
            Ls[0].premises[k] == L.premises[k]
            for L in Ls[1:]
            for k in range(nprem)
            if k != j
        )
        if not sides_equal:
            continue
        mids = [L.premises[j] for L in Ls]
        for mu in _merge_meta_candidates(U, mids):
            try:
                new_mid = sc(U.rule, mu, mids)
            except SchemaError:
                continue
            for ml in _merge_lower_metas(Ls[0], j, new_mid):
                prem = list(Ls[0].premises)
                prem[j] = new_mid
                try:
                    cand = sc(Lrule, ml, prem)
                except SchemaError:
                    continue
                if cand.concl != node.concl or not check(cand).ok:
                    continue
                if any(t == node for t in transpose(cand, j)):
                    out.append(cand)
    return _dedup(out)


def _merge_meta_candidates(U, mids):
    fields = _POS_FIELDS.get(U.rule, ())
    if not fields:
        return [U.meta]
    n = max(len(m.concl.ante) for m in mids) + 2
    names = [f for f, _ in fields]
    outs = []
    if len(names) == 1:
        for p in range(n):
            outs.append(U.meta.replace(**{names[0]: p}))
    else:
        for p in range(n):
            for p2 in range(p + 1, n):
                outs.append(U.meta.replace(**{names[0]: p, names[1]: p2}))
    return outs


def _merge_lower_metas(L0, j, new_mid):
    fields = _POS_FIELDS.get(L0.rule, ())
    if not fields:
        return [L0.meta]
    n = len(new_mid.concl.ante) + 2
    names = [f for f, _ in fields]
    outs = []
    if len(names) == 1:
        for p in range(n):
            outs.append(L0.meta.replace(**{names[0]: p}))
    else:
        for p in range(n):
            for p2 in range(p + 1, n):
                outs.append(L0.meta.replace(**{names[0]: p, names[1]: p2}))
    return outs


@functools.lru_cache(maxsize=None)
def _local_perms(sub: Derivation) -> tuple[Derivation, ...]:
    out = []
    for slot in range(len(sub.premises)):
        out.extend(transpose(sub, slot))
    out.extend(merge_candidates(sub))
    return tuple(_dedup(out))


def free_permutations(d: Derivation) -> list[tuple[Derivation, RewriteStep]]:
    """Every derivation reachable by one free permutation of consecutive rules."""
    out = []
    seen = set()
    for path, node in d.nodes():
        for cand in _local_perms(node):
            whole = d.replace_at(path, cand)
            k = canonical_key(whole)
            if k in seen:
                continue
            seen.add(k)
            out.append((whole, RewriteStep("free-perm", path, d, whole)))
    return out


# ---------------------------------------------------------------------------
# Bounded bidirectional closure search


def _meet_bfs(a, b, start, key_fn, neighbors_fn, budget: int, root_guard=None) -> EquivVerdict:
    """Bidirectional BFS; states carry their step trail from their origin."""
    if root_guard is not None and not root_guard(a, b):
        return EquivVerdict(False)
    sa, ta = start(a)
    sb, tb = start(b)
    ka, kb = key_fn(sa), key_fn(sb)
    sides = [
        {ka: (sa, ta)},
        {kb: (sb, tb)},
    ]
    queues = [deque([ka]), deque([kb])]
    expansions = 0
    if ka in sides[1]:
        wit = ta + [s.inverted() for s in reversed(tb)]
        return EquivVerdict(True, wit, expansions=0)
    while queues[0] or queues[1]:
        side = 0 if queues[0] and (not queues[1] or len(queues[0]) <= len(queues[1])) else 1
        q = queues[side]
        if not q:
            side = 1 - side
            q = queues[side]
        key = q.popleft()
        state, trail = sides[side][key]
        expansions += 1
        if expansions > budget:
            return EquivVerdict(False, bound_exhausted=True, expansions=expansions)
        for nxt, steps in neighbors_fn(state):
            nk = key_fn(nxt)
            if nk in sides[side]:
                continue
            ntrail = trail + steps
            sides[side][nk] = (nxt, ntrail)
            if nk in sides[1 - side]:
                other_state, other_trail = sides[1 - side][nk]
                if side == 0:
                    wit = ntrail + _bridge(nxt, other_state) + [
                        s.inverted() for s in reversed(other_trail)
                    ]
                else:
                    wit = other_trail + _bridge(other_state, nxt) + [
                        s.inverted() for s in reversed(ntrail)
                    ]
                return EquivVerdict(True, wit, expansions=expansions)
            q.append(nk)
    return EquivVerdict(False, expansions=expansions)


def _bridge(x: Derivation, y: Derivation) -> list[RewriteStep]:
    """Meeting states share a key but may differ up to alpha; record the hop."""
    if x == y:
        return []
    return [RewriteStep("alpha", (), x, y)]


def equiv_perm(a: Derivation, b: Derivation, budget: int = 100000) -> EquivVerdict:
    """Closure of cut equivalence under free permutations, bounded search."""
    if a.concl != b.concl:
        raise SchemaError("equiv_perm: root sequents differ")

    def start(x):
        nx, trace = normalize_cut_trace(x)
        return nx, trace

    def neighbors(x):
        out = []
        for y, st in free_permutations(x):
            ny, extra = normalize_cut_trace(y)
            out.append((ny, [st] + extra))
        return out

    return _meet_bfs(a, b, start, canonical_key, neighbors, budget)


def equiv_cut_search(a: Derivation, b: Derivation, budget: int = 2000) -> EquivVerdict:
    """Audit tool: bounded closure over single cut-elimination steps."""

    def start(x):
        return x, []

    def neighbors(x):
        nxt = cut_elim_step(x)
        return [(nxt[0], [nxt[1]])] if nxt else []

    return _meet_bfs(a, b, start, canonical_key, neighbors, budget)


# ===========================================================================
# Natural deduction: beta, eta, equality rules, generalized-elimination
# permutations, the Prawitz normalizer and the bounded closure equivalence.

from .derivation import subst_assumption  # noqa: E402  (ND section)


def beta_redex(node: Derivation) -> Derivation | None:
    """Contract one beta redex rooted at this node (None when not a redex)."""
    r = node.rule
    if not node.premises:
        return None
    major = node.premises[0]
    if r == "impE" and major.rule == "impI":
        return subst_assumption(major.premises[0], major.meta.label, node.premises[1])
    if r == "andE1" and major.rule == "andI":
        return major.premises[0]
    if r == "andE2" and major.rule == "andI":
        return major.premises[1]
    if r == "orE" and major.rule in ("orI1", "orI2"):
        arg = major.premises[0]
        if major.rule == "orI1":
            return subst_assumption(node.premises[1], node.meta.p, arg)
        return subst_assumption(node.premises[2], node.meta.q, arg)
    if r == "andEg" and major.rule == "andI":
        out = subst_assumption(node.premises[1], node.meta.p, major.premises[0])
        return subst_assumption(out, node.meta.q, major.premises[1])
    if r == "impEg" and major.rule == "impI":
        fed = subst_assumption(major.premises[0], major.meta.label, node.premises[1])
        return subst_assumption(node.premises[2], node.meta.p, fed)
    if r == "allE" and major.rule == "allI":
        return instantiate_term(major.premises[0], major.meta.eigen, node.meta.term)
    if r == "exE" and major.rule == "exI":
        wit = major.premises[0]
        minor = instantiate_term(node.premises[1], node.meta.eigen, major.meta.term)
        return subst_assumption(minor, node.meta.s, wit)
    if r == "allpE" and major.rule == "allpI":
        return instantiate_prop(major.premises[0], major.meta.eigen, node.meta.inst)
    if r == "expE" and major.rule == "expI":
        wit = major.premises[0]
        minor = instantiate_prop(node.premises[1], node.meta.eigen, major.meta.inst)
        return subst_assumption(minor, node.meta.s, wit)
    return None


def eq_beta_redex(node: Derivation) -> Derivation | None:
    """The equality beta rule: reflexivity elimination vanishes."""
    if node.rule == "eqE" and node.premises[0].rule == "eqI":
        eqf = node.premises[0].concl
        if eqf.lhs == eqf.rhs and node.concl == node.premises[1].concl:
            return node.premises[1]
    return None


def eq_eta_contract(node: Derivation) -> Derivation | None:
    """=E(h: t=u, =I: t=t) at the diagonal pattern collapses to =I: u=u."""
    if node.rule != "eqE":
        return None
    eq_prem, main = node.premises
    if eq_prem.rule != "assume" or main.rule != "eqI":
        return None
    if not isinstance(node.concl, Eq) or node.concl.lhs != node.concl.rhs:
        return None
    t = main.meta.term
    eqf = eq_prem.concl
    if not (isinstance(eqf, Eq) and eqf.lhs == t):
        return None
    return nd("eqI", M(term=eqf.rhs), [])


def eq_eta_expansions(node: Derivation, hyp_pool) -> list[Derivation]:
    """=I: u=u expands against a hypothesis t=u from the pool."""
    if node.rule != "eqI":
        return []
    u = node.meta.term
    out = []
    for label, eqf in hyp_pool:
        if isinstance(eqf, Eq) and eqf.rhs == u:
            cand = nd(
                "eqE",
                M(pattern=Eq(BVar(0), BVar(0))),
                [assume(label, eqf), nd("eqI", M(term=eqf.lhs), [])],
            )
            out.append(cand)
    return out


def eta_expansions(node: Derivation) -> list[Derivation]:
    """Standard eta expansions, one per connective, on non-introduction nodes."""
    f = node.concl
    if node.is_sc or node.rule in R.ND_INTROS:
        return []
    taken = set(all_labels(node)) | free_ind_vars(f) | free_prop_vars(f)
    for _, n2 in node.nodes():
        taken |= free_ind_vars(n2.concl) | free_prop_vars(n2.concl)
    out = []
    if isinstance(f, Imp):
        r = fresh_name("h", taken)
        out.append(nd("impI", M(label=r, formula=f.left),
                      [nd("impE", M(), [node, assume(r, f.left)])]))
    elif isinstance(f, And):
        out.append(nd("andI", M(), [nd("andE1", M(), [node]), nd("andE2", M(), [node])]))
    elif isinstance(f, Or):
        r1 = fresh_name("h", taken)
        r2 = fresh_name("h", taken | {r1})
        out.append(nd("orE", M(p=r1, q=r2), [
            node,
            nd("orI1", M(formula=f.right), [assume(r1, f.left)]),
            nd("orI2", M(formula=f.left), [assume(r2, f.right)]),
        ]))
    elif isinstance(f, ForallI):
        e = fresh_name(f.hint or "x", taken)
        out.append(nd("allI", M(eigen=e), [nd("allE", M(term=Var(e)), [node])]))
    elif isinstance(f, ExistsI):
        e = fresh_name(f.hint or "x", taken)
        s = fresh_name("h", taken | {e})
        body = open_ind(f.body, Var(e))
        out.append(nd("exE", M(s=s, eigen=e),
                      [node, nd("exI", M(term=Var(e), formula=f), [assume(s, body)])]))
    elif isinstance(f, ForallP):
        q = fresh_name(f.hint or "q", taken)
        out.append(nd("allpI", M(eigen=q), [nd("allpE", M(inst=PropVar(q)), [node])]))
    elif isinstance(f, ExistsP):
        q = fresh_name(f.hint or "q", taken)
        s = fresh_name("h", taken | {q})
        body = open_prop(f.body, PropVar(q))
        out.append(nd("expE", M(s=s, eigen=q),
                      [node, nd("expI", M(inst=PropVar(q), formula=f), [assume(s, body)])]))
    return [c for c in out if check(c).ok]


def _freshen_against(g: Derivation, others: list[Derivation]) -> Derivation:
    labels = frozenset()
    vs: set[str] = set()
    for o in others:
        labels |= all_labels(o)
        for _, n2 in o.nodes():
            vs |= free_ind_vars(n2.concl) | free_prop_vars(n2.concl)
    clash_l = frozenset(discharge_labels(g)) & labels
    if clash_l:
        g = freshen_labels(g, clash_l)
    clash_e = all_eigenvars(g) & frozenset(vs)
    if clash_e:
        g = freshen_eigens(g, clash_e)
    return g


def gen_elim_absorb(node: Derivation, slot: int) -> list[Derivation]:
    """Permute a generalized elimination below the rule it feeds.

    node = rho(..., G(major, minors), ...) becomes
    G(major, rho(..., minor_i, ...), ...); the other premises of rho are
    duplicated into every minor branch.
    """
    if node.is_sc or not node.premises:
        return []
    g = node.premises[slot]
    if g.rule not in R.GEN_ELIMS:
        return []
    others = [p for i, p in enumerate(node.premises) if i != slot]
    g = _freshen_against(g, others)
    minor_slots = R.GEN_ELIMS[g.rule]
    new_minors = {}
    for ms in minor_slots:
        prem = list(node.premises)
        prem[slot] = g.premises[ms]
        try:
            new_minors[ms] = nd(node.rule, node.meta, prem)
        except SchemaError:
            return []
    gprem = [new_minors.get(i, p) for i, p in enumerate(g.premises)]
    try:
        cand = nd(g.rule, g.meta, gprem)
    except SchemaError:
        return []
    if cand.concl != node.concl or not check(cand).ok:
        return []
    try:
        if open_assumptions(cand) != open_assumptions(node):
            return []
    except CheckError:
        return []
    return [cand]


def gen_elim_extrude(node: Derivation) -> list[Derivation]:
    """Inverse of gen_elim_absorb: pull an aligned rule out of every minor."""
    if node.is_sc or node.rule not in R.GEN_ELIMS:
        return []
    minor_slots = R.GEN_ELIMS[node.rule]
    minors = [node.premises[ms] for ms in minor_slots]
    first = minors[0]
    if not first.premises or any(
        m.rule != first.rule or m.meta != first.meta or len(m.premises) != len(first.premises)
        for m in minors
    ):
        return []
    out = []
    labels = set(discharge_labels(node))
    for slot in range(len(first.premises)):
        if any(
            m.premises[k] != first.premises[k]
            for m in minors[1:]
            for k in range(len(first.premises))
            if k != slot
        ):
            continue
        # the hoisted side premises must not use the discharged labels
        shared_ok = True
        for k in range(len(first.premises)):
            if k == slot:
                continue
            if labels & {l for l, _ in open_assumptions(first.premises[k])}:
                shared_ok = False
        if not shared_ok:
            continue
        gprem = list(node.premises)
        for ms, m in zip(minor_slots, minors):
            gprem[ms] = m.premises[slot]
        try:
            inner = nd(node.rule, node.meta, gprem)
            prem = list(first.premises)
            prem[slot] = inner
            cand = nd(first.rule, first.meta, prem)
        except SchemaError:
            continue
        if cand.concl != node.concl or not check(cand).ok:
            continue
        try:
            if open_assumptions(cand) != open_assumptions(node):
                continue
        except CheckError:
            continue
        out.append(cand)
    return _dedup(out)


def perm_conv_redex(node: Derivation) -> Derivation | None:
    """Oriented permutative conversion: a generalized elimination feeding
    the major premiss of an elimination moves below it."""
    if node.is_sc or node.rule not in R.ND_ELIMS:
        return None
    major_slot = R.ND_ELIMS[node.rule]
    if node.premises[major_slot].rule not in R.GEN_ELIMS:
        return None
    res = gen_elim_absorb(node, major_slot)
    return res[0] if res else None


def permutative_conversion_steps(d: Derivation) -> list[tuple[Derivation, RewriteStep]]:
    out = []
    for path, node in d.nodes():
        red = perm_conv_redex(node)
        if red is not None:
            whole = d.replace_at(path, red)
            out.append((whole, RewriteStep("perm-conv", path, d, whole)))
    return out


def _beta_or_eqbeta(node: Derivation) -> tuple[str, Derivation] | None:
    red = beta_redex(node)
    if red is not None:
        return ("beta", red)
    red = eq_beta_redex(node)
    if red is not None:
        return ("eq-beta", red)
    return None


def _postorder(d: Derivation, path=()):
    for i, p in enumerate(d.premises):
        yield from _postorder(p, path + (i,))
    yield path, d


def normalize_nd_step(d: Derivation) -> tuple[Derivation, RewriteStep] | None:
    """Leftmost-innermost beta first, then the first permutative conversion."""
    for path, node in _postorder(d):
        hit = _beta_or_eqbeta(node)
        if hit:
            kind, red = hit
            out = d.replace_at(path, red)
            return out, RewriteStep(kind, path, d, out)
    for path, node in _postorder(d):
        red = perm_conv_redex(node)
        if red is not None:
            out = d.replace_at(path, red)
            return out, RewriteStep("perm-conv", path, d, out)
    return None


@functools.lru_cache(maxsize=None)
def normalize_nd(d: Derivation, cap: int = 20000) -> Derivation:
    """Prawitz-style normal form: no beta redex, no standard permutative
    conversion redex.  Eta is never applied here."""
    n = 0
    while True:
        nxt = normalize_nd_step(d)
        if nxt is None:
            return d
        d = nxt[0]
        n += 1
        if n > cap:
            raise RewriteBudgetError("normalization exceeded the step cap")


def normalize_nd_trace(d: Derivation, cap: int = 20000):
    steps = []
    while True:
        nxt = normalize_nd_step(d)
        if nxt is None:
            return d, steps
        d, st = nxt
        steps.append(st)
        if len(steps) > cap:
            raise RewriteBudgetError("normalization exceeded the step cap")


def normalize_nd_random(d: Derivation, rng, cap: int = 20000) -> Derivation:
    """Normal form under a randomized redex choice (confluence testing)."""
    n = 0
    while True:
        redexes = []
        for path, node in _postorder(d):
            hit = _beta_or_eqbeta(node)
            if hit:
                redexes.append((path, hit[1]))
            red = perm_conv_redex(node)
            if red is not None:
                redexes.append((path, red))
        if not redexes:
            return d
        path, red = redexes[rng.randrange(len(redexes))]
        d = d.replace_at(path, red)
        n += 1
        if n > cap:
            raise RewriteBudgetError("normalization exceeded the step cap")


def eq_beta_eta_steps(d: Derivation) -> list[tuple[Derivation, RewriteStep]]:
    """All one-step applications of the equality beta/eta schemas."""
    out = []
    opens = list(open_assumptions(d)) if not d.is_sc else []
    for path, node in d.nodes():
        red = eq_beta_redex(node)
        if red is not None:
            whole = d.replace_at(path, red)
            out.append((whole, RewriteStep("eq-beta", path, d, whole)))
        red = eq_eta_contract(node)
        if red is not None:
            whole = d.replace_at(path, red)
            out.append((whole, RewriteStep("eq-eta", path, d, whole)))
        for exp in eq_eta_expansions(node, opens):
            whole = d.replace_at(path, exp)
            out.append((whole, RewriteStep("eq-eta", path, d, whole, reverse=True)))
    return out


# ---------------------------------------------------------------------------
# Subformula scanner


def _closure_with_bodies(fs):
    closure = set()
    for f in fs:
        closure |= subformulas(f)
    return closure


def _instance_match(body: Formula, f: Formula, k: int, seen: dict) -> bool:
    """Does f equal body with bound index k consistently instantiated?"""
    from .syntax import (
        Atom, BProp, BVar, TrueF as _T, PropVar as _P,
    )

    def term_match(bt, ft) -> bool:
        if isinstance(bt, BVar) and bt.index == k:
            if "t" in seen:
                return seen["t"] == ft
            seen["t"] = ft
            return True
        if type(bt) is not type(ft):
            return False
        if isinstance(bt, Var):
            return bt == ft
        if isinstance(bt, BVar):
            return bt == ft
        return bt.fn == ft.fn and len(bt.args) == len(ft.args) and all(
            term_match(x, y) for x, y in zip(bt.args, ft.args)
        )

    if type(body) is not type(f):
        return False
    if isinstance(body, Atom):
        return body.pred == f.pred and len(body.args) == len(f.args) and all(
            term_match(x, y) for x, y in zip(body.args, f.args)
        )
    if isinstance(body, Eq):
        return term_match(body.lhs, f.lhs) and term_match(body.rhs, f.rhs)
    if isinstance(body, (And, Or, Imp)):
        return _instance_match(body.left, f.left, k, seen) and _instance_match(
            body.right, f.right, k, seen
        )
    if isinstance(body, (ForallI, ExistsI)):
        return _instance_match(body.body, f.body, k + 1, seen)
    if isinstance(body, (ForallP, ExistsP)):
        return _instance_match(body.body, f.body, k, seen)
    return body == f


def satisfies_subformula_property(d: Derivation) -> bool:
    """Every formula in the tree is a subformula of the conclusion or of an
    open assumption (quantified subformulas match up to instantiation)."""
    roots = [d.concl] + [a for _, a in open_assumptions(d)]
    closure = _closure_with_bodies(roots)
    bodies = [f for f in closure if isinstance(f, (ForallI, ExistsI))]
    for _, node in d.nodes():
        f = node.concl
        if f in closure:
            continue
        if any(_instance_match(b.body, f, 0, {}) for b in bodies):
            continue
        return False
    return True


# ---------------------------------------------------------------------------
# Bounded closure equivalence for natural deduction


def _nd_local_variants(node: Derivation, hyp_pool) -> list[Derivation]:
    out = []
    out.extend(eta_expansions(node))
    red = eq_eta_contract(node)
    if red is not None:
        out.append(red)
    out.extend(eq_eta_expansions(node, hyp_pool))
    for slot in range(len(node.premises)):
        out.extend(gen_elim_absorb(node, slot))
    out.extend(gen_elim_extrude(node))
    return out


def nd_moves(d: Derivation, hyp_pool=(), extra_moves=()) -> list[tuple[Derivation, RewriteStep]]:
    out = []
    seen = set()
    for path, node in d.nodes():
        for cand in _nd_local_variants(node, hyp_pool):
            whole = d.replace_at(path, cand)
            k = canonical_key(whole)
            if k in seen:
                continue
            seen.add(k)
            out.append((whole, RewriteStep("eta/perm", path, d, whole)))
    for gen in extra_moves:
        for whole, st in gen(d):
            k = canonical_key(whole)
            if k in seen:
                continue
            seen.add(k)
            out.append((whole, st))
    return out


def _opens_compatible(a: Derivation, b: Derivation, ambient) -> bool:
    if a.concl != b.concl:
        return False
    oa, ob = dict(open_assumptions(a)), dict(open_assumptions(b))
    amb = dict(ambient)
    for l in set(oa) | set(ob):
        if l in oa and l in ob:
            if oa[l] != ob[l]:
                return False
        else:
            f = oa.get(l, ob.get(l))
            if not isinstance(f, Eq) and amb.get(l) != f:
                return False
    return True


def equiv_nat(
    a: Derivation,
    b: Derivation,
    budget: int = 100000,
    extra_moves=(),
    ambient=(),
) -> EquivVerdict:
    """Bounded closure over beta (via the normalizer), eta, the equality
    rules, generalized-elimination permutations and any supplied naturality
    square moves.

    Derivations are compared at the same conclusion; open assumptions may
    differ by equation hypotheses or by the declared ambient assumptions
    (the arrows of the equational formula category carry their equation
    set, and derivations need not use all of it)."""
    if not _opens_compatible(a, b, ambient):
        return EquivVerdict(False)

    hyp_pool = []
    seen_h = set()
    for x in (a, b):
        for l, f2 in open_assumptions(x):
            if isinstance(f2, Eq) and (l, f2) not in seen_h:
                seen_h.add((l, f2))
                hyp_pool.append((l, f2))
    for l, f2 in dict(ambient).items():
        if isinstance(f2, Eq) and (l, f2) not in seen_h:
            seen_h.add((l, f2))
            hyp_pool.append((l, f2))

    def start(x):
        nx, trace = normalize_nd_trace(x)
        return nx, trace

    def neighbors(x):
        out = []
        for y, st in nd_moves(x, hyp_pool, extra_moves):
            ny, extra = normalize_nd_trace(y)
            out.append((ny, [st] + extra))
        return out

    return _meet_bfs(a, b, start, canonical_key, neighbors, budget)


def equiv_nd_norm(a: Derivation, b: Derivation) -> bool:
    """Decision on the Prawitz fragment: equal normal forms."""
    return canonical_key(normalize_nd(a)) == canonical_key(normalize_nd(b))


def equiv_nd_bfs(a: Derivation, b: Derivation, budget: int = 50000) -> EquivVerdict:
    """Bounded-search oracle for the Prawitz fragment (beta and standard
    permutative conversions only, applied one step at a time)."""

    def start(x):
        return x, []

    def neighbors(x):
        out = []
        for path, node in _postorder(x):
            hit = _beta_or_eqbeta(node)
            if hit:
                kind, red = hit
                y = x.replace_at(path, red)
                out.append((y, [RewriteStep(kind, path, x, y)]))
            red = perm_conv_redex(node)
            if red is not None:
                y = x.replace_at(path, red)
                out.append((y, [RewriteStep("perm-conv", path, x, y)]))
        return out

    return _meet_bfs(a, b, start, canonical_key, neighbors, budget)
