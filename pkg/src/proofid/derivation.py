"""Rule-labeled derivation trees for both calculi.

A node stores its rule tag, rule-specific meta, premises and its own
conclusion (a Sequent for sequent-calculus nodes, a Formula for natural
deduction).  Natural-deduction open assumptions are recovered from the
leaves; discharge is by label, and a label may be discharged at most once
along any root-to-leaf path (parallel reuse is fine, plugging duplicates
subderivations).

Holes ("dashed axioms") are named leaves carrying a declared root; all
occurrences of one name must agree, and plugging replaces every
occurrence.
"""

from __future__ import annotations

import functools
from dataclasses import dataclass, field
from typing import Callable, Iterator, Mapping

from . import rules as R
from .syntax import (
    And,
    Atom,
    BProp,
    BVar,
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
    Term,
    TrueF,
    Var,
    App,
    formula_map_terms,
    free_ind_vars,
    free_prop_vars,
    fresh_name,
    print_formula,
    print_sequent,
    subst_prop,
    term_subst,
    Substitution,
)
from .rules import M, Meta, SchemaError


class CheckError(Exception):
    pass


@dataclass(frozen=True)
class Derivation:
    rule: str
    meta: Meta
    premises: tuple["Derivation", ...]
    concl: Sequent | Formula

    def __post_init__(self):
        h = hash((self.rule, self.meta, tuple(hash(p) for p in self.premises), self.concl))
        object.__setattr__(self, "_hash", h)

    def __hash__(self):
        return self._hash

    @property
    def is_sc(self) -> bool:
        return isinstance(self.concl, Sequent)

    @property
    def is_hole(self) -> bool:
        return self.rule == "hole"

    def size(self) -> int:
        return 1 + sum(p.size() for p in self.premises)

    def nodes(self, path: tuple[int, ...] = ()) -> Iterator[tuple[tuple[int, ...], "Derivation"]]:
        yield path, self
        for i, p in enumerate(self.premises):
            yield from p.nodes(path + (i,))

    def at(self, path: tuple[int, ...]) -> "Derivation":
        d = self
        for i in path:
            d = d.premises[i]
        return d

    def replace_at(self, path: tuple[int, ...], sub: "Derivation") -> "Derivation":
        """Replace the subtree at `path`; the new subtree must keep the root."""
        if not path:
            return sub
        i, rest = path[0], path[1:]
        prem = list(self.premises)
        prem[i] = prem[i].replace_at(rest, sub)
        return Derivation(self.rule, self.meta, tuple(prem), self.concl)

    def __repr__(self):
        root = print_sequent(self.concl) if self.is_sc else print_formula(self.concl)
        return f"<{self.rule}: {root}>"


# ---------------------------------------------------------------------------
# Constructors


def sc(rule: str, meta: Meta, premises: list[Derivation] | tuple[Derivation, ...]) -> Derivation:
    premises = tuple(premises)
    concl = R.sc_apply(rule, meta, [p.concl for p in premises])
    return Derivation(rule, meta, premises, concl)


def ax(a: Formula) -> Derivation:
    return Derivation("ax", M(), (), Sequent((a,), a))


def sc_hole(hole_id: str, seq: Sequent) -> Derivation:
    return Derivation("hole", M(hole=hole_id), (), seq)


def nd(rule: str, meta: Meta, premises: list[Derivation] | tuple[Derivation, ...]) -> Derivation:
    premises = tuple(premises)
    concl = R.nd_apply(rule, meta, [p.concl for p in premises])
    return Derivation(rule, meta, premises, concl)


def assume(label: str, a: Formula) -> Derivation:
    return Derivation("assume", M(label=label), (), a)


def nd_hole(hole_id: str, assumes: Mapping[str, Formula] | tuple, concl: Formula) -> Derivation:
    if isinstance(assumes, Mapping):
        assumes = tuple(sorted(assumes.items()))
    return Derivation("hole", M(hole=hole_id, assumes=tuple(assumes)), (), concl)


# ---------------------------------------------------------------------------
# Open assumptions (natural deduction)


@functools.lru_cache(maxsize=None)
def open_assumptions(d: Derivation) -> tuple[tuple[str, Formula], ...]:
    """Sorted (label, formula) pairs open at the root.

    Raises CheckError when one label is used at two different formulas.
    """
    if d.is_sc:
        return ()
    if d.rule == "assume":
        return ((d.meta.label, d.concl),)
    if d.rule == "hole":
        return tuple(sorted(d.meta.assumes))
    out: dict[str, Formula] = {}
    discharged = _discharge_map(d)
    for slot, p in enumerate(d.premises):
        drop = discharged.get(slot, frozenset())
        for label, a in open_assumptions(p):
            if label in drop:
                continue
            if label in out and out[label] != a:
                raise CheckError(f"label {label} used at {print_formula(out[label])} and {print_formula(a)}")
            out[label] = a
    return tuple(sorted(out.items()))


def _discharge_map(d: Derivation) -> dict[int, frozenset[str]]:
    spec = R.ND_DISCHARGES.get(d.rule, ())
    out: dict[int, set[str]] = {}
    for slot, key in spec:
        out.setdefault(slot, set()).add(d.meta.get(key))
    return {k: frozenset(v) for k, v in out.items()}


def discharge_labels(d: Derivation) -> list[str]:
    """Labels this node itself discharges."""
    return [d.meta.get(key) for _, key in R.ND_DISCHARGES.get(d.rule, ())]


@functools.lru_cache(maxsize=None)
def all_discharge_labels(d: Derivation) -> frozenset[str]:
    out = frozenset(discharge_labels(d))
    for p in d.premises:
        out |= all_discharge_labels(p)
    return out


@functools.lru_cache(maxsize=None)
def all_labels(d: Derivation) -> frozenset[str]:
    out = frozenset(discharge_labels(d))
    if d.rule == "assume":
        out |= {d.meta.label}
    if d.rule == "hole" and not d.is_sc:
        out |= {l for l, _ in d.meta.assumes}
    for p in d.premises:
        out |= all_labels(p)
    return out


@functools.lru_cache(maxsize=None)
def all_eigenvars(d: Derivation) -> frozenset[str]:
    out = frozenset()
    if d.meta.get("eigen") is not None:
        out |= {d.meta.eigen}
    for p in d.premises:
        out |= all_eigenvars(p)
    return out


def judgment(d: Derivation) -> tuple[tuple[tuple[str, Formula], ...], Formula]:
    """Root judgment of an ND derivation: open assumptions plus conclusion."""
    return open_assumptions(d), d.concl


# ---------------------------------------------------------------------------
# Checking


@dataclass
class Report:
    violations: list[tuple[tuple[int, ...], str]] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, path, msg):
        self.violations.append((tuple(path), msg))

    def __str__(self):
        if self.ok:
            return "ok"
        return "\n".join(f"at {'/'.join(map(str, p)) or 'root'}: {m}" for p, m in self.violations)


def check(d: Derivation) -> Report:
    """Verify every local schema, side condition, label and hole invariant."""
    rep = Report()
    holes: dict[str, Sequent | tuple] = {}
    _check_walk(d, (), rep, holes)
    return rep


def _check_walk(d: Derivation, path, rep: Report, holes) -> None:
    for i, p in enumerate(d.premises):
        if p.is_sc != d.is_sc:
            rep.add(path, f"{d.rule}: premise {i} belongs to the other calculus")
        _check_walk(p, path + (i,), rep, holes)

    if d.rule == "hole":
        key = d.meta.hole
        decl = d.concl if d.is_sc else (d.meta.assumes, d.concl)
        if key in holes and holes[key] != decl:
            rep.add(path, f"hole {key} declared with two different roots")
        holes[key] = decl
        return
    if d.rule in ("ax", "assume"):
        return

    if d.is_sc:
        try:
            want = R.sc_apply(d.rule, d.meta, [p.concl for p in d.premises])
            if want != d.concl:
                rep.add(path, f"{d.rule}: stored conclusion differs from schema")
        except SchemaError as e:
            rep.add(path, f"{d.rule}: {e}")
            return
        bad = R.sc_eigen_violation(d.rule, d.meta, d.concl)
        if bad:
            rep.add(path, bad)
        return

    # natural deduction
    try:
        want = R.nd_apply(d.rule, d.meta, [p.concl for p in d.premises])
        if want != d.concl:
            rep.add(path, f"{d.rule}: stored conclusion differs from schema")
    except SchemaError as e:
        rep.add(path, f"{d.rule}: {e}")
        return

    try:
        opens = dict(open_assumptions(d))
    except CheckError as e:
        rep.add(path, str(e))
        return

    # nested discharge of one label is ambiguous, reject
    for lbl in discharge_labels(d):
        for p in d.premises:
            if lbl in all_discharge_labels(p):
                rep.add(path, f"label {lbl} discharged twice on one path")

    # a discharged label must carry the right formula where it is open
    for slot, key in R.ND_DISCHARGES.get(d.rule, ()):
        lbl = d.meta.get(key)
        prem_opens = dict(open_assumptions(d.premises[slot]))
        if lbl in prem_opens:
            want_a = R.nd_discharged_assumption(
                d.rule, d.meta, [p.concl for p in d.premises], slot, key
            )
            if prem_opens[lbl] != want_a:
                rep.add(path, f"{d.rule}: label {lbl} carries the wrong assumption")

    # eigenvariable side conditions
    if d.rule == "allI":
        e = d.meta.eigen
        if any(e in free_ind_vars(a) for _, a in open_assumptions(d)):
            rep.add(path, f"allI: eigenvariable {e} occurs in an open assumption")
    elif d.rule == "exE":
        e = d.meta.eigen
        vs = free_ind_vars(d.concl) | free_ind_vars(d.premises[0].concl)
        for _, a in open_assumptions(d):
            vs |= free_ind_vars(a)
        if e in vs:
            rep.add(path, f"exE: eigenvariable {e} escapes")
    elif d.rule == "allpI":
        pv = d.meta.eigen
        if any(pv in free_prop_vars(a) for _, a in open_assumptions(d)):
            rep.add(path, f"allpI: eigenvariable {pv} occurs in an open assumption")
    elif d.rule == "expE":
        pv = d.meta.eigen
        vs = free_prop_vars(d.concl) | free_prop_vars(d.premises[0].concl)
        for _, a in open_assumptions(d):
            vs |= free_prop_vars(a)
        if pv in vs:
            rep.add(path, f"expE: eigenvariable {pv} escapes")


def checked(d: Derivation) -> Derivation:
    rep = check(d)
    if not rep.ok:
        raise CheckError(str(rep))
    return d


# ---------------------------------------------------------------------------
# Mapping over formulas and terms (instantiation, eigen renaming)


def _meta_map(meta: Meta, ffn: Callable[[Formula], Formula], tfn: Callable[[Term], Term]) -> Meta:
    items = []
    for k, v in meta.items:
        if k in ("formula", "inst", "pattern") and v is not None and not isinstance(v, (str, int)):
            items.append((k, ffn(v)))
        elif k == "term":
            items.append((k, tfn(v)))
        elif k == "assumes":
            items.append((k, tuple((l, ffn(a)) for l, a in v)))
        else:
            items.append((k, v))
    return Meta(tuple(sorted(items)))


def deriv_map(d: Derivation, ffn, tfn) -> Derivation:
    prem = tuple(deriv_map(p, ffn, tfn) for p in d.premises)
    meta = _meta_map(d.meta, ffn, tfn)
    if d.is_sc:
        concl = Sequent(tuple(ffn(a) for a in d.concl.ante), ffn(d.concl.succ))
    else:
        concl = ffn(d.concl)
    return Derivation(d.rule, meta, prem, concl)


def rename_eigen(d: Derivation, old: str, new: str) -> Derivation:
    """Rename an individual eigenvariable throughout a subtree."""
    theta = Substitution.of({old: Var(new)})
    ffn = lambda a: formula_map_terms(a, lambda t: term_subst(t, theta))
    tfn = lambda t: term_subst(t, theta)
    out = deriv_map(d, ffn, tfn)
    return _rename_eigen_meta(out, old, new)


def _rename_eigen_meta(d: Derivation, old: str, new: str) -> Derivation:
    prem = tuple(_rename_eigen_meta(p, old, new) for p in d.premises)
    meta = d.meta
    if meta.get("eigen") == old and d.rule in ("allR", "exL", "allI", "exE"):
        meta = meta.replace(eigen=new)
    return Derivation(d.rule, meta, prem, d.concl)


def rename_prop_eigen(d: Derivation, old: str, new: str) -> Derivation:
    ffn = lambda a: subst_prop(a, old, PropVar(new))
    out = deriv_map(d, ffn, lambda t: t)
    return _rename_prop_eigen_meta(out, old, new)


def _rename_prop_eigen_meta(d: Derivation, old: str, new: str) -> Derivation:
    prem = tuple(_rename_prop_eigen_meta(p, old, new) for p in d.premises)
    meta = d.meta
    if meta.get("eigen") == old and d.rule in ("allpR", "expL", "allpI", "expE"):
        meta = meta.replace(eigen=new)
    return Derivation(d.rule, meta, prem, d.concl)


def rename_label(d: Derivation, old: str, new: str) -> Derivation:
    prem = tuple(rename_label(p, old, new) for p in d.premises)
    meta = d.meta
    if d.rule == "assume" and meta.label == old:
        meta = meta.replace(label=new)
    for _, key in R.ND_DISCHARGES.get(d.rule, ()):
        if meta.get(key) == old:
            meta = meta.replace(**{key: new})
    if d.rule == "hole" and not d.is_sc:
        assumes = tuple((new if l == old else l, a) for l, a in meta.assumes)
        meta = meta.replace(assumes=assumes)
    return Derivation(d.rule, meta, prem, d.concl)


def freshen_eigens(d: Derivation, avoid: frozenset[str]) -> Derivation:
    """Rename eigenvariables clashing with `avoid` (and make them distinct)."""
    taken = set(avoid) | set(all_eigenvars(d)) | _free_names(d)
    for e in sorted(all_eigenvars(d)):
        if e in avoid:
            new = fresh_name(e, taken)
            taken.add(new)
            d = _rename_any_eigen(d, e, new)
    return d


def _rename_any_eigen(d: Derivation, old: str, new: str) -> Derivation:
    # an eigenvariable is individual or propositional depending on its rule
    kinds = set()
    for _, node in d.nodes():
        if node.meta.get("eigen") == old:
            if node.rule in ("allpR", "expL", "allpI", "expE"):
                kinds.add("prop")
            else:
                kinds.add("ind")
    out = d
    if "ind" in kinds:
        out = rename_eigen(out, old, new)
    if "prop" in kinds:
        out = rename_prop_eigen(out, old, new)
    return out


def freshen_labels(d: Derivation, avoid: frozenset[str]) -> Derivation:
    taken = set(avoid) | set(all_labels(d))
    for lbl in sorted(all_discharge_labels(d)):
        if lbl in avoid:
            new = fresh_name(lbl, taken)
            taken.add(new)
            d = rename_label(d, lbl, new)
    return d


def _free_names(d: Derivation) -> set[str]:
    out: set[str] = set()
    for _, node in d.nodes():
        if node.is_sc:
            out |= R.sequent_ind_vars(node.concl) | R.sequent_prop_vars(node.concl)
        else:
            out |= free_ind_vars(node.concl) | free_prop_vars(node.concl)
    return out


# ---------------------------------------------------------------------------
# Instantiation (spec: instantiate_term / instantiate_prop)


def instantiate_term(d: Derivation, x: str, t: Term) -> Derivation:
    """Apply x := t to every formula and term in the derivation."""
    clash = free_ind_vars_term(t) | {x}
    d = freshen_eigens(d, frozenset(clash) & all_eigenvars(d))
    theta = Substitution.of({x: t})
    ffn = lambda a: formula_map_terms(a, lambda u: term_subst(u, theta))
    tfn = lambda u: term_subst(u, theta)
    return deriv_map(d, ffn, tfn)


def instantiate_prop(d: Derivation, p: str, c: Formula) -> Derivation:
    clash = free_prop_vars(c) | {p}
    d = freshen_eigens(d, frozenset(clash) & all_eigenvars(d))
    clash_ind = free_ind_vars(c)
    d = freshen_eigens(d, frozenset(clash_ind) & all_eigenvars(d))
    return deriv_map(d, lambda a: subst_prop(a, p, c), lambda t: t)


def free_ind_vars_term(t: Term) -> set[str]:
    from .syntax import term_free_vars

    return set(term_free_vars(t))


def instantiate_subst(d: Derivation, theta: Substitution) -> Derivation:
    clash = {x for x, _ in theta} | {
        v for _, t in theta for v in free_ind_vars_term(t)
    }
    d = freshen_eigens(d, frozenset(clash) & all_eigenvars(d))
    ffn = lambda a: formula_map_terms(a, lambda u: term_subst(u, theta))
    return deriv_map(d, ffn, lambda u: term_subst(u, theta))


# ---------------------------------------------------------------------------
# Holes and plugging


def holes(d: Derivation) -> dict[str, Sequent | tuple]:
    out = {}
    for _, node in d.nodes():
        if node.is_hole:
            out[node.meta.hole] = node.concl if node.is_sc else (node.meta.assumes, node.concl)
    return out


def plug(outer: Derivation, inner: Derivation, hole_id: str | None = None) -> Derivation:
    """Replace every occurrence of one hole by `inner`.

    When `hole_id` is omitted, the unique hole whose declared root matches
    the root of `inner` is used.
    """
    hs = holes(outer)
    if hole_id is None:
        if inner.is_sc:
            matching = [h for h, s in hs.items() if s == inner.concl]
        else:
            inner_opens = dict(open_assumptions(inner))
            matching = []
            for h, decl in hs.items():
                if isinstance(decl, Sequent):
                    continue
                assumes, conc = decl
                decl_map = dict(assumes)
                if conc == inner.concl and all(
                    decl_map.get(l, a) == a for l, a in inner_opens.items()
                ):
                    matching.append(h)
        if len(matching) != 1:
            raise CheckError(
                f"plug: {'no' if not matching else 'several'} holes match the inner root"
            )
        hole_id = matching[0]
    if hole_id not in hs:
        raise CheckError(f"plug: no hole named {hole_id}")
    decl = hs[hole_id]

    if inner.is_sc:
        if decl != inner.concl:
            raise CheckError("plug: inner root differs from the declared sequent")
        return _plug_walk(outer, hole_id, inner)

    assumes, conc = decl
    decl_map = dict(assumes)
    if conc != inner.concl:
        raise CheckError("plug: inner conclusion differs from the declared one")
    inner_opens = dict(open_assumptions(inner))
    for l, a in inner_opens.items():
        if l in decl_map and decl_map[l] != a:
            raise CheckError(f"plug: assumption {l} differs from the declared one")
    undeclared = {l for l in inner_opens if l not in decl_map}
    clash = all_discharge_labels(outer) & undeclared
    if clash:
        outer = freshen_labels(outer, frozenset(clash))
    eig_clash = all_eigenvars(outer) & frozenset(
        v for a in inner_opens.values() for v in free_ind_vars(a) | free_prop_vars(a)
    )
    if eig_clash:
        outer = freshen_eigens(outer, frozenset(eig_clash))
    return _plug_walk(outer, hole_id, inner)


def _plug_walk(d: Derivation, hole_id: str, inner: Derivation) -> Derivation:
    if d.is_hole and d.meta.hole == hole_id:
        return inner
    if not d.premises:
        return d
    prem = tuple(_plug_walk(p, hole_id, inner) for p in d.premises)
    if prem == d.premises:
        return d
    return Derivation(d.rule, d.meta, prem, d.concl)


def plug_all(outer: Derivation, fills: Mapping[str, Derivation]) -> Derivation:
    out = outer
    for h, inner in sorted(fills.items()):
        out = plug(out, inner, h)
    return out


def subst_assumption(d: Derivation, label: str, repl: Derivation) -> Derivation:
    """Replace every open occurrence of assume(label) by `repl` (ND).

    The replacement's open assumptions stay open: clashing discharges and
    eigenvariables in `d` are renamed first.
    """
    if d.is_sc or repl.is_sc:
        raise CheckError("subst_assumption is a natural-deduction operation")
    repl_opens = dict(open_assumptions(repl))
    clash = all_discharge_labels(d) & (frozenset(repl_opens) - {label})
    if clash:
        d = freshen_labels(d, frozenset(clash))
    vs: set[str] = set()
    for a in list(repl_opens.values()) + [repl.concl]:
        vs |= free_ind_vars(a) | free_prop_vars(a)
    eig = all_eigenvars(d) & frozenset(vs)
    if eig:
        d = freshen_eigens(d, frozenset(eig))
    return _subst_assumption_walk(d, label, repl)


def _subst_assumption_walk(d: Derivation, label: str, repl: Derivation) -> Derivation:
    if d.rule == "assume" and d.meta.label == label:
        return repl
    if not d.premises:
        return d
    bound = {slot for slot, key in R.ND_DISCHARGES.get(d.rule, ()) if d.meta.get(key) == label}
    prem = tuple(
        p if i in bound else _subst_assumption_walk(p, label, repl)
        for i, p in enumerate(d.premises)
    )
    if prem == d.premises:
        return d
    return Derivation(d.rule, d.meta, prem, d.concl)


# ---------------------------------------------------------------------------
# Categorical composition (sequent calculus)


def identity_derivation(a: Formula, ctx: Context = ()) -> Derivation:
    """The canonical derivation of ctx, A |- A: axiom then weakenings."""
    d = ax(a)
    for i, c in enumerate(ctx):
        d = sc("w", M(pos=i, formula=c), [d])
    return d


def projection_derivation(ctx: Context, i: int) -> Derivation:
    """The canonical derivation of ctx |- ctx[i]."""
    d = ax(ctx[i])
    for k in range(i + 1, len(ctx)):
        d = sc("w", M(pos=k - i, formula=ctx[k]), [d])
    for k in range(i - 1, -1, -1):
        d = sc("w", M(pos=0, formula=ctx[k]), [d])
    return d


def contract_block(d: Derivation, start: int, size: int) -> Derivation:
    """Collapse two adjacent equal blocks [start, start+size) and the next."""
    for k in range(size):
        d = sc("c", M(pos=start + k, pos2=start + size), [d])
    return d


def cut_compose(pi: Derivation, sigma: Derivation, ctx: Context) -> Derivation:
    """Compose arrows of the category of formulas under assumptions ctx.

    pi proves ctx, A |- B and sigma proves ctx, B |- C; the result proves
    ctx, A |- C by one cut followed by contractions collapsing the
    duplicated ctx block left to right.
    """
    k = len(ctx)
    if pi.concl.ante[:k] != ctx or sigma.concl.ante[:k] != ctx:
        raise SchemaError("cut_compose: contexts do not agree")
    if len(sigma.concl.ante) != k + 1 or sigma.concl.ante[k] != pi.concl.succ:
        raise SchemaError("cut_compose: middle formula does not agree")
    d = sc("cut", M(pos=k), [pi, sigma])
    return contract_block(d, 0, k)


def context_compose(pis: list[Derivation], sigmas: list[Derivation], src: Context) -> list[Derivation]:
    """Compose arrows of the category of contexts.

    pis[i] proves src |- B_i; each sigma_j proves B_1..B_n |- C_j.  Each
    result cuts sigma_j against pi_n .. pi_1 right to left, then contracts
    the duplicated src blocks.
    """
    n = len(pis)
    mid = tuple(p.concl.succ for p in pis)
    out = []
    for sig in sigmas:
        if sig.concl.ante != mid:
            raise SchemaError("context_compose: middle context does not agree")
        d = sig
        for i in range(n - 1, -1, -1):
            if pis[i].concl.ante != src:
                raise SchemaError("context_compose: source contexts differ")
            d = sc("cut", M(pos=i), [pis[i], d])
        for _ in range(n - 1):
            d = contract_block(d, 0, len(src))
        out.append(d)
    return out


# ---------------------------------------------------------------------------
# Canonical keys (alpha-invariant structural identity)


def _term_key(t: Term, names: dict) -> str:
    if isinstance(t, Var):
        return f"v:{names.get(t.name, t.name)}"
    if isinstance(t, BVar):
        return f"b:{t.index}"
    return f"{t.fn}({','.join(_term_key(a, names) for a in t.args)})"


def _formula_key(a: Formula, names: dict) -> str:
    if isinstance(a, Atom):
        return f"A:{a.pred}({','.join(_term_key(t, names) for t in a.args)})"
    if isinstance(a, Eq):
        return f"E({_term_key(a.lhs, names)},{_term_key(a.rhs, names)})"
    if isinstance(a, TrueF):
        return "T"
    if isinstance(a, PropVar):
        return f"P:{names.get(a.name, a.name)}"
    if isinstance(a, BProp):
        return f"q:{a.index}"
    if isinstance(a, (And, Or, Imp)):
        tag = {And: "&", Or: "|", Imp: ">"}[type(a)]
        return f"({_formula_key(a.left, names)}{tag}{_formula_key(a.right, names)})"
    tag = {ForallI: "Fi", ExistsI: "Ei", ForallP: "Fp", ExistsP: "Ep"}[type(a)]
    return f"{tag}.{_formula_key(a.body, names)}"


def canonical_key(d: Derivation) -> str:
    """Stable identity string: bound labels and eigenvariables canonicalized,
    binder hints ignored, free names kept verbatim."""
    label_map: dict[str, str] = {}
    eigen_map: dict[str, str] = {}

    def walk(node: Derivation) -> None:
        for lbl in discharge_labels(node):
            if lbl not in label_map:
                label_map[lbl] = f"!{len(label_map)}"
        if node.meta.get("eigen") is not None and node.meta.eigen not in eigen_map:
            eigen_map[node.meta.eigen] = f"${len(eigen_map)}"
        for p in node.premises:
            walk(p)

    walk(d)

    def emit(node: Derivation) -> str:
        names = eigen_map
        parts = [node.rule]
        for k, v in node.meta.items:
            if k in ("label", "p", "q", "s"):
                parts.append(f"{k}={label_map.get(v, v)}")
            elif k == "eigen":
                parts.append(f"{k}={eigen_map.get(v, v)}")
            elif k in ("formula", "inst", "pattern"):
                parts.append(f"{k}={_formula_key(v, names)}")
            elif k == "term":
                parts.append(f"{k}={_term_key(v, names)}")
            elif k == "assumes":
                parts.append(
                    "assumes=" + ";".join(f"{label_map.get(l, l)}:{_formula_key(a, names)}" for l, a in v)
                )
            else:
                parts.append(f"{k}={v}")
        if node.is_sc:
            root = ",".join(_formula_key(a, names) for a in node.concl.ante)
            root += "/" + _formula_key(node.concl.succ, names)
        else:
            root = _formula_key(node.concl, names)
        inner = " ".join(emit(p) for p in node.premises)
        return f"({' '.join(parts)}[{root}]{inner})"

    return emit(d)


# ---------------------------------------------------------------------------
# Pretty printing


def pretty(d: Derivation, indent: str = "") -> str:
    root = print_sequent(d.concl) if d.is_sc else print_formula(d.concl)
    meta_bits = []
    for k, v in d.meta.items:
        if k in ("formula", "inst", "pattern"):
            meta_bits.append(f"{k}={print_formula(v)}")
        elif k == "term":
            from .syntax import print_term

            meta_bits.append(f"{k}={print_term(v)}")
        elif k == "assumes":
            meta_bits.append("assumes={" + ", ".join(f"{l}: {print_formula(a)}" for l, a in v) + "}")
        else:
            meta_bits.append(f"{k}={v}")
    head = f"{indent}{d.rule}" + (f" [{', '.join(meta_bits)}]" if meta_bits else "")
    lines = [f"{head}  {root}"]
    for p in d.premises:
        lines.append(pretty(p, indent + "  "))
    return "\n".join(lines)
