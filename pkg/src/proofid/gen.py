"""Seeded random generators for terms, formulas and derivations.

Everything is driven by an explicit random.Random so corpus runs and
property suites are reproducible from a printed seed.
"""

from __future__ import annotations

import random

from .derivation import (
    Derivation,
    assume,
    ax,
    check,
    nd,
    open_assumptions,
    projection_derivation,
    sc,
)
from .rules import M
from .syntax import (
    And,
    App,
    Atom,
    Context,
    Eq,
    Formula,
    Imp,
    Or,
    PropVar,
    Term,
    Var,
    exists_ind,
    exists_prop,
    forall_ind,
    forall_prop,
    free_prop_vars,
    positive_occurrences_only,
)

ATOMS = ["A", "B", "C", "D", "G", "H"]


def random_term(rng: random.Random, vars_: list[str], depth: int = 2) -> Term:
    if depth <= 0 or rng.random() < 0.45:
        return Var(rng.choice(vars_))
    fn = rng.choice(["f", "g"])
    arity = 1 if fn == "f" else rng.choice([1, 2])
    return App(fn, tuple(random_term(rng, vars_, depth - 1) for _ in range(arity)))


def random_prop_formula(rng: random.Random, depth: int = 2, atoms=None) -> Formula:
    atoms = atoms or ATOMS
    if depth <= 0 or rng.random() < 0.4:
        return Atom(rng.choice(atoms))
    op = rng.choice([And, Or, Imp])
    return op(
        random_prop_formula(rng, depth - 1, atoms),
        random_prop_formula(rng, depth - 1, atoms),
    )


def random_positive_formula(rng: random.Random, p: str, depth: int = 2) -> Formula:
    """A formula with at least one, and only positive, occurrences of p."""
    while True:
        f = _grow_positive(rng, p, depth)
        if p in free_prop_vars(f) and positive_occurrences_only(f, p):
            return f


def _grow_positive(rng: random.Random, p: str, depth: int) -> Formula:
    if depth <= 0 or rng.random() < 0.35:
        return PropVar(p) if rng.random() < 0.7 else Atom(rng.choice(ATOMS))
    roll = rng.random()
    if roll < 0.3:
        return And(_grow_positive(rng, p, depth - 1), _grow_positive(rng, p, depth - 1))
    if roll < 0.55:
        return Or(_grow_positive(rng, p, depth - 1), _grow_positive(rng, p, depth - 1))
    if roll < 0.85:
        # p may not appear on the left of an implication
        return Imp(random_prop_formula(rng, depth - 1), _grow_positive(rng, p, depth - 1))
    q = rng.choice(["q1", "q2"])
    body = _grow_positive(rng, p, depth - 1)
    return forall_prop(q, body) if rng.random() < 0.5 else exists_prop(q, body)


def random_fo_formula_in(rng: random.Random, x: str, depth: int = 1) -> Formula:
    """First-order formula mentioning the variable x."""
    roll = rng.random()
    if roll < 0.4:
        return Atom("P", (Var(x),))
    if roll < 0.6:
        return Eq(Var(x), Var(x))
    if roll < 0.8:
        return Atom("Q", (Var(x), random_term(rng, [x, "y"], 1)))
    if depth <= 0:
        return Atom("P", (Var(x),))
    return And(random_fo_formula_in(rng, x, depth - 1), random_fo_formula_in(rng, x, 0))


# ---------------------------------------------------------------------------
# Sequent-calculus arrows


def random_sc_arrow(rng: random.Random, src: Context, depth: int = 2) -> Derivation:
    """A derivation of src |- X for some formula X."""
    if not src:
        raise ValueError("random_sc_arrow needs a nonempty source context")
    if depth <= 0 or rng.random() < 0.45:
        return projection_derivation(src, rng.randrange(len(src)))
    roll = rng.random()
    if roll < 0.4:
        return sc(
            "andR2",
            M(),
            [random_sc_arrow(rng, src, depth - 1), random_sc_arrow(rng, src, depth - 1)],
        )
    if roll < 0.7:
        d = random_sc_arrow(rng, src, depth - 1)
        other = random_prop_formula(rng, 1)
        side = rng.choice([1, 2])
        return sc("orR", M(side=side, formula=other), [d])
    # weaken a fresh hypothesis in, then discharge it on the right
    other = random_prop_formula(rng, 1)
    d = random_sc_arrow(rng, src, depth - 1)
    d = sc("w", M(pos=len(src), formula=other), [d])
    return sc("impR", M(pos=len(src)), [d])


def random_sc_arrow_list(rng: random.Random, src: Context, n: int, depth: int = 2):
    return [random_sc_arrow(rng, src, depth) for _ in range(n)]


def random_contexts(rng: random.Random, max_len: int = 2) -> Context:
    return tuple(Atom(rng.choice(ATOMS)) for _ in range(rng.randrange(1, max_len + 1)))


def random_sc_derivation(rng: random.Random, size: int = 8) -> Derivation:
    """A random checked sequent-calculus derivation (mixed rules)."""
    pool = [ax(Atom(rng.choice(ATOMS))) for _ in range(2)]
    for _ in range(size):
        d = rng.choice(pool)
        n = len(d.concl.ante)
        roll = rng.random()
        try:
            if roll < 0.18:
                d2 = sc("w", M(pos=rng.randrange(n + 1), formula=random_prop_formula(rng, 1)), [d])
            elif roll < 0.3 and n >= 2:
                d2 = sc("e", M(pos=rng.randrange(n - 1)), [d])
            elif roll < 0.4:
                i = rng.randrange(n)
                d2 = sc(
                    "andL",
                    M(pos=i, side=rng.choice([1, 2]), formula=random_prop_formula(rng, 1)),
                    [d],
                )
            elif roll < 0.5:
                d2 = sc("orR", M(side=rng.choice([1, 2]), formula=random_prop_formula(rng, 1)), [d])
            elif roll < 0.62:
                other = rng.choice(pool)
                d2 = sc("andR", M(), [d, other])
            elif roll < 0.74 and n >= 1:
                d2 = sc("impR", M(pos=rng.randrange(n)), [d])
            elif roll < 0.86:
                other = rng.choice(pool)
                i = rng.randrange(n)
                d2 = sc("impL", M(pos=i), [d, other])
            else:
                left = d
                right = rng.choice(pool)
                i = rng.randrange(n)
                fa = left.concl.ante[i]
                fb = right.concl.ante[0] if right.concl.ante else None
                if fb != fa or left.concl.succ != right.concl.succ:
                    continue
                d2 = sc("orL", M(pos=i), [left, right]) if left.concl.ante == right.concl.ante else None
                if d2 is None:
                    continue
        except Exception:
            continue
        pool.append(d2)
    return pool[-1]


# ---------------------------------------------------------------------------
# Natural deduction


def random_nd_from(rng: random.Random, seeds: list[Derivation], steps: int = 5) -> Derivation:
    """Grow a checked ND derivation from the given leaf derivations."""
    pool = list(seeds)
    fresh = [0]

    def new_label():
        fresh[0] += 1
        return f"g{fresh[0]}"

    for _ in range(steps):
        d = rng.choice(pool)
        roll = rng.random()
        try:
            if roll < 0.25:
                other = rng.choice(pool)
                pool.append(nd("andI", M(), [d, other]))
            elif roll < 0.4:
                pool.append(
                    nd("orI1", M(formula=random_prop_formula(rng, 1)), [d])
                    if rng.random() < 0.5
                    else nd("orI2", M(formula=random_prop_formula(rng, 1)), [d])
                )
            elif roll < 0.55:
                a = random_prop_formula(rng, 1)
                lbl = new_label()
                pool.append(nd("impI", M(label=lbl, formula=a), [d]))
            elif roll < 0.7 and isinstance(d.concl, And):
                pool.append(nd(rng.choice(["andE1", "andE2"]), M(), [d]))
            elif roll < 0.85 and isinstance(d.concl, Imp):
                arg = next((p for p in pool if p.concl == d.concl.left), None)
                if arg is None:
                    arg = assume(new_label(), d.concl.left)
                pool.append(nd("impE", M(), [d, arg]))
            else:
                other = rng.choice(pool)
                if d.concl == other.concl:
                    a, b = random_prop_formula(rng, 1), random_prop_formula(rng, 1)
                    p, q = new_label(), new_label()
                    maj = assume(new_label(), Or(a, b))
                    # both minors must really conclude the same formula
                    pool.append(nd("orE", M(p=p, q=q), [maj, d, other]))
        except Exception:
            continue
    return pool[-1]


def random_nd_with_ore(rng: random.Random, steps: int = 6) -> Derivation:
    """A closed propositional derivation containing at least one orE."""
    while True:
        a = random_prop_formula(rng, 1)
        b = random_prop_formula(rng, 1)
        maj = assume("u0", Or(a, b))
        lp, lq = "p0", "q0"
        minor1 = _grow_minor(rng, assume(lp, a), steps)
        target = minor1.concl
        minor2 = _retarget(rng, assume(lq, b), target)
        if minor2 is None:
            continue
        d = nd("orE", M(p=lp, q=lq), [maj, minor1, minor2])
        d = _grow_minor(rng, d, rng.randrange(3))
        # discharge everything still open
        for lbl, f in sorted(open_assumptions(d)):
            d = nd("impI", M(label=lbl, formula=f), [d])
        if check(d).ok and any(n.rule == "orE" for _, n in d.nodes()):
            return d


def _grow_minor(rng: random.Random, d: Derivation, steps: int) -> Derivation:
    for _ in range(steps):
        roll = rng.random()
        try:
            if roll < 0.3:
                d = nd("andI", M(), [d, assume(f"s{rng.randrange(4)}", random_prop_formula(rng, 1))])
            elif roll < 0.5 and isinstance(d.concl, And):
                d = nd(rng.choice(["andE1", "andE2"]), M(), [d])
            elif roll < 0.7:
                d = nd("orI1", M(formula=random_prop_formula(rng, 1)), [d])
            else:
                h = assume(f"h{rng.randrange(4)}", Imp(d.concl, random_prop_formula(rng, 1)))
                d = nd("impE", M(), [h, d])
        except Exception:
            continue
    return d


def _retarget(rng: random.Random, d: Derivation, target: Formula) -> Derivation | None:
    """Try to extend d to conclude `target` (cheaply, via introductions)."""
    if d.concl == target:
        return d
    if isinstance(target, And):
        l = _retarget(rng, d, target.left)
        if l is not None:
            return nd("andI", M(), [l, assume("sx", target.right)])
        r = _retarget(rng, d, target.right)
        if r is not None:
            return nd("andI", M(), [assume("sy", target.left), r])
    if isinstance(target, Or):
        l = _retarget(rng, d, target.left)
        if l is not None:
            return nd("orI1", M(formula=target.right), [l])
        r = _retarget(rng, d, target.right)
        if r is not None:
            return nd("orI2", M(formula=target.left), [r])
    if isinstance(target, Imp):
        inner = _retarget(rng, d, target.right)
        if inner is not None:
            return nd("impI", M(label=f"hx{rng.randrange(9)}", formula=target.left), [inner])
    if isinstance(target, Atom):
        h = assume(f"ht{rng.randrange(9)}", Imp(d.concl, target))
        return nd("impE", M(), [h, d])
    return None


from .derivation import open_assumptions  # noqa: E402
