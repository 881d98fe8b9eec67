"""proofid: a workbench for identity of proofs.

Derivations in intuitionistic sequent calculus and natural deduction
(propositional, first-order with equality, second-order), conversion
relations (cut elimination, beta/eta, rule permutations, permutative
conversions), the categorical functor layer, and mechanical verification
of naturality squares.
"""

from .syntax import (
    And,
    App,
    Atom,
    BProp,
    BVar,
    Eq,
    ExistsI,
    ExistsP,
    ForallI,
    ForallP,
    Imp,
    Or,
    PropVar,
    Sequent,
    Signature,
    Substitution,
    TrueF,
    Var,
    compose_subst,
    gamma_theta,
    parse_formula,
    parse_sequent,
    parse_term,
    positive_occurrences_only,
    print_formula,
    print_sequent,
    print_term,
    subst_formula,
    subst_prop,
)
from .derivation import (
    CheckError,
    Derivation,
    assume,
    ax,
    canonical_key,
    check,
    checked,
    cut_compose,
    context_compose,
    identity_derivation,
    instantiate_prop,
    instantiate_term,
    nd,
    nd_hole,
    open_assumptions,
    plug,
    plug_all,
    pretty,
    sc,
    sc_hole,
)
from .rules import M, Meta, SchemaError

__all__ = [n for n in dir() if not n.startswith("_")]
