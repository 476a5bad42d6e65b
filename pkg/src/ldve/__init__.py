"""Exact variable elimination for Bayesian networks with large-domain
variables, using decision-tree factors and intensional predicates."""

from ldve.domain import (
    UNBOUNDED,
    Env,
    LargeCountable,
    NameTable,
    SmallExtensional,
    VariableDecl,
    load_name_table,
    table_lookup,
    table_residual_mass,
)
from ldve.engine import CPD, Network, Posterior, elimination_order, evidence_likelihood, posterior
from ldve.errors import DomainError, InferenceError, LdveError, SpecError, TreeError, UnboundedMassError
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit, condition, evaluate, multiply, prune
from ldve.predicates import Atom, AtomKind, ConstraintSet, Literal, Var, single_edit_neighbors, solve
from ldve.sumout import leaf_mass, sum_out, sum_out_large, sum_out_small

__all__ = [
    "UNBOUNDED", "Env", "LargeCountable", "NameTable", "SmallExtensional", "VariableDecl",
    "load_name_table", "table_lookup", "table_residual_mass",
    "CPD", "Network", "Posterior", "elimination_order", "evidence_likelihood", "posterior",
    "DomainError", "InferenceError", "LdveError", "SpecError", "TreeError", "UnboundedMassError",
    "Factor", "Leaf", "PredSplit", "SmallSplit", "condition", "evaluate", "multiply", "prune",
    "Atom", "AtomKind", "ConstraintSet", "Literal", "Var", "single_edit_neighbors", "solve",
    "leaf_mass", "sum_out", "sum_out_large", "sum_out_small",
]
