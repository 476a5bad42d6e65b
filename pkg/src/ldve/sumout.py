"""Summing a variable out of a tree factor.

The traversal collects, on the way down, every test that involves the
summed variable.  At a leaf the label is replaced by its probability mass
over the values that satisfy those tests; subtrees below a test on the
summed variable are added back together with ``merge(..., "+")``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

from ldve.domain import UNBOUNDED, Env
from ldve.errors import InferenceError, TreeError, UnboundedMassError
from ldve.factor_tree import (
    EMPTY,
    Factor,
    Leaf,
    PredSplit,
    SmallSplit,
    TreeNode,
    merge,
    prune,
)
from ldve.labels import Const, PrSing, TablePdf, add, evaluate_label, monomials, product
from ldve.predicates import (
    ComplementOfFinite,
    ConstraintSet,
    Explicit,
    Literal,
    SolutionSet,
    solution_count,
    solve,
)


@dataclass(frozen=True)
class LeafMass:
    """One leaf evaluated while summing out a large variable."""

    variable: str
    path: tuple[str, ...]
    constraints: ConstraintSet
    label: object
    count: float
    mass: object

    def __str__(self):
        where = " & ".join(self.path) or "true"
        count = "unbounded" if self.count == UNBOUNDED else self.count
        return f"[{where}] {self.label}  (|{self.variable}|={count}) -> {self.mass}"


def _factor_value(f, value: str, env: Env) -> float:
    if isinstance(f, TablePdf):
        return env.table(f.table).pdf(value)
    return evaluate_label(PrSing(value, f.alphabet), {}, env)


def split_complement(
    s: ComplementOfFinite, tables: set[str], env: Env
) -> tuple[list[str], float | int]:
    """Split a complement set into the table-listed values it contains (for
    the given tables plus the negated ones) and the count of the remaining,
    unlisted values.  All unlisted values look alike to table lookups."""
    names = sorted(set(tables) | s.negated_tables)
    listed = set().union(*(env.table(t).entries for t in names))
    if s.universe is not None:
        listed &= s.universe
        return sorted(listed - s.excluded), len(s.universe - listed - s.excluded)
    finite = [t for t in names if env.table(t).n_unseen != UNBOUNDED]
    if not finite:
        if s.domain_size is not None:
            return sorted(listed - s.excluded), s.domain_size - len(listed | s.excluded)
        return sorted(listed - s.excluded), UNBOUNDED
    base = env.table(finite[0])
    rest = base.n_unseen - len((listed | s.excluded) - base.entries.keys())
    return sorted(listed - s.excluded), rest


def _complement_mass(yfactors: Sequence, s: ComplementOfFinite, env: Env) -> float:
    """Sum of the product of ``yfactors`` over a complement-of-finite set."""
    if not yfactors:
        return solution_count(s, env.tables)
    if any(isinstance(f, PrSing) for f in yfactors):
        if s.universe is None:
            return UNBOUNDED
        return math.fsum(
            math.prod(_factor_value(f, v, env) for f in yfactors)
            for v in sorted(s.universe - s.excluded)
        )

    used = [f.table for f in yfactors]
    excluded = s.excluded
    if len(used) == 1 and s.negated_tables <= {used[0]}:
        table = env.table(used[0])
        listed = table.entries
        if used[0] in s.negated_tables:
            entry_part = 0.0
        else:
            entry_part = table.entry_mass - math.fsum(listed[v] for v in excluded if v in listed)
        if s.universe is not None:
            rest = len(s.universe - listed.keys() - excluded)
        elif table.n_unseen == UNBOUNDED:
            return UNBOUNDED
        else:
            rest = table.n_unseen - len(excluded - listed.keys())
        return entry_part + rest * table.pnew

    listed_any, rest = split_complement(s, set(used), env)
    if rest == UNBOUNDED:
        return UNBOUNDED
    entry_part = math.fsum(
        math.prod(_factor_value(f, v, env) for f in yfactors) for v in listed_any
    )
    rest_value = math.prod(env.table(t).pnew for t in used)
    return entry_part + rest * rest_value


def _monomial_mass(coef: float, yfactors: Sequence, s: SolutionSet, env: Env) -> float:
    if coef == 0.0:
        return 0.0
    if isinstance(s, Explicit):
        return coef * math.fsum(
            math.prod(_factor_value(f, v, env) for f in yfactors) for v in s.values
        )
    mass = _complement_mass(yfactors, s, env)
    return UNBOUNDED if mass == UNBOUNDED else coef * mass


def mass_label(label, y: str, s: SolutionSet, env: Env):
    """Label of the leaf after summing ``y`` over the solution set ``s``.

    Factors that depend on other unobserved variables stay symbolic.
    """
    terms = []
    for coef, factors in monomials(label, env):
        mine = [f for f in factors if f.term.name == y]
        others = [f for f in factors if f.term.name != y]
        mass = _monomial_mass(coef, mine, s, env)
        if mass == UNBOUNDED:
            raise UnboundedMassError(f"unbounded mass at leaf {label}")
        terms.append(product(Const(mass), *others))
    return add(*terms) if terms else Const(0.0)


def leaf_mass(label, ctx: ConstraintSet, env: Env) -> float:
    """Probability mass of ``label`` over the values of ``ctx.subject`` satisfying ``ctx``.

    Returns :data:`UNBOUNDED` when the mass is infinite (or cannot be put in
    closed form over an unbounded set).
    """
    s = solve(ctx, env)
    try:
        result = mass_label(label, ctx.subject, s, env)
    except UnboundedMassError:
        return UNBOUNDED
    return evaluate_label(result, {}, env)


def _describe(node, outcome) -> str:
    if isinstance(node, SmallSplit):
        return f"{node.var} in {{{', '.join(sorted(outcome))}}}"
    return str(Literal(node.atom, outcome))


def sum_out(f: Factor, y: str, env: Env, trace: list | None = None) -> Factor:
    """Sum ``y`` out of ``f``; dispatches on whether ``y`` is small or large."""
    if y not in f.scope:
        raise TreeError(f"{y} is not in the factor scope {sorted(f.scope)}")
    large = env.is_large(y)
    full = None if large else frozenset(env.domain(y).values)

    def visit(node: TreeNode, lits: tuple, allowed: frozenset | None, path: tuple) -> TreeNode:
        if isinstance(node, Leaf):
            if not large:
                return Leaf(product(node.label, Const(float(len(allowed)))))
            ctx = ConstraintSet.of(y, lits)
            s = solve(ctx, env)
            try:
                new = mass_label(node.label, y, s, env)
            except UnboundedMassError:
                where = " & ".join(path) or "root"
                raise UnboundedMassError(
                    f"unbounded mass at leaf {node.label} summing out {y} (path: {where})"
                ) from None
            if trace is not None:
                trace.append(LeafMass(y, path, ctx, node.label, solution_count(s, env.tables), new))
            return Leaf(new)

        if isinstance(node, SmallSplit):
            if node.var == y:
                parts = []
                listed: frozenset = frozenset()
                for values, child in node.branches:
                    listed |= values
                    narrowed = values & allowed
                    if narrowed:
                        parts.append(visit(child, lits, narrowed, path + (_describe(node, narrowed),)))
                rest = allowed - listed
                if rest:
                    if node.otherwise is None:
                        raise TreeError(f"no branch of {y} for values {sorted(rest)}")
                    parts.append(visit(node.otherwise, lits, rest, path + (_describe(node, rest),)))
                return merge(parts, "+", env)
            return SmallSplit(
                node.var,
                tuple(
                    (values, visit(child, lits, allowed, path + (_describe(node, values),)))
                    for values, child in node.branches
                ),
                None if node.otherwise is None
                else visit(node.otherwise, lits, allowed, path + (f"{node.var} else",)),
            )

        atom = node.atom
        if not atom.mentions(y):
            return PredSplit(
                atom,
                visit(node.yes, lits, allowed, path + (_describe(node, True),)),
                visit(node.no, lits, allowed, path + (_describe(node, False),)),
            )
        if not atom.grounded:
            raise InferenceError(
                f"cannot sum out {y}: {atom} relates it to the unobserved variable(s) "
                f"{sorted(atom.variables - {y})}"
            )
        for lit in lits:
            if lit.atom == atom:
                child = node.yes if lit.polarity else node.no
                return visit(child, lits, allowed, path)
        yes = visit(node.yes, lits + (Literal(atom, True),), allowed, path + (_describe(node, True),))
        no = visit(node.no, lits + (Literal(atom, False),), allowed, path + (_describe(node, False),))
        return merge([yes, no], "+", env)

    root = visit(f.root, (), full, ())
    return Factor(f.scope - {y}, prune(root, EMPTY, env))


def sum_out_small(f: Factor, y: str, env: Env) -> Factor:
    if env.is_large(y):
        raise TreeError(f"{y} is a large variable")
    return sum_out(f, y, env)


def sum_out_large(f: Factor, y: str, env: Env, trace: list | None = None) -> Factor:
    if not env.is_large(y):
        raise TreeError(f"{y} is a small variable")
    return sum_out(f, y, env, trace)
