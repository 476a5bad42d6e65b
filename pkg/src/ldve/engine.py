"""Bayesian networks with tree CPDs and the variable-elimination query pipeline."""

from __future__ import annotations

import math
import string
from itertools import product as cartesian
from dataclasses import dataclass, field
from typing import Iterable, Mapping, Sequence

from ldve.domain import UNBOUNDED, Env, NameTable, VariableDecl
from ldve.errors import InferenceError, TreeError, UnboundedMassError
from ldve.factor_tree import (
    Factor,
    PredSplit,
    SmallSplit,
    check_value,
    condition,
    constant_factor,
    evaluate,
    multiply,
)
from ldve.labels import PrSing, evaluate_label, monomials
from ldve.predicates import ConstraintSet, Explicit, Literal, eval_atom, solve
from ldve.sumout import split_complement, sum_out


NORMALIZATION_TOLERANCE = 1e-9


@dataclass(frozen=True)
class CPD:
    child: str
    parents: tuple[str, ...]
    factor: Factor

    def __post_init__(self):
        object.__setattr__(self, "parents", tuple(self.parents))
        expected = frozenset(self.parents) | {self.child}
        if self.factor.scope != expected:
            raise TreeError(
                f"CPD of {self.child}: scope {sorted(self.factor.scope)} != {sorted(expected)}"
            )


@dataclass
class Network:
    variables: tuple[VariableDecl, ...]
    cpds: tuple[CPD, ...]
    tables: dict[str, NameTable] = field(default_factory=dict)
    alphabet: str = string.ascii_uppercase
    env: Env = field(init=False, repr=False, compare=False)

    def __post_init__(self):
        self.variables = tuple(self.variables)
        self.cpds = tuple(self.cpds)
        names = [v.name for v in self.variables]
        if len(set(names)) != len(names):
            raise TreeError(f"duplicate variable names in {names}")
        children = [c.child for c in self.cpds]
        if sorted(children) != sorted(names):
            raise TreeError("every variable needs exactly one CPD")
        self.env = Env({v.name: v.domain for v in self.variables}, self.tables)
        for cpd in self.cpds:
            unknown = cpd.factor.scope - set(names)
            if unknown:
                raise TreeError(f"CPD of {cpd.child} mentions unknown variables {sorted(unknown)}")
        self.topological_order()

    @property
    def names(self) -> list[str]:
        return [v.name for v in self.variables]

    def var(self, name: str) -> VariableDecl:
        for v in self.variables:
            if v.name == name:
                return v
        raise KeyError(name)

    def cpd(self, child: str) -> CPD:
        for c in self.cpds:
            if c.child == child:
                return c
        raise KeyError(child)

    def topological_order(self) -> list[str]:
        parents = {c.child: set(c.parents) for c in self.cpds}
        order: list[str] = []
        done: set[str] = set()
        while len(order) < len(parents):
            ready = sorted(v for v, ps in parents.items() if v not in done and ps <= done)
            if not ready:
                raise TreeError("the parent graph has a cycle")
            order.extend(ready)
            done.update(ready)
        return order

    def ancestors(self, names: Iterable[str]) -> set[str]:
        """``names`` together with all their ancestors."""
        parents = {c.child: c.parents for c in self.cpds}
        found: set[str] = set()
        stack = list(names)
        while stack:
            v = stack.pop()
            if v not in found:
                found.add(v)
                stack.extend(parents[v])
        return found


@dataclass(frozen=True)
class Complement:
    """All values of the query variable not listed explicitly that satisfy
    ``constraints``; each has probability ``per_value``."""

    constraints: ConstraintSet
    listed: frozenset[str]
    count: float
    per_value: float
    total_mass: float


@dataclass
class Posterior:
    """Distribution of one variable: listed values plus at most one
    complement block.  Construction checks that the total mass is one."""

    variable: str
    explicit: dict[str, float]
    complement: Complement | None = None

    def __post_init__(self):
        if abs(self.total - 1.0) > NORMALIZATION_TOLERANCE:
            raise InferenceError(f"posterior of {self.variable} has total mass {self.total!r}")

    @property
    def total(self) -> float:
        extra = self.complement.total_mass if self.complement else 0.0
        return math.fsum(self.explicit.values()) + extra

    def probability(self, value: str, env: Env) -> float:
        if value in self.explicit:
            return self.explicit[value]
        c = self.complement
        if c is None or value in c.listed:
            return 0.0
        assignment = {self.variable: value}
        ok = all(
            eval_atom(lit.atom, assignment, env.tables) == lit.polarity
            for lit in c.constraints.literals
        )
        return c.per_value if ok else 0.0


def _parse_order(order: Sequence[str], hidden: list[str]) -> list[str]:
    order = list(order)
    if sorted(order) != sorted(hidden):
        raise InferenceError(
            f"elimination order {order} must be a permutation of the hidden variables {sorted(hidden)}"
        )
    return order


def elimination_order(
    net: Network,
    query: str | None,
    evidence: Mapping[str, str],
    order: Sequence[str] | None = None,
) -> list[str]:
    """Greedy min-fill order over the non-query, non-evidence variables.

    Ties go to large variables first, then to the lexicographically smallest name.
    """
    if query is not None and query in evidence:
        raise InferenceError(f"query variable {query} is also observed")
    hidden = [v for v in net.names if v != query and v not in evidence]
    if order is not None:
        return _parse_order(order, hidden)

    adjacency: dict[str, set[str]] = {v: set() for v in net.names if v not in evidence}
    for cpd in net.cpds:
        scope = [v for v in cpd.factor.scope if v not in evidence]
        for a in scope:
            adjacency[a].update(b for b in scope if b != a)

    def fill(v: str) -> int:
        nbrs = sorted(adjacency[v])
        return sum(
            1
            for i, a in enumerate(nbrs)
            for b in nbrs[i + 1:]
            if b not in adjacency[a]
        )

    result: list[str] = []
    remaining = set(hidden)
    while remaining:
        best = min(remaining, key=lambda v: (fill(v), not net.env.is_large(v), v))
        nbrs = adjacency.pop(best)
        for a in nbrs:
            adjacency[a].discard(best)
            adjacency[a].update(b for b in nbrs if b != a)
        remaining.remove(best)
        result.append(best)
    return result


def _normalize_evidence(net: Network, evidence: Mapping[str, str]) -> dict[str, str]:
    clean = {}
    for var, value in evidence.items():
        if var not in net.env.domains:
            raise InferenceError(f"unknown evidence variable {var}")
        try:
            clean[var] = check_value(var, value, net.env)
        except TreeError as exc:
            raise InferenceError(str(exc)) from None
    return clean


def _conditioned_factors(net: Network, evidence: Mapping[str, str], keep: set[str]) -> list[Factor]:
    factors = []
    for cpd in net.cpds:
        if cpd.child not in keep:
            continue
        f = cpd.factor
        for var, value in evidence.items():
            if var in f.scope:
                f = condition(f, var, value, net.env)
        factors.append(f)
    return factors


def eliminate(
    factors: list[Factor],
    order: Sequence[str],
    env: Env,
    trace: list | None = None,
) -> list[Factor]:
    """Multiply the factors mentioning each variable in turn and sum it out."""
    factors = list(factors)
    for y in order:
        touching = [f for f in factors if y in f.scope]
        if not touching:
            continue
        factors = [f for f in factors if y not in f.scope]
        factors.append(sum_out(multiply(touching, env), y, env, trace))
    return factors


def _run(net, evidence, query, order, trace) -> Factor:
    evidence = _normalize_evidence(net, evidence)
    full_order = elimination_order(net, query, evidence, order)
    targets = set(evidence) | ({query} if query else set())
    relevant = net.ancestors(targets)
    factors = _conditioned_factors(net, evidence, relevant)
    factors = eliminate(factors, [v for v in full_order if v in relevant], net.env, trace)
    if not factors:
        return constant_factor(1.0)
    return multiply(factors, net.env)


def evidence_likelihood(
    net: Network,
    evidence: Mapping[str, str],
    order: Sequence[str] | None = None,
    trace: list | None = None,
) -> float:
    """Joint probability of the evidence."""
    if not evidence:
        raise InferenceError("evidence_likelihood needs at least one observation")
    final = _run(net, evidence, None, order, trace)
    if final.scope:
        raise InferenceError(f"variables {sorted(final.scope)} were not eliminated")
    return evaluate(final, {}, net.env)


def posterior(
    net: Network,
    evidence: Mapping[str, str],
    query: str,
    order: Sequence[str] | None = None,
    trace: list | None = None,
) -> Posterior:
    if query not in net.env.domains:
        raise InferenceError(f"unknown query variable {query}")
    final = _run(net, evidence, query, order, trace)
    domain = net.env.domain(query)
    if not domain.is_large:
        weights = {v: evaluate(final, {query: v}, net.env) for v in domain.values}
        z = math.fsum(weights.values())
        if z <= 0.0:
            raise InferenceError("evidence has probability zero")
        return Posterior(query, {v: w / z for v, w in weights.items()})
    return _large_posterior(final, query, net.env)


def _large_posterior(final: Factor, y: str, env: Env) -> Posterior:
    explicit: dict[str, float] = {}
    blocks: list[tuple] = []

    def add_value(v: str, weight: float) -> None:
        if weight != 0.0:
            explicit[v] = explicit.get(v, 0.0) + weight

    def visit(node, lits: tuple) -> None:
        if isinstance(node, SmallSplit):
            raise TreeError(f"final factor for {y} still splits on {node.var}")
        if isinstance(node, PredSplit):
            if node.atom.variables != {y} or not node.atom.grounded:
                raise TreeError(f"final factor for {y} tests {node.atom}")
            visit(node.yes, lits + (Literal(node.atom, True),))
            visit(node.no, lits + (Literal(node.atom, False),))
            return
        label = node.label
        ctx = ConstraintSet.of(y, lits)
        s = solve(ctx, env)
        if isinstance(s, Explicit):
            for v in s.values:
                add_value(v, evaluate_label(label, {y: v}, env))
            return
        if s.universe is not None:
            for v in sorted(s.universe - s.excluded):
                add_value(v, evaluate_label(label, {y: v}, env))
            return
        terms = monomials(label, env)
        if all(c == 0.0 for c, _ in terms):
            return
        if any(isinstance(f, PrSing) for _, fs in terms for f in fs):
            raise UnboundedMassError(f"no closed form for {label} over an unbounded set of {y}")
        tables = {f.table for _, fs in terms for f in fs}
        listed, rest = split_complement(s, tables, env)
        for v in listed:
            add_value(v, evaluate_label(label, {y: v}, env))
        per_value = math.fsum(
            c * math.prod(env.table(f.table).pnew for f in fs) for c, fs in terms
        )
        if per_value != 0.0 and rest:
            if rest == UNBOUNDED:
                raise UnboundedMassError(f"unbounded posterior mass for {y} under {ctx}")
            blocks.append((ctx, frozenset(listed) | s.excluded, rest, per_value))

    visit(final.root, ())
    if len(blocks) > 1:
        raise InferenceError(f"posterior of {y} has {len(blocks)} complement blocks")
    z = math.fsum(explicit.values()) + math.fsum(b[2] * b[3] for b in blocks)
    if z <= 0.0:
        raise InferenceError("evidence has probability zero")
    complement = None
    if blocks:
        ctx, listed, rest, per_value = blocks[0]
        listed = frozenset(listed) | frozenset(explicit)
        complement = Complement(ctx, listed, rest, per_value / z, rest * per_value / z)
    return Posterior(y, {v: w / z for v, w in sorted(explicit.items())}, complement)


def check_normalization(net: Network, tolerance: float = 1e-9) -> list[str]:
    """Spot-check that every CPD sums to one over its child.

    Small parents are enumerated; a large parent is tried at a few
    representative values (table entries, literals used in the tree, and a
    fresh unseen string), or at every value of its closed universe.
    """
    problems = []
    env = net.env
    for cpd in net.cpds:
        choices = []
        for p in cpd.parents:
            dom = env.domain(p)
            if not dom.is_large:
                choices.append(dom.values)
            elif dom.universe is not None:
                choices.append(sorted(dom.universe))
            else:
                choices.append(_representatives(cpd.factor, p, net))
        for values in cartesian(*choices):
            f = cpd.factor
            for p, v in zip(cpd.parents, values):
                f = condition(f, p, v, env)
            try:
                total = evaluate(sum_out(f, cpd.child, env), {}, env)
            except (InferenceError, TreeError) as exc:
                problems.append(f"{cpd.child} | {dict(zip(cpd.parents, values))}: {exc}")
                continue
            if abs(total - 1.0) > tolerance:
                problems.append(
                    f"{cpd.child} | {dict(zip(cpd.parents, values))}: sums to {total!r}"
                )
    return problems


def _representatives(f: Factor, var: str, net: Network) -> list[str]:
    dom = net.env.domain(var)
    found: list[str] = []
    for table in net.tables.values():
        found.extend(sorted(v for v in table.entries if v in dom)[:2])
    stack = [f.root]
    while stack:
        node = stack.pop()
        if isinstance(node, PredSplit):
            arg = node.atom.arg
            if node.atom.subject == var and isinstance(arg, str) and arg in dom:
                found.append(arg)
            stack.extend((node.yes, node.no))
        elif isinstance(node, SmallSplit):
            stack.extend(c for _, c in node.branches)
            if node.otherwise is not None:
                stack.append(node.otherwise)
    fresh = dom.alphabet[-1] * 7
    while any(fresh in t.entries for t in net.tables.values()):
        fresh += dom.alphabet[-1]
    found.append(fresh)
    return sorted(set(found))
