"""Brute-force inference over closed universes, and random test networks.

The oracle tabulates every CPD over its full scope with :func:`evaluate`,
multiplies the tables into the joint distribution (numpy broadcasting) and
sums with :func:`math.fsum`.  It is exponential by design and refuses
networks whose joint state space exceeds :data:`MAX_STATES`.
"""

from __future__ import annotations

import itertools
import math
import random
from dataclasses import dataclass, field, replace
from typing import Mapping, Sequence

import numpy as np

from ldve.domain import LargeCountable, NameTable, SmallExtensional, VariableDecl
from ldve.engine import CPD, Network, Posterior
from ldve.errors import DomainError, InferenceError
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit, TreeNode, evaluate
from ldve.labels import Const, PrSing, TablePdf, add, product
from ldve.predicates import Atom, AtomKind, Var

MAX_STATES = 10**7


@dataclass(frozen=True)
class ClosedUniverse:
    """Finite value sets standing in for the large domains."""

    values: Mapping[str, frozenset[str]]

    def for_var(self, name: str) -> frozenset[str]:
        return self.values[name]


def strings_up_to(alphabet: str, max_len: int) -> frozenset[str]:
    """Every nonempty string over ``alphabet`` of length at most ``max_len``.

    Such a universe is closed under single-letter substitution, so
    ``prsing`` CPDs stay normalized inside it.
    """
    return frozenset(
        "".join(chars)
        for n in range(1, max_len + 1)
        for chars in itertools.product(alphabet, repeat=n)
    )


def close_table(table: NameTable, universe: frozenset[str]) -> NameTable:
    """Restrict the unseen-name model to ``universe``: the leftover mass is
    spread over the universe values the table does not list."""
    outside = set(table.entries) - universe
    if outside:
        raise DomainError(f"table {table.id}: entries {sorted(outside)} are outside the universe")
    n_unseen = len(universe) - len(table.entries)
    entries = dict(table.entries)
    residual = 1.0 - table.entry_mass
    if n_unseen == 0:
        total = table.entry_mass
        entries = {k: v / total for k, v in entries.items()}
        return NameTable(table.id, entries, table.pnew, 0)
    return NameTable(table.id, entries, residual / n_unseen, n_unseen)


def close_network(net: Network, universe: ClosedUniverse) -> Network:
    """Copy of ``net`` whose large domains are the universe sets.

    All large variables must share one universe when tables are present,
    since a table's unseen count depends on it.
    """
    variables = []
    for v in net.variables:
        if v.is_large:
            u = universe.for_var(v.name)
            variables.append(VariableDecl(v.name, replace(v.domain, universe=u)))
        else:
            variables.append(v)
    large = [universe.for_var(v.name) for v in net.variables if v.is_large]
    tables = dict(net.tables)
    if tables and large:
        if any(u != large[0] for u in large[1:]):
            raise DomainError("large variables need a common universe when tables are used")
        tables = {tid: close_table(t, large[0]) for tid, t in tables.items()}
    return Network(tuple(variables), net.cpds, tables, net.alphabet)


def _values(net: Network, name: str) -> list[str]:
    domain = net.env.domain(name)
    if domain.is_large:
        if domain.universe is None:
            raise InferenceError(f"oracle needs a closed universe for {name}")
        return sorted(domain.universe)
    return list(domain.values)


def _joint(net: Network, evidence: Mapping[str, str]) -> tuple[list[str], list[list[str]], np.ndarray]:
    names = net.names
    axes = []
    for n in names:
        if n in evidence:
            value = evidence[n]
            if net.env.is_large(n):
                value = value.upper()
            if value not in net.env.domain(n):
                raise InferenceError(f"evidence {n}={value} is outside the domain")
            axes.append([value])
        else:
            axes.append(_values(net, n))
    states = math.prod(len(a) for a in axes)
    if states > MAX_STATES:
        raise InferenceError(f"oracle refuses {states} joint states (limit {MAX_STATES})")

    joint = np.ones([len(a) for a in axes])
    for cpd in net.cpds:
        scope = sorted(cpd.factor.scope, key=names.index)
        idx = [names.index(v) for v in scope]
        table = np.empty([len(axes[i]) for i in idx])
        for pos in itertools.product(*(range(len(axes[i])) for i in idx)):
            assignment = {v: axes[i][p] for v, i, p in zip(scope, idx, pos)}
            table[pos] = evaluate(cpd.factor, assignment, net.env)
        shape = [len(axes[i]) if i in idx else 1 for i in range(len(names))]
        joint = joint * table.reshape(shape)
    return names, axes, joint


def oracle_likelihood(net: Network, evidence: Mapping[str, str]) -> float:
    _, _, joint = _joint(net, evidence)
    return math.fsum(joint.ravel())


def oracle_posterior(
    net: Network,
    evidence: Mapping[str, str],
    query: str,
    universe: ClosedUniverse | None = None,
) -> Posterior:
    """Posterior of ``query`` by exhaustive enumeration.

    ``universe`` closes ``net`` first; without it every large domain of
    ``net`` must already carry a universe.
    """
    if universe is not None:
        net = close_network(net, universe)
    if query in evidence:
        raise InferenceError(f"query variable {query} is also observed")
    names, axes, joint = _joint(net, evidence)
    axis = names.index(query)
    weights = {
        value: math.fsum(np.take(joint, i, axis=axis).ravel())
        for i, value in enumerate(axes[axis])
    }
    z = math.fsum(weights.values())
    if z <= 0.0:
        raise InferenceError("evidence has probability zero")
    if net.env.is_large(query):
        weights = {v: w for v, w in weights.items() if w != 0.0}
    return Posterior(query, {v: w / z for v, w in sorted(weights.items())})


def tv_distance(p: Posterior, q: Posterior) -> float:
    """Total-variation distance between two posteriors of the same variable.

    Complement blocks are compared only when both sides describe the same
    block; otherwise the per-value comparison would be unbounded.
    """
    if p.variable != q.variable:
        raise ValueError(f"posteriors of different variables: {p.variable}, {q.variable}")
    diff = [abs(p.explicit.get(v, 0.0) - q.explicit.get(v, 0.0)) for v in set(p.explicit) | set(q.explicit)]
    a, b = p.complement, q.complement
    if a is not None or b is not None:
        if a is None or b is None or (a.constraints, a.listed, a.count) != (b.constraints, b.listed, b.count):
            raise ValueError("cannot compare posteriors with different complement blocks")
        diff.append(a.count * abs(a.per_value - b.per_value))
    return 0.5 * math.fsum(diff)


# --------------------------------------------------------------- random nets


@dataclass
class RandomCase:
    net: Network
    universe: ClosedUniverse
    evidence: dict[str, str]
    queries: list[str] = field(default_factory=list)


_UNIVERSES = (("AB", 4), ("ABC", 3))


class _Builder:
    def __init__(self, rng: random.Random, universe: list[str], tables: dict[str, NameTable], alphabet: str):
        self.rng = rng
        self.universe = universe
        self.tables = tables
        self.alphabet = alphabet

    def dist(self, n: int) -> list[float]:
        w = [self.rng.random() for _ in range(n)]
        if n > 1 and self.rng.random() < 0.2:
            w[self.rng.randrange(n)] = 0.0
        total = math.fsum(w)
        return [x / total for x in w]

    def atom(self, var: str) -> Atom:
        kind = self.rng.choice(list(AtomKind))
        if kind is AtomKind.IN_TABLE:
            return Atom(kind, var, self.rng.choice(sorted(self.tables)))
        if kind is AtomKind.IN_SET:
            k = self.rng.randint(1, 4)
            return Atom(kind, var, frozenset(self.rng.sample(self.universe, k)))
        return Atom(kind, var, self.rng.choice(self.universe))

    def splits(self, parents: list[tuple[str, VariableDecl]], leaf) -> TreeNode:
        """Random tests over ``parents`` (each used at most once per path)."""
        if not parents or self.rng.random() < 0.25:
            return leaf()
        i = self.rng.randrange(len(parents))
        name, decl = parents[i]
        rest = parents[:i] + parents[i + 1:]
        if decl.is_large:
            return PredSplit(self.atom(name), self.splits(rest, leaf), self.splits(rest, leaf))
        values = list(decl.domain.values)
        self.rng.shuffle(values)
        cut = sorted(self.rng.sample(range(1, len(values)), self.rng.randint(0, len(values) - 1)))
        groups = [values[a:b] for a, b in zip([0] + cut, cut + [len(values)])]
        otherwise = None
        if len(groups) > 1 and self.rng.random() < 0.4:
            groups.pop()
            otherwise = self.splits(rest, leaf)
        branches = tuple((frozenset(g), self.splits(rest, leaf)) for g in groups)
        return SmallSplit(name, branches, otherwise)

    def small_leaf(self, child: str, values: Sequence[str]):
        def make() -> TreeNode:
            probs = self.dist(len(values))
            if len(values) > 2 and self.rng.random() < 0.3:
                # last values share one probability through the else branch
                k = self.rng.randint(1, len(values) - 1)
                share = math.fsum(probs[k:]) / (len(values) - k)
                branches = tuple((frozenset([v]), Leaf(Const(p))) for v, p in zip(values[:k], probs))
                return SmallSplit(child, branches, Leaf(Const(share)))
            return SmallSplit(child, tuple((frozenset([v]), Leaf(Const(p))) for v, p in zip(values, probs)))
        return make

    def large_leaf(self, child: str):
        def make() -> TreeNode:
            choice = self.rng.randrange(3)
            table = self.rng.choice(sorted(self.tables))
            if choice == 0:
                return Leaf(TablePdf(Var(child), table))
            if choice == 1:
                return PredSplit(
                    Atom(AtomKind.IN_TABLE, child, table),
                    Leaf(TablePdf(Var(child), table)),
                    Leaf(TablePdf(Var(child), table)),
                )
            k = self.rng.randint(1, 5)
            chosen = frozenset(self.rng.sample(self.universe, k))
            p = self.rng.uniform(0.05, 0.95)
            return PredSplit(
                Atom(AtomKind.IN_SET, child, chosen),
                Leaf(Const(p / k)),
                Leaf(Const((1 - p) / (len(self.universe) - k))),
            )
        return make

    def copy_leaf(self, child: str, source: str):
        """Noisy copy of the large parent ``source``: exact copy, one-letter
        substitution or an independent table draw."""
        def make() -> TreeNode:
            a, b, c = self.dist(3)
            if c == 0.0:
                a, b, c = a / 2, b / 2, 0.5
            table = self.rng.choice(sorted(self.tables))
            draw = product(Const(c), TablePdf(Var(child), table))
            return PredSplit(
                Atom(AtomKind.EQUAL, source, Var(child)),
                Leaf(add(Const(a), draw)),
                PredSplit(
                    Atom(AtomKind.SINGLE_EDIT, source, Var(child)),
                    Leaf(add(product(Const(b), PrSing(Var(child), self.alphabet)), draw)),
                    Leaf(draw),
                ),
            )
        return make


def _random_table(rng: random.Random, tid: str, universe: list[str]) -> NameTable:
    names = rng.sample(universe, rng.randint(2, 8))
    weights = [rng.uniform(0.1, 1.0) for _ in names]
    coverage = rng.uniform(0.5, 0.95)
    total = math.fsum(weights)
    entries = {n: w / total * coverage for n, w in zip(names, weights)}
    n_unseen = len(universe) - len(names)
    return NameTable(tid, entries, (1.0 - math.fsum(entries.values())) / n_unseen, n_unseen)


def _has_predicate(node: TreeNode) -> bool:
    if isinstance(node, PredSplit):
        return True
    if isinstance(node, SmallSplit):
        children = [c for _, c in node.branches] + ([node.otherwise] if node.otherwise else [])
        return any(_has_predicate(c) for c in children)
    return False


def sample_assignment(net: Network, rng: random.Random) -> dict[str, str]:
    """Ancestral sample from a closed network."""
    sample: dict[str, str] = {}
    for name in net.topological_order():
        cpd = net.cpd(name)
        values = _values(net, name)
        weights = [evaluate(cpd.factor, {**sample, name: v}, net.env) for v in values]
        sample[name] = rng.choices(values, weights)[0]
    return sample


def random_network(
    seed: int,
    max_vars: int = 6,
    max_large: int = 2,
    max_values: int = 5,
) -> RandomCase:
    """Deterministic random network over a closed universe, with evidence
    sampled from the network itself and the remaining variables as queries.

    Every network has at least one large variable and one predicate test.
    A large variable with a large parent is always observed, since the
    engine cannot sum out a variable related to another unobserved one.
    """
    rng = random.Random(seed)
    alphabet, max_len = rng.choice(_UNIVERSES)
    universe_set = strings_up_to(alphabet, max_len)
    universe = sorted(universe_set)
    tables = {f"t{i}": _random_table(rng, f"t{i}", universe) for i in range(rng.randint(1, 2))}
    builder = _Builder(rng, universe, tables, alphabet)

    n_vars = rng.randint(2, max_vars)
    n_large = rng.randint(1, min(max_large, n_vars))
    large_at = set(rng.sample(range(n_vars), n_large))
    decls: list[VariableDecl] = []
    for i in range(n_vars):
        if i in large_at:
            decls.append(VariableDecl(f"L{i}", LargeCountable(alphabet, universe_set)))
        else:
            k = rng.randint(2, max_values)
            decls.append(VariableDecl(f"S{i}", SmallExtensional(tuple(f"v{j}" for j in range(k)))))

    forced: set[str] = set()
    cpds = []
    for i, decl in enumerate(decls):
        earlier = decls[:i]
        parents = rng.sample(earlier, rng.randint(0, min(2, len(earlier))))
        parents.sort(key=decls.index)
        large_parents = [p for p in parents if p.is_large]
        if decl.is_large and large_parents:
            source = large_parents[0].name
            others = [(p.name, p) for p in parents if p.name != source]
            leaf = builder.copy_leaf(decl.name, source)
            forced.add(decl.name)
        elif decl.is_large:
            others = [(p.name, p) for p in parents]
            leaf = builder.large_leaf(decl.name)
        else:
            others = [(p.name, p) for p in parents]
            leaf = builder.small_leaf(decl.name, decl.domain.values)
        root = builder.splits(others, leaf)
        scope = {decl.name} | {p.name for p in parents}
        cpds.append(CPD(decl.name, tuple(p.name for p in parents), Factor(scope, root)))

    if not any(_has_predicate(c.factor.root) for c in cpds):
        # make the first large variable test itself against a random set
        first = next(d for d in decls if d.is_large)
        cpd = next(c for c in cpds if c.child == first.name)
        if first.name not in forced:
            chosen = frozenset(rng.sample(universe, 2))
            root = PredSplit(
                Atom(AtomKind.IN_SET, first.name, chosen),
                Leaf(Const(0.3 / 2)),
                Leaf(Const(0.7 / (len(universe) - 2))),
            )
            root = builder.splits([(p, next(d for d in decls if d.name == p)) for p in cpd.parents], lambda: root)
            cpds[cpds.index(cpd)] = CPD(cpd.child, cpd.parents, Factor(cpd.factor.scope, root))

    net = Network(tuple(decls), tuple(cpds), tables, alphabet)
    sample = sample_assignment(net, rng)
    observed = set(forced) | {d.name for d in decls if rng.random() < 0.4}
    if not observed:
        observed.add(rng.choice(net.names))
    if observed == set(net.names):
        observed.remove(rng.choice(sorted(observed - forced)))
    evidence = {n: sample[n] for n in net.names if n in observed}
    queries = [n for n in net.names if n not in observed]
    universe_map = ClosedUniverse({d.name: universe_set for d in decls if d.is_large})
    return RandomCase(net, universe_map, evidence, queries)
