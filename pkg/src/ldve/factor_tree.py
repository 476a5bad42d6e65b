"""Decision-tree factors and the tree operations used by variable elimination.

Internal nodes split either on the value of a small variable (``SmallSplit``)
or on the outcome of a predicate (``PredSplit``); leaves carry symbolic
labels from :mod:`ldve.labels`.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Iterable, Mapping, Sequence, Union

from ldve.domain import Env, normalize_value
from ldve.errors import TreeError
from ldve.labels import (
    Const,
    add,
    evaluate_label,
    ground_label,
    is_zero,
    label_vars,
    product,
)
from ldve.predicates import Atom, eval_atom, ground


@dataclass(frozen=True)
class Leaf:
    label: object


@dataclass(frozen=True)
class SmallSplit:
    var: str
    branches: tuple[tuple[frozenset, "TreeNode"], ...]
    otherwise: "TreeNode | None" = None

    def __post_init__(self):
        seen: set = set()
        for values, _ in self.branches:
            if not values:
                raise TreeError(f"empty branch on {self.var}")
            if seen & values:
                raise TreeError(f"overlapping branches on {self.var}")
            seen |= values


@dataclass(frozen=True)
class PredSplit:
    atom: Atom
    yes: "TreeNode"
    no: "TreeNode"


TreeNode = Union[Leaf, SmallSplit, PredSplit]


def branch(values: Iterable, child: TreeNode) -> tuple[frozenset, TreeNode]:
    return (frozenset(values), child)


def tree_vars(node: TreeNode) -> frozenset[str]:
    found: set[str] = set()
    stack = [node]
    while stack:
        n = stack.pop()
        if isinstance(n, Leaf):
            found |= label_vars(n.label)
        elif isinstance(n, SmallSplit):
            found.add(n.var)
            stack.extend(child for _, child in n.branches)
            if n.otherwise is not None:
                stack.append(n.otherwise)
        else:
            found |= n.atom.variables
            stack.extend((n.yes, n.no))
    return frozenset(found)


def leaves(node: TreeNode) -> Iterable[Leaf]:
    if isinstance(node, Leaf):
        yield node
    elif isinstance(node, SmallSplit):
        for _, child in node.branches:
            yield from leaves(child)
        if node.otherwise is not None:
            yield from leaves(node.otherwise)
    else:
        yield from leaves(node.yes)
        yield from leaves(node.no)


@dataclass(frozen=True)
class Factor:
    scope: frozenset[str]
    root: TreeNode

    def __post_init__(self):
        object.__setattr__(self, "scope", frozenset(self.scope))
        extra = tree_vars(self.root) - self.scope
        if extra:
            raise TreeError(f"tree mentions {sorted(extra)} outside scope {sorted(self.scope)}")


@dataclass(frozen=True)
class Context:
    """Constraints accumulated on a root-to-node path."""

    allowed: Mapping[str, frozenset] = field(default_factory=dict)
    literals: Mapping[Atom, bool] = field(default_factory=dict)

    def restrict(self, var: str, values: frozenset) -> "Context":
        current = self.allowed.get(var)
        values = frozenset(values) if current is None else current & values
        return Context({**self.allowed, var: values}, self.literals)

    def assume(self, atom: Atom, polarity: bool) -> "Context":
        return Context(self.allowed, {**self.literals, atom: polarity})

    def allowed_values(self, var: str, env: Env) -> frozenset:
        current = self.allowed.get(var)
        if current is not None:
            return current
        return frozenset(env.domain(var).values)

    @property
    def contradictory(self) -> bool:
        return any(not values for values in self.allowed.values())


EMPTY = Context()


def evaluate(f: Factor, assignment: Mapping[str, str], env: Env) -> float:
    missing = f.scope - assignment.keys()
    if missing:
        raise TreeError(f"assignment misses {sorted(missing)}")
    node = f.root
    while not isinstance(node, Leaf):
        if isinstance(node, SmallSplit):
            value = assignment[node.var]
            for values, child in node.branches:
                if value in values:
                    node = child
                    break
            else:
                if node.otherwise is None:
                    raise TreeError(f"no branch of {node.var} for value {value!r}")
                node = node.otherwise
        else:
            node = node.yes if eval_atom(node.atom, assignment, env.tables) else node.no
    return evaluate_label(node.label, assignment, env)


def _rebuild_small(
    node: SmallSplit,
    ctx: Context,
    env: Env,
    visit: Callable[[TreeNode, Context], TreeNode],
) -> TreeNode:
    """Shared walk for small splits: drop branches incompatible with ``ctx``,
    recurse into the rest and collapse the split if it no longer distinguishes
    anything."""
    allowed = ctx.allowed_values(node.var, env)
    kept = []
    listed: frozenset = frozenset()
    for values, child in node.branches:
        listed |= values
        narrowed = values & allowed
        if narrowed:
            kept.append((narrowed, visit(child, ctx.restrict(node.var, narrowed))))
    otherwise = None
    rest = allowed - listed
    if node.otherwise is not None and rest:
        otherwise = visit(node.otherwise, ctx.restrict(node.var, rest))
    if not kept and otherwise is None:
        return node
    children = [child for _, child in kept] + ([otherwise] if otherwise is not None else [])
    covered = frozenset().union(*(v for v, _ in kept)) | (rest if otherwise is not None else frozenset())
    if covered == allowed and all(c == children[0] for c in children[1:]):
        return children[0]
    return SmallSplit(node.var, tuple(kept), otherwise)


def _rebuild_pred(
    node: PredSplit,
    ctx: Context,
    visit: Callable[[TreeNode, Context], TreeNode],
) -> TreeNode:
    known = ctx.literals.get(node.atom)
    if known is not None:
        return visit(node.yes if known else node.no, ctx)
    yes = visit(node.yes, ctx.assume(node.atom, True))
    no = visit(node.no, ctx.assume(node.atom, False))
    if yes == no:
        return yes
    return PredSplit(node.atom, yes, no)


def prune(node: TreeNode, ctx: Context, env: Env) -> TreeNode:
    """Remove branches that cannot be reached under ``ctx``.

    Small-variable branches are intersected with the allowed values; a
    predicate already decided on the path (same atom) is folded.  Intensional
    atoms are never checked against each other.
    """
    def visit(n: TreeNode, c: Context) -> TreeNode:
        if isinstance(n, Leaf):
            return n
        if isinstance(n, SmallSplit):
            return _rebuild_small(n, c, env, visit)
        return _rebuild_pred(n, c, visit)

    return visit(node, ctx)


def prune_factor(f: Factor, ctx: Context, env: Env) -> Factor:
    return Factor(f.scope, prune(f.root, ctx, env))


def map_leaves(node: TreeNode, fn: Callable[[object], object]) -> TreeNode:
    if isinstance(node, Leaf):
        return Leaf(fn(node.label))
    if isinstance(node, SmallSplit):
        return SmallSplit(
            node.var,
            tuple((values, map_leaves(child, fn)) for values, child in node.branches),
            None if node.otherwise is None else map_leaves(node.otherwise, fn),
        )
    yes, no = map_leaves(node.yes, fn), map_leaves(node.no, fn)
    return yes if yes == no else PredSplit(node.atom, yes, no)


def combine(op: str, a, b):
    if op == "*":
        return product(a, b)
    if op == "+":
        return add(a, b)
    raise ValueError(f"unknown operator {op!r}")


def merge2(t1: TreeNode, t2: TreeNode, op: str, env: Env, ctx: Context = EMPTY) -> TreeNode:
    """Graft ``t2`` under every leaf of ``t1`` and combine leaf labels with ``op``.

    For ``op="*"`` a zero leaf of ``t1`` is kept as is (nothing is grafted).
    ``t2`` is pruned with the context of the path it is grafted under.
    """
    def visit(n: TreeNode, c: Context) -> TreeNode:
        if isinstance(n, Leaf):
            if op == "*" and is_zero(n.label):
                return n
            return map_leaves(prune(t2, c, env), lambda label: combine(op, n.label, label))
        if isinstance(n, SmallSplit):
            return _rebuild_small(n, c, env, visit)
        return _rebuild_pred(n, c, visit)

    return visit(t1, ctx)


def merge(trees: Sequence[TreeNode], op: str, env: Env, ctx: Context = EMPTY) -> TreeNode:
    """Left fold of :func:`merge2` in list order."""
    if not trees:
        raise TreeError("merge of an empty list of trees")
    result = trees[0]
    for tree in trees[1:]:
        result = merge2(result, tree, op, env, ctx)
    return result


def multiply(factors: Sequence[Factor], env: Env) -> Factor:
    if not factors:
        raise TreeError("multiply needs at least one factor")
    scope = frozenset().union(*(f.scope for f in factors))
    root = merge([f.root for f in factors], "*", env)
    return Factor(scope, prune(root, EMPTY, env))


def check_value(var: str, value: str, env: Env) -> str:
    domain = env.domain(var)
    if domain.is_large:
        value = normalize_value(value)
    if value not in domain:
        raise TreeError(f"value {value!r} is not in the domain of {var}")
    return value


def condition(f: Factor, var: str, value: str, env: Env) -> Factor:
    """Absorb the observation ``var = value``."""
    if var not in f.scope:
        raise TreeError(f"{var} is not in the factor scope {sorted(f.scope)}")
    value = check_value(var, value, env)

    def visit(n: TreeNode) -> TreeNode:
        if isinstance(n, Leaf):
            return Leaf(ground_label(n.label, var, value, env))
        if isinstance(n, SmallSplit):
            if n.var == var:
                for values, child in n.branches:
                    if value in values:
                        return visit(child)
                if n.otherwise is None:
                    raise TreeError(f"no branch of {var} for value {value!r}")
                return visit(n.otherwise)
            return SmallSplit(
                n.var,
                tuple((values, visit(child)) for values, child in n.branches),
                None if n.otherwise is None else visit(n.otherwise),
            )
        atom = ground(n.atom, var, value, env.tables)
        if atom is True:
            return visit(n.yes)
        if atom is False:
            return visit(n.no)
        return PredSplit(atom, visit(n.yes), visit(n.no))

    return Factor(f.scope - {var}, prune(visit(f.root), EMPTY, env))


def constant_factor(value: float) -> Factor:
    return Factor(frozenset(), Leaf(Const(float(value))))


def _value_order(var: str, env: Env | None):
    if env is not None and var in env.domains and not env.domains[var].is_large:
        order = {v: i for i, v in enumerate(env.domains[var].values)}
        return lambda v: (order.get(v, len(order)), v)
    return lambda v: v


def pretty(node: TreeNode, env: Env | None = None, indent: int = 0) -> str:
    """Indented text rendering, one test or leaf per line."""
    return "\n".join(_pretty_lines(node, env, indent)) + "\n"


def _pretty_lines(node: TreeNode, env: Env | None, indent: int) -> list[str]:
    pad = "  " * indent
    if isinstance(node, Leaf):
        return [pad + str(node.label)]
    out: list[str] = []
    if isinstance(node, SmallSplit):
        out.append(f"{pad}{node.var}:")
        key = _value_order(node.var, env)
        children = [(", ".join(sorted(values, key=key)), child) for values, child in node.branches]
        if node.otherwise is not None:
            children.append(("else", node.otherwise))
    else:
        out.append(f"{pad}{node.atom}?")
        children = [("yes", node.yes), ("no", node.no)]
    for name, child in children:
        if isinstance(child, Leaf):
            out.append(f"{pad}  {name}: {child.label}")
        else:
            out.append(f"{pad}  {name}:")
            out.extend(_pretty_lines(child, env, indent + 2))
    return out
