"""Small closed-universe environments and random trees for pointwise checks."""

from __future__ import annotations

import itertools
import random

from ldve.domain import Env, LargeCountable, NameTable, SmallExtensional
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit
from ldve.labels import Const, PNewConst, PrSing, TablePdf, product
from ldve.oracle import strings_up_to
from ldve.predicates import Atom, AtomKind, Var

UNIVERSE = strings_up_to("AB", 3)  # 14 strings, closed under substitution


def small_env() -> Env:
    """X, Z small; L, M large over the closed universe; one table ``t``."""
    entries = {"A": 0.3, "AB": 0.2, "BBA": 0.1}
    n_unseen = len(UNIVERSE) - len(entries)
    table = NameTable("t", entries, 0.4 / n_unseen, n_unseen)
    domains = {
        "X": SmallExtensional(("x0", "x1", "x2")),
        "Z": SmallExtensional(("z0", "z1")),
        "L": LargeCountable("AB", UNIVERSE),
        "M": LargeCountable("AB", UNIVERSE),
    }
    return Env(domains, {"t": table})


def assignments(env: Env, names):
    """Every joint assignment of ``names`` (large ones range over the universe)."""
    names = sorted(names)
    pools = [
        sorted(env.domain(n).universe) if env.is_large(n) else env.domain(n).values
        for n in names
    ]
    for values in itertools.product(*pools):
        yield dict(zip(names, values))


def random_atom(rng: random.Random, var: str) -> Atom:
    kind = rng.choice(list(AtomKind))
    universe = sorted(UNIVERSE)
    if kind is AtomKind.IN_TABLE:
        return Atom(kind, var, "t")
    if kind is AtomKind.IN_SET:
        return Atom(kind, var, frozenset(rng.sample(universe, rng.randint(1, 3))))
    return Atom(kind, var, rng.choice(universe))


def random_label(rng: random.Random, large: list[str]):
    choice = rng.random()
    if choice < 0.15:
        return Const(0.0)
    if large and choice < 0.45:
        var = rng.choice(large)
        factor = rng.choice([TablePdf(Var(var), "t"), PrSing(Var(var), "AB"), PNewConst("t")])
        return product(Const(round(rng.uniform(0.1, 2.0), 3)), factor)
    return Const(round(rng.uniform(0.1, 2.0), 3))


def random_tree(rng: random.Random, env: Env, names: list[str], depth: int = 3):
    large = [n for n in names if env.is_large(n)]
    if depth == 0 or not names or rng.random() < 0.2:
        return Leaf(random_label(rng, large))
    var = rng.choice(names)
    if env.is_large(var):
        return PredSplit(
            random_atom(rng, var),
            random_tree(rng, env, names, depth - 1),
            random_tree(rng, env, names, depth - 1),
        )
    values = list(env.domain(var).values)
    rng.shuffle(values)
    cut = sorted(rng.sample(range(1, len(values)), rng.randint(0, len(values) - 1)))
    groups = [values[a:b] for a, b in zip([0] + cut, cut + [len(values)])]
    otherwise = None
    if len(groups) > 1 and rng.random() < 0.5:
        groups.pop()
        otherwise = random_tree(rng, env, names, depth - 1)
    branches = tuple((frozenset(g), random_tree(rng, env, names, depth - 1)) for g in groups)
    return SmallSplit(var, branches, otherwise)


def random_factor(rng: random.Random, env: Env, names: list[str], depth: int = 3) -> Factor:
    return Factor(frozenset(names), random_tree(rng, env, names, depth))
