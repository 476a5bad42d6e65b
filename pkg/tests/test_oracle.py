import pytest

from ldve.domain import UNBOUNDED, DomainError, LargeCountable, NameTable, SmallExtensional, VariableDecl
from ldve.engine import CPD, Network, Posterior
from ldve.errors import InferenceError
from ldve.factor_tree import Factor, Leaf, PredSplit
from ldve.io import serialize_network
from ldve.labels import Const
from ldve.predicates import Atom, AtomKind
from ldve.oracle import (
    ClosedUniverse,
    close_table,
    oracle_likelihood,
    oracle_posterior,
    random_network,
    strings_up_to,
    tv_distance,
)


def uniform_network(n_vars: int, k: int) -> Network:
    domain = SmallExtensional(tuple(f"v{j}" for j in range(k)))
    names = [f"S{i}" for i in range(n_vars)]
    return Network(
        tuple(VariableDecl(n, domain) for n in names),
        tuple(CPD(n, (), Factor({n}, Leaf(Const(1.0 / k)))) for n in names),
    )


class TestStringsUpTo:
    def test_count(self):
        assert len(strings_up_to("AB", 3)) == 2 + 4 + 8
        assert len(strings_up_to("ABC", 3)) == 39


class TestCloseTable:
    def test_residual_spread_over_unlisted(self):
        t = NameTable("t", {"A": 0.5, "B": 0.3}, 1e-6, UNBOUNDED)
        closed = close_table(t, frozenset({"A", "B", "AA", "AB"}))
        assert closed.n_unseen == 2
        assert closed.pnew == pytest.approx(0.1, rel=1e-12)

    def test_full_universe_renormalizes(self):
        t = NameTable("t", {"A": 0.5, "B": 0.3}, 1e-6, UNBOUNDED)
        closed = close_table(t, frozenset({"A", "B"}))
        assert closed.entries == pytest.approx({"A": 0.625, "B": 0.375})

    def test_entries_outside(self):
        with pytest.raises(DomainError):
            close_table(NameTable("t", {"ABC": 0.5}, 1e-6, UNBOUNDED), frozenset({"A"}))


class TestOracle:
    def test_uniform_prior(self):
        p = oracle_posterior(uniform_network(3, 4), {"S0": "v1"}, "S2")
        assert p.explicit == pytest.approx({f"v{j}": 0.25 for j in range(4)}, rel=1e-15)

    def test_likelihood_of_point(self):
        assert oracle_likelihood(uniform_network(2, 5), {"S0": "v0", "S1": "v4"}) == pytest.approx(0.04)

    def test_refuses_large_state_spaces(self):
        with pytest.raises(InferenceError, match="refuses"):
            oracle_likelihood(uniform_network(9, 10), {"S0": "v0"})

    def test_evidence_slicing_counts(self):
        # 10^8 states unsliced, 10^6 once two variables are observed
        assert oracle_likelihood(uniform_network(8, 10), {"S0": "v0", "S1": "v0"}) == pytest.approx(0.01)

    def test_needs_closed_universe(self):
        net = Network(
            (VariableDecl("N", LargeCountable("AB")),),
            (CPD("N", (), Factor({"N"}, Leaf(Const(0.0)))),),
        )
        with pytest.raises(InferenceError, match="closed universe"):
            oracle_likelihood(net, {})
        p = oracle_posterior(
            net_with_point(), {}, "N", ClosedUniverse({"N": strings_up_to("AB", 2)})
        )
        assert p.explicit == {"AB": 1.0}

    def test_query_observed(self):
        with pytest.raises(InferenceError):
            oracle_posterior(uniform_network(2, 2), {"S0": "v0"}, "S0")


def net_with_point() -> Network:
    tree = PredSplit(Atom(AtomKind.EQUAL, "N", "AB"), Leaf(Const(1.0)), Leaf(Const(0.0)))
    return Network((VariableDecl("N", LargeCountable("AB")),), (CPD("N", (), Factor({"N"}, tree)),), alphabet="AB")


class TestTV:
    def test_identical(self):
        p = Posterior("X", {"a": 0.5, "b": 0.5})
        assert tv_distance(p, p) == 0.0

    def test_disjoint(self):
        assert tv_distance(Posterior("X", {"a": 1.0}), Posterior("X", {"b": 1.0})) == 1.0

    def test_different_variables(self):
        with pytest.raises(ValueError):
            tv_distance(Posterior("X", {"a": 1.0}), Posterior("Y", {"a": 1.0}))


class TestRandomNetworks:
    def test_same_seed_same_network(self):
        a, b = random_network(7), random_network(7)
        assert serialize_network(a.net) == serialize_network(b.net)
        assert (a.evidence, a.queries) == (b.evidence, b.queries)

    def test_shape_limits(self):
        for seed in range(50):
            case = random_network(seed)
            assert 2 <= len(case.net.names) <= 6
            assert case.queries and case.evidence
            for v in case.net.variables:
                if v.is_large:
                    assert len(v.domain.universe) <= 50
                else:
                    assert len(v.domain.values) <= 5

    def test_evidence_is_possible(self):
        for seed in range(50):
            case = random_network(seed)
            assert oracle_likelihood(case.net, case.evidence) > 0
