import random

import pytest

from ldve.domain import LargeCountable, SmallExtensional, VariableDecl
from ldve.engine import CPD, Network, Posterior, elimination_order, evidence_likelihood, posterior
from ldve.errors import InferenceError, TreeError
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit, branch
from ldve.labels import Const
from ldve.oracle import ClosedUniverse, close_network, oracle_posterior, random_network, strings_up_to, tv_distance
from ldve.predicates import Atom, AtomKind, single_edit_neighbors

P_CE_MALE = 0.1 * 0.05 + 0.9 * 0.005
P_SDE_MALE = 0.1 * 0.15 + 0.9 * 0.015
P_NOERR_MALE = 0.1 * 0.80 + 0.9 * 0.98


def split(var, pairs, otherwise=None):
    return SmallSplit(var, tuple(branch([v], node) for v, node in pairs), otherwise)


def tie_network():
    """A (small) and Z (large) are both parents of X; both have fill 0."""
    is_a = Atom(AtomKind.EQUAL, "Z", "A")
    x_given = split(
        "A",
        [
            ("a0", split("X", [("x0", PredSplit(is_a, Leaf(Const(0.9)), Leaf(Const(0.2)))),
                               ("x1", PredSplit(is_a, Leaf(Const(0.1)), Leaf(Const(0.8))))])),
            ("a1", split("X", [("x0", Leaf(Const(0.5))), ("x1", Leaf(Const(0.5)))])),
        ],
    )
    z_prior = PredSplit(Atom(AtomKind.IN_SET, "Z", frozenset({"A", "B"})), Leaf(Const(0.5)), Leaf(Const(0.0)))
    return Network(
        (
            VariableDecl("A", SmallExtensional(("a0", "a1"))),
            VariableDecl("Z", LargeCountable("AB")),
            VariableDecl("X", SmallExtensional(("x0", "x1"))),
        ),
        (
            CPD("A", (), Factor({"A"}, split("A", [("a0", Leaf(Const(0.4))), ("a1", Leaf(Const(0.6)))]))),
            CPD("Z", (), Factor({"Z"}, z_prior)),
            CPD("X", ("A", "Z"), Factor({"A", "Z", "X"}, x_given)),
        ),
        alphabet="AB",
    )


class TestEliminationOrder:
    def test_large_first_on_ties(self):
        assert elimination_order(tie_network(), "X", {}) == ["Z", "A"]

    def test_single_hidden_variable(self):
        assert elimination_order(tie_network(), "X", {"A": "a0"}) == ["Z"]

    def test_user_order_verbatim(self):
        assert elimination_order(tie_network(), "X", {}, ["A", "Z"]) == ["A", "Z"]

    def test_user_order_must_be_a_permutation(self):
        with pytest.raises(InferenceError):
            elimination_order(tie_network(), "X", {}, ["A"])
        with pytest.raises(InferenceError):
            elimination_order(tie_network(), "X", {}, ["A", "Z", "X"])

    def test_query_observed(self):
        with pytest.raises(InferenceError):
            elimination_order(tie_network(), "X", {"X": "x0"})

    def test_linkage_order_covers_hidden_variables(self, same_net):
        ev = {"Fname_x": "DAVID", "Fname_y": "DAVIG", "Phone_x": "5551234", "Phone_y": "5551234"}
        order = elimination_order(same_net, "Sex", ev)
        assert sorted(order) == sorted(set(same_net.names) - set(ev) - {"Sex"})
        # EFx reaches fill 0 once SloppyX is gone, while Afname still has fill 1
        assert order.index("EFx") < order.index("Afname")


class TestPosterior:
    def test_hand_computed_marginal(self):
        p = posterior(tie_network(), {}, "X")
        assert p.explicit["x0"] == pytest.approx(0.4 * (0.5 * 0.9 + 0.5 * 0.2) + 0.6 * 0.5, rel=1e-12)

    def test_matches_oracle_both_orders(self):
        net = tie_network()
        closed = close_network(net, ClosedUniverse({"Z": strings_up_to("AB", 3)}))
        truth = oracle_posterior(closed, {"X": "x1"}, "Z")
        for order in (["A"], None):
            assert tv_distance(posterior(net, {"X": "x1"}, "Z", order=order), truth) <= 1e-12

    def test_noerr_forces_the_name(self, same_net):
        p = posterior(same_net, {"Fname_x": "DAVID", "EFx": "noerr"}, "Afname")
        assert p.explicit == {"DAVID": 1.0} and p.complement is None

    def test_unseen_name_has_closed_form(self, same_net, cfg):
        """Every single-edit neighbor of XQZT is unseen, so the recorded name
        has marginal probability pnew and each posterior weight is a simple ratio."""
        pnew = cfg.tables["male"].pnew
        assert not single_edit_neighbors("XQZT", cfg.alphabet) & set(cfg.tables["male"].entries)
        p = posterior(same_net, {"Fname_x": "XQZT", "Sex": "male"}, "Afname")
        assert p.explicit["XQZT"] == pytest.approx(P_NOERR_MALE + P_CE_MALE * pnew, rel=1e-12)
        assert p.explicit["XQZA"] == pytest.approx(P_SDE_MALE / 100 + P_CE_MALE * pnew, rel=1e-12)
        assert p.complement.per_value == pytest.approx(P_CE_MALE * pnew, rel=1e-12)
        assert p.probability("JOHNNYX", same_net.env) == p.complement.per_value
        assert p.probability("XQZA", same_net.env) == p.explicit["XQZA"]

    def test_prior_without_evidence(self, same_net):
        assert posterior(same_net, {}, "Sex").explicit == pytest.approx({"male": 0.5, "female": 0.5})

    def test_zero_probability_evidence(self, same_net):
        with pytest.raises(InferenceError, match="probability zero"):
            posterior(same_net, {"Fname_x": "DAVID", "Afname": "JOHN", "EFx": "noerr"}, "Sex")

    def test_unknown_names(self, same_net):
        with pytest.raises(InferenceError):
            posterior(same_net, {}, "Nobody")
        with pytest.raises(InferenceError):
            posterior(same_net, {"Nobody": "x"}, "Sex")
        with pytest.raises(InferenceError):
            posterior(same_net, {"Sex": "other"}, "Afname")

    def test_deterministic(self, same_net):
        ev = {"Fname_x": "DAVID", "Fname_y": "DAVIG"}
        assert posterior(same_net, ev, "Afname") == posterior(same_net, ev, "Afname")

    def test_normalization_is_enforced(self):
        with pytest.raises(InferenceError):
            Posterior("X", {"x0": 0.5})


class TestLikelihood:
    def test_root_observation(self, same_net):
        assert evidence_likelihood(same_net, {"Sex": "male"}) == pytest.approx(0.5, rel=1e-15)

    def test_recorded_name_marginal(self, same_net, cfg):
        pnew = cfg.tables["male"].pnew
        assert evidence_likelihood(same_net, {"Fname_x": "XQZT", "Sex": "male"}) == pytest.approx(
            0.5 * pnew, rel=1e-12
        )

    def test_impossible(self, same_net):
        assert evidence_likelihood(same_net, {"Fname_x": "DAVID", "Afname": "JOHN", "EFx": "noerr"}) == 0.0

    def test_needs_evidence(self, same_net):
        with pytest.raises(InferenceError):
            evidence_likelihood(same_net, {})

    @pytest.mark.parametrize("seed", range(10))
    def test_order_invariance(self, seed):
        case = random_network(seed)
        hidden = elimination_order(case.net, None, case.evidence)
        base = evidence_likelihood(case.net, case.evidence)
        rng = random.Random(seed)
        for _ in range(3):
            rng.shuffle(hidden)
            assert evidence_likelihood(case.net, case.evidence, order=hidden) == pytest.approx(base, rel=1e-12)


class TestNetwork:
    def test_cycle_rejected(self):
        a = SmallExtensional(("0", "1"))
        f = lambda *names: Factor(set(names), Leaf(Const(0.5)))
        with pytest.raises(TreeError, match="cycle"):
            Network(
                (VariableDecl("P", a), VariableDecl("Q", a)),
                (CPD("P", ("Q",), f("P", "Q")), CPD("Q", ("P",), f("P", "Q"))),
            )

    def test_cpd_scope_checked(self):
        with pytest.raises(TreeError):
            CPD("P", (), Factor({"P", "Q"}, Leaf(Const(0.5))))

    def test_every_variable_needs_a_cpd(self):
        a = SmallExtensional(("0", "1"))
        with pytest.raises(TreeError):
            Network((VariableDecl("P", a), VariableDecl("Q", a)), (CPD("P", (), Factor({"P"}, Leaf(Const(0.5)))),))
