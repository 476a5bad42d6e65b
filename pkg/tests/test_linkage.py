import dataclasses
import json

import pytest

from ldve.domain import UNBOUNDED, NameTable
from ldve.engine import Network, check_normalization, evidence_likelihood
from ldve.errors import InferenceError, SpecError
from ldve.factor_tree import evaluate
from ldve.linkage import (
    LinkageConfig,
    RecordDesc,
    build_diff_network,
    build_same_network,
    config_from_dict,
    load_config,
    odds,
    odds_details,
)
from ldve.oracle import ClosedUniverse, close_network, close_table, oracle_likelihood, strings_up_to

PHONE_VARS = {"Aphone", "Phone_x", "Phone_y", "Move", "Aphone_x", "Aphone_y"}
SMALL_UNIVERSE = strings_up_to("AB", 3)


def small_config(**overrides) -> LinkageConfig:
    """Two tables over strings of length <= 3 on the alphabet AB."""
    male = NameTable("male", {"A": 0.3, "AB": 0.2, "BAB": 0.1}, 1e-3, UNBOUNDED)
    female = NameTable("female", {"B": 0.4, "BA": 0.1, "AB": 0.05}, 1e-3, UNBOUNDED)
    tables = {t.id: close_table(t, SMALL_UNIVERSE) for t in (male, female)}
    return LinkageConfig(tables, alphabet="AB", **overrides)


def names_only(net: Network) -> Network:
    """The name part of ``net`` over the closed universe (phones are disconnected)."""
    variables = [v for v in net.variables if v.name not in PHONE_VARS]
    cpds = [c for c in net.cpds if c.child not in PHONE_VARS]
    closed = ClosedUniverse({v.name: SMALL_UNIVERSE for v in variables if v.is_large})
    return close_network(Network(variables, cpds, net.tables, net.alphabet), closed)


class TestCPDs:
    def test_single_edit_case(self, fig2, same_net):
        a = {"EFx": "sde", "Afname": "DAVE", "Fname_x": "DAVO", "Sex": "female"}
        assert evaluate(fig2, a, same_net.env) == pytest.approx(1 / 100, rel=1e-15)

    def test_no_error_case(self, fig2, same_net):
        a = {"EFx": "noerr", "Afname": "DAVE", "Fname_x": "DAVE", "Sex": "female"}
        assert evaluate(fig2, a, same_net.env) == 1.0

    def test_copy_error_case(self, fig2, same_net):
        a = {"EFx": "ce", "Afname": "JOHN", "Fname_x": "DAVID", "Sex": "male"}
        assert evaluate(fig2, a, same_net.env) == pytest.approx(0.02363, rel=1e-12)

    def test_networks_normalize(self, same_net, diff_net):
        assert check_normalization(same_net) == []
        assert check_normalization(diff_net) == []


class TestDiffNetwork:
    def test_factorizes(self, same_net, diff_net):
        """Under the two-person model the records are independent."""
        both = evidence_likelihood(diff_net, {"Fname_x": "DAVID", "Fname_y": "MARY"})
        x = evidence_likelihood(same_net, {"Fname_x": "DAVID"})
        y = evidence_likelihood(same_net, {"Fname_y": "MARY"})
        assert both == pytest.approx(x * y, rel=1e-12)

    def test_symmetric(self, diff_net):
        a = evidence_likelihood(diff_net, {"Fname_x": "DAVID", "Fname_y": "DAVIG"})
        b = evidence_likelihood(diff_net, {"Fname_x": "DAVIG", "Fname_y": "DAVID"})
        assert a == pytest.approx(b, rel=1e-12)


class TestOdds:
    def test_ordering(self, cfg):
        same = odds(RecordDesc("DAVID"), RecordDesc("DAVID"), cfg)
        typo = odds(RecordDesc("DAVID"), RecordDesc("DAVIG"), cfg)
        unrelated = odds(RecordDesc("DAVID"), RecordDesc("XQZT"), cfg)
        assert same > typo > unrelated > 0

    @pytest.mark.parametrize("pair", [("DAVID", "DAVIG"), ("JOHN", "JOHM"), ("MARY", "XQZT")])
    def test_swap_symmetry(self, cfg, pair):
        a, b = pair
        ab = odds(RecordDesc(a), RecordDesc(b), cfg)
        ba = odds(RecordDesc(b), RecordDesc(a), cfg)
        assert ab == pytest.approx(ba, rel=1e-9)

    def test_even_prior_gives_likelihood_ratio(self, cfg):
        even = dataclasses.replace(cfg, prior_same=0.5)
        r = odds_details(RecordDesc("DAVID"), RecordDesc("DAVIG"), even)
        assert r.prior_odds == 1.0
        assert r.odds == pytest.approx(r.likelihood_same / r.likelihood_diff, rel=1e-15)

    def test_phones(self, cfg):
        names = odds(RecordDesc("DAVID"), RecordDesc("DAVIG"), cfg)
        same = odds(RecordDesc("DAVID", "5551234"), RecordDesc("DAVIG", "5551234"), cfg)
        other = odds(RecordDesc("DAVID", "5551234"), RecordDesc("DAVIG", "5559876"), cfg)
        assert same > names > other
        # a different number is only possible after a move
        assert other == pytest.approx(names * cfg.move_prior, rel=1e-12)

    def test_bad_phone(self, cfg):
        with pytest.raises(InferenceError):
            odds(RecordDesc("DAVID", "555"), RecordDesc("DAVIG"), cfg)

    def test_trace_has_the_afname_leaves(self, cfg):
        r = odds_details(RecordDesc("DAVID"), RecordDesc("DAVIG"), cfg)
        assert any(leaf.variable == "Afname" for leaf in r.trace)


class TestAgainstOracle:
    @pytest.mark.parametrize("pair", [("AB", "AB"), ("AB", "BB"), ("AAA", "BBB"), ("BAB", "BAA"), ("A", "B")])
    def test_odds(self, pair):
        cfg = small_config(prior_same=0.2)
        x, y = pair
        ev = {"Fname_x": x, "Fname_y": y}
        same = oracle_likelihood(names_only(build_same_network(cfg)), ev)
        diff = oracle_likelihood(names_only(build_diff_network(cfg)), ev)
        expected = same / diff * 0.2 / 0.8
        assert odds(RecordDesc(x), RecordDesc(y), cfg) == pytest.approx(expected, rel=1e-12)


class TestConfig:
    def test_shipped_default(self, cfg):
        assert set(cfg.tables) == {"male", "female"}
        assert cfg.tables["male"].entries["DAVID"] == pytest.approx(0.02363, rel=1e-12)

    def test_unknown_key(self):
        with pytest.raises(SpecError, match="unknown keys"):
            config_from_dict({"tables": [], "colour": 1})

    def test_missing_table(self):
        with pytest.raises(SpecError, match="missing table"):
            config_from_dict({"tables": []})

    def test_table_without_path(self):
        with pytest.raises(SpecError, match=r"tables\[0\] misses key 'path'"):
            config_from_dict({"tables": [{"id": "male"}]})

    def test_unreadable_table(self, tmp_path):
        with pytest.raises(SpecError, match=r"tables\[0\]"):
            config_from_dict({"tables": [{"id": "male", "path": "nope.txt"}]}, tmp_path)

    def test_bad_distribution(self, cfg):
        with pytest.raises(SpecError, match="not a distribution"):
            LinkageConfig(cfg.tables, sex_prior={"male": 0.7, "female": 0.7})

    def test_bad_prior_same(self, cfg):
        with pytest.raises(SpecError):
            LinkageConfig(cfg.tables, prior_same=1.0)

    def test_bad_json(self, tmp_path):
        path = tmp_path / "cfg.json"
        path.write_text('{"tables": [\n}')
        with pytest.raises(SpecError, match="line 2 column 1"):
            load_config(path)

    def test_file_round_trip(self, tmp_path):
        (tmp_path / "m.txt").write_text("DAVID 2\nJOHN 1\n")
        (tmp_path / "f.txt").write_text("MARY 1\n")
        raw = {
            "tables": [{"id": "male", "path": "m.txt"}, {"id": "female", "path": "f.txt"}],
            "prior_same": 0.05,
        }
        (tmp_path / "cfg.json").write_text(json.dumps(raw))
        cfg = load_config(tmp_path / "cfg.json")
        assert cfg.prior_same == 0.05
        assert cfg.tables["male"].entries["DAVID"] == pytest.approx(0.6, rel=1e-12)
