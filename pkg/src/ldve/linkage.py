"""Person-identification networks and same-person odds for two records.

The same-person network has one actual first name ``Afname`` (drawn from a
name table given ``Sex``) and two recorded names, each produced from it by
no error, a single-letter substitution, or a copy error (an independent draw
from the name table).  The different-person network is two independent
copies of the single-record chain.
"""

from __future__ import annotations

import json
import string
from dataclasses import dataclass, field
from importlib import resources
from pathlib import Path
from typing import Mapping

from ldve.domain import (
    LargeCountable,
    NameTable,
    SmallExtensional,
    VariableDecl,
    load_name_table,
)
from ldve.engine import CPD, Network, elimination_order, evidence_likelihood
from ldve.errors import DomainError, InferenceError, SpecError
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit, branch
from ldve.labels import Const, PNewConst, PrSing, TablePdf
from ldve.predicates import Atom, AtomKind, Var

SEXES = ("male", "female")
ERRORS = ("noerr", "sde", "ce")
SLOPPY = ("sloppy", "careful")
MOVE = ("moved", "stayed")


@dataclass(frozen=True)
class RecordDesc:
    fname: str
    phone: str | None = None

    def __post_init__(self):
        if not self.fname:
            raise ValueError("fname must be nonempty")


@dataclass
class LinkageConfig:
    tables: dict[str, NameTable]
    male_table: str = "male"
    female_table: str = "female"
    pnew: float = 1e-5
    sloppy_prior: dict[str, float] = field(default_factory=lambda: {"sloppy": 0.1, "careful": 0.9})
    error_prior: dict[str, dict[str, float]] = field(
        default_factory=lambda: {
            "sloppy": {"noerr": 0.80, "sde": 0.15, "ce": 0.05},
            "careful": {"noerr": 0.98, "sde": 0.015, "ce": 0.005},
        }
    )
    sex_prior: dict[str, float] = field(default_factory=lambda: {"male": 0.5, "female": 0.5})
    prior_same: float = 0.01
    alphabet: str = string.ascii_uppercase
    phone_digits: int = 7
    move_prior: float = 0.1

    def __post_init__(self):
        for tid in (self.male_table, self.female_table):
            if tid not in self.tables:
                raise SpecError(f"linkage config: missing table {tid!r}")
        dists = {"sloppy_prior": self.sloppy_prior, "sex_prior": self.sex_prior}
        dists.update({f"error_prior[{k}]": v for k, v in self.error_prior.items()})
        for name, dist in dists.items():
            if abs(sum(dist.values()) - 1.0) > 1e-9 or min(dist.values()) < 0:
                raise SpecError(f"linkage config: {name} is not a distribution")
        if set(self.sloppy_prior) != set(SLOPPY) or set(self.error_prior) != set(SLOPPY):
            raise SpecError(f"linkage config: sloppiness values must be {SLOPPY}")
        if any(set(d) != set(ERRORS) for d in self.error_prior.values()):
            raise SpecError(f"linkage config: error values must be {ERRORS}")
        if set(self.sex_prior) != set(SEXES):
            raise SpecError(f"linkage config: sex values must be {SEXES}")
        if not 0.0 < self.prior_same < 1.0:
            raise SpecError("linkage config: prior_same must be in (0,1)")
        if not 0.0 <= self.move_prior <= 1.0:
            raise SpecError("linkage config: move_prior must be in [0,1]")

    @property
    def legal_phones(self) -> int:
        return 10 ** self.phone_digits

    def table_for(self, sex: str) -> str:
        return self.male_table if sex == "male" else self.female_table


def _small(dist: Mapping[str, float], var: str, values) -> SmallSplit:
    return SmallSplit(var, tuple(branch([v], Leaf(Const(dist[v]))) for v in values))


def prior_factor(var: str, dist: Mapping[str, float], values) -> Factor:
    return Factor({var}, _small(dist, var, values))


def error_factor(ef: str, sloppy: str, cfg: LinkageConfig) -> Factor:
    root = SmallSplit(
        sloppy,
        tuple(branch([s], _small(cfg.error_prior[s], ef, ERRORS)) for s in SLOPPY),
    )
    return Factor({ef, sloppy}, root)


def name_prior_factor(afname: str, sex: str, cfg: LinkageConfig) -> Factor:
    """P(Afname | Sex): table lookup for listed names, Pnew otherwise."""
    def by_table(table: str):
        return PredSplit(
            Atom(AtomKind.IN_TABLE, afname, table),
            Leaf(TablePdf(Var(afname), table)),
            Leaf(PNewConst(table)),
        )

    root = SmallSplit(sex, tuple(branch([s], by_table(cfg.table_for(s))) for s in SEXES))
    return Factor({afname, sex}, root)


def recorded_name_factor(fname: str, afname: str, sex: str, ef: str, cfg: LinkageConfig) -> Factor:
    """P(Fname | Afname, Sex, EF) as the three-case decision tree."""
    noerr = PredSplit(Atom(AtomKind.EQUAL, afname, Var(fname)), Leaf(Const(1.0)), Leaf(Const(0.0)))
    sde = PredSplit(
        Atom(AtomKind.SINGLE_EDIT, afname, Var(fname)),
        Leaf(PrSing(Var(fname), cfg.alphabet)),
        Leaf(Const(0.0)),
    )

    def copied(table: str):
        return PredSplit(
            Atom(AtomKind.IN_TABLE, fname, table),
            Leaf(TablePdf(Var(fname), table)),
            Leaf(PNewConst(table)),
        )

    ce = SmallSplit(sex, tuple(branch([s], copied(cfg.table_for(s))) for s in SEXES))
    root = SmallSplit(ef, (branch(["noerr"], noerr), branch(["sde"], sde), branch(["ce"], ce)))
    return Factor({fname, afname, sex, ef}, root)


def _phone_factors(aphone: str, cfg: LinkageConfig) -> Factor:
    # uniform over the legal (fixed-length) numbers
    return Factor({aphone}, Leaf(Const(1.0 / cfg.legal_phones)))


def _copy_phone(phone: str, aphone: str) -> Factor:
    return Factor(
        {phone, aphone},
        PredSplit(Atom(AtomKind.EQUAL, aphone, Var(phone)), Leaf(Const(1.0)), Leaf(Const(0.0))),
    )


def _name_vars(cfg: LinkageConfig, *names: str) -> list[VariableDecl]:
    return [VariableDecl(n, LargeCountable(cfg.alphabet)) for n in names]


def _phone_vars(cfg: LinkageConfig, *names: str) -> list[VariableDecl]:
    domain = LargeCountable(string.digits, length=cfg.phone_digits)
    return [VariableDecl(n, domain) for n in names]


def _chain(cfg, suffix_x: str, sex: str, afname: str, sloppy: str, ef: str, fname: str):
    """Variables and CPDs of one sloppy-recorder -> error -> recorded-name chain."""
    variables = [
        VariableDecl(sloppy, SmallExtensional(SLOPPY)),
        VariableDecl(ef, SmallExtensional(ERRORS)),
    ] + _name_vars(cfg, fname)
    cpds = [
        CPD(sloppy, (), prior_factor(sloppy, cfg.sloppy_prior, SLOPPY)),
        CPD(ef, (sloppy,), error_factor(ef, sloppy, cfg)),
        CPD(fname, (afname, sex, ef), recorded_name_factor(fname, afname, sex, ef, cfg)),
    ]
    return variables, cpds


def build_same_network(cfg: LinkageConfig) -> Network:
    """Both records describe one person (shared Sex, Afname and Aphone)."""
    variables = [VariableDecl("Sex", SmallExtensional(SEXES))] + _name_vars(cfg, "Afname")
    cpds = [
        CPD("Sex", (), prior_factor("Sex", cfg.sex_prior, SEXES)),
        CPD("Afname", ("Sex",), name_prior_factor("Afname", "Sex", cfg)),
    ]
    for x, sloppy, ef in (("x", "SloppyX", "EFx"), ("y", "SloppyY", "EFy")):
        vs, cs = _chain(cfg, x, "Sex", "Afname", sloppy, ef, f"Fname_{x}")
        variables += vs
        cpds += cs

    variables += _phone_vars(cfg, "Aphone", "Phone_x", "Phone_y")
    variables.append(VariableDecl("Move", SmallExtensional(MOVE)))
    moved = {"moved": cfg.move_prior, "stayed": 1.0 - cfg.move_prior}
    phone_y = SmallSplit(
        "Move",
        (
            branch(["stayed"], _copy_phone("Phone_y", "Aphone").root),
            branch(["moved"], Leaf(Const(1.0 / cfg.legal_phones))),
        ),
    )
    cpds += [
        CPD("Aphone", (), _phone_factors("Aphone", cfg)),
        CPD("Move", (), prior_factor("Move", moved, MOVE)),
        CPD("Phone_x", ("Aphone",), _copy_phone("Phone_x", "Aphone")),
        CPD("Phone_y", ("Aphone", "Move"), Factor({"Phone_y", "Aphone", "Move"}, phone_y)),
    ]
    return Network(variables, cpds, dict(cfg.tables), cfg.alphabet)


def build_diff_network(cfg: LinkageConfig) -> Network:
    """The records describe two different people: two independent chains."""
    variables: list[VariableDecl] = []
    cpds: list[CPD] = []
    for x, sloppy, ef in (("x", "SloppyX", "EFx"), ("y", "SloppyY", "EFy")):
        sex, afname, aphone = f"Sex_{x}", f"Afname_{x}", f"Aphone_{x}"
        variables.append(VariableDecl(sex, SmallExtensional(SEXES)))
        variables += _name_vars(cfg, afname)
        cpds += [
            CPD(sex, (), prior_factor(sex, cfg.sex_prior, SEXES)),
            CPD(afname, (sex,), name_prior_factor(afname, sex, cfg)),
        ]
        vs, cs = _chain(cfg, x, sex, afname, sloppy, ef, f"Fname_{x}")
        variables += vs + _phone_vars(cfg, aphone, f"Phone_{x}")
        cpds += cs + [
            CPD(aphone, (), _phone_factors(aphone, cfg)),
            CPD(f"Phone_{x}", (aphone,), _copy_phone(f"Phone_{x}", aphone)),
        ]
    return Network(variables, cpds, dict(cfg.tables), cfg.alphabet)


def record_evidence(x: RecordDesc, y: RecordDesc, cfg: LinkageConfig) -> dict[str, str]:
    evidence = {"Fname_x": x.fname, "Fname_y": y.fname}
    for key, rec in (("Phone_x", x), ("Phone_y", y)):
        if rec.phone is None:
            continue
        if not (rec.phone.isdigit() and len(rec.phone) == cfg.phone_digits):
            raise InferenceError(f"{rec.phone!r} is not a legal {cfg.phone_digits}-digit phone number")
        evidence[key] = rec.phone
    return evidence


@dataclass
class OddsResult:
    odds: float
    likelihood_same: float
    likelihood_diff: float
    prior_odds: float
    trace: list = field(default_factory=list)


def odds_details(x: RecordDesc, y: RecordDesc, cfg: LinkageConfig) -> OddsResult:
    evidence = record_evidence(x, y, cfg)
    trace: list = []
    same_net = build_same_network(cfg)
    # Afname goes first so its leaf masses are the per-error-combination ones
    order = [v for v in elimination_order(same_net, None, evidence) if v != "Afname"]
    same = evidence_likelihood(same_net, evidence, order=["Afname"] + order, trace=trace)
    diff = evidence_likelihood(build_diff_network(cfg), evidence)
    if diff == 0.0:
        raise InferenceError("records impossible under difference model")
    prior_odds = cfg.prior_same / (1.0 - cfg.prior_same)
    return OddsResult(same / diff * prior_odds, same, diff, prior_odds, trace)


def odds(x: RecordDesc, y: RecordDesc, cfg: LinkageConfig) -> float:
    """Posterior odds that the two records describe the same person."""
    return odds_details(x, y, cfg).odds


DATA = resources.files("ldve") / "data"


def load_config(path: str | Path | None = None) -> LinkageConfig:
    """Read a linkage config file; ``None`` gives the shipped default."""
    if path is None:
        source = DATA / "linkage_default.json"
        base = DATA
    else:
        source = Path(path)
        base = source.parent
    try:
        raw = json.loads(source.read_text(encoding="utf-8"))
    except json.JSONDecodeError as exc:
        raise SpecError(f"{source}: line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return config_from_dict(raw, base)


def config_from_dict(raw: dict, base=DATA) -> LinkageConfig:
    raw = dict(raw)
    pnew = raw.get("pnew", 1e-5)
    tables = {}
    for i, entry in enumerate(raw.pop("tables", [])):
        try:
            tid = entry["id"]
            text = (base / entry["path"]).read_text(encoding="utf-8")
            tables[tid] = load_name_table(
                text, entry.get("pnew", pnew), entry.get("coverage", 0.9), table_id=tid
            )
        except KeyError as exc:
            raise SpecError(f"linkage config: tables[{i}] misses key {exc.args[0]!r}") from None
        except (OSError, DomainError) as exc:
            raise SpecError(f"linkage config: tables[{i}]: {exc}") from None
    known = {f for f in LinkageConfig.__dataclass_fields__ if f != "tables"}
    unknown = set(raw) - known
    if unknown:
        raise SpecError(f"linkage config: unknown keys {sorted(unknown)}")
    try:
        return LinkageConfig(tables=tables, **raw)
    except (TypeError, AttributeError) as exc:
        raise SpecError(f"linkage config: {exc}") from None
