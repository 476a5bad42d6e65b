"""Network files (JSON syntax), posterior serialization and a
deterministic JSON writer.

Tree nodes in a network file mirror :mod:`ldve.factor_tree` one to one::

    {"split": "EFx", "branches": [{"values": ["noerr"], "node": ...}], "else": ...}
    {"pred": {"kind": "singlet", "subject": "Afname", "arg": {"var": "Fname_x"}},
     "yes": ..., "no": ...}
    {"leaf": 0.5}

Labels are numbers or one-key objects: ``{"prsing": term}``,
``{"lookup": term, "table": id}``, ``{"pnew": id}``, ``{"product": [...]}``,
``{"sum": [...]}``, where a term is a string or ``{"var": name}``.
"""

from __future__ import annotations

import json
import math
import warnings
from pathlib import Path
from typing import Any

from ldve.domain import (
    UNBOUNDED,
    LargeCountable,
    NameTable,
    SmallExtensional,
    VariableDecl,
    load_name_table,
)
from ldve.engine import CPD, Complement, Network, Posterior, check_normalization
from ldve.errors import LdveError, SpecError
from ldve.factor_tree import Factor, Leaf, PredSplit, SmallSplit, TreeNode
from ldve.labels import Const, PNewConst, PrSing, Product, Sum, TablePdf
from ldve.predicates import Atom, AtomKind, ConstraintSet, Literal, Var


class SpecWarning(UserWarning):
    """A network file loaded but failed a soft check (e.g. a CPD does not normalize)."""


# ----------------------------------------------------------------- JSON out


def _number(x: float | int) -> str:
    if isinstance(x, bool):
        return "true" if x else "false"
    if isinstance(x, int):
        return str(x)
    if not math.isfinite(x):
        raise ValueError(f"cannot write {x} as JSON")
    return format(x, ".17g")


def dumps(obj: Any, indent: int | None = 2) -> str:
    """JSON text with sorted keys and floats at 17 significant digits."""
    def write(o, level: int) -> str:
        pad = "" if indent is None else "\n" + " " * (indent * (level + 1))
        end = "" if indent is None else "\n" + " " * (indent * level)
        if o is None:
            return "null"
        if isinstance(o, (bool, int, float)):
            return _number(o)
        if isinstance(o, str):
            return json.dumps(o)
        if isinstance(o, dict):
            if not o:
                return "{}"
            items = [f"{pad}{json.dumps(str(k))}: {write(o[k], level + 1)}" for k in sorted(o)]
            return "{" + ",".join(items) + end + "}"
        if isinstance(o, (list, tuple)):
            if not o:
                return "[]"
            return "[" + ",".join(pad + write(v, level + 1) for v in o) + end + "]"
        raise TypeError(f"cannot serialize {type(o).__name__}")

    return write(obj, 0)


def _count_out(n: float | int):
    return "unbounded" if n == UNBOUNDED else int(n)


def _count_in(n, where: str):
    if n == "unbounded":
        return UNBOUNDED
    if isinstance(n, int) and not isinstance(n, bool) and n >= 0:
        return n
    raise SpecError(f"{where}: expected a nonnegative integer or \"unbounded\"")


# --------------------------------------------------------- trees and labels


def term_to_json(term):
    return {"var": term.name} if isinstance(term, Var) else term


def atom_to_json(atom: Atom) -> dict:
    if atom.kind is AtomKind.IN_SET:
        arg = sorted(atom.arg)
    else:
        arg = term_to_json(atom.arg)
    return {"kind": atom.kind.value, "subject": atom.subject, "arg": arg}


def label_to_json(label):
    if isinstance(label, Const):
        return float(label.value)
    if isinstance(label, PrSing):
        return {"prsing": term_to_json(label.term), "alphabet": label.alphabet}
    if isinstance(label, TablePdf):
        return {"lookup": term_to_json(label.term), "table": label.table}
    if isinstance(label, PNewConst):
        return {"pnew": label.table}
    if isinstance(label, Product):
        return {"product": [label_to_json(f) for f in label.factors]}
    if isinstance(label, Sum):
        return {"sum": [label_to_json(t) for t in label.terms]}
    raise TypeError(f"not a label: {label!r}")


def tree_to_json(node: TreeNode, order: dict[str, list[str]] | None = None) -> dict:
    if isinstance(node, Leaf):
        return {"leaf": label_to_json(node.label)}
    if isinstance(node, SmallSplit):
        rank = {v: i for i, v in enumerate((order or {}).get(node.var, []))}
        out = {
            "split": node.var,
            "branches": [
                {
                    "values": sorted(values, key=lambda v: (rank.get(v, len(rank)), v)),
                    "node": tree_to_json(child, order),
                }
                for values, child in node.branches
            ],
        }
        if node.otherwise is not None:
            out["else"] = tree_to_json(node.otherwise, order)
        return out
    return {
        "pred": atom_to_json(node.atom),
        "yes": tree_to_json(node.yes, order),
        "no": tree_to_json(node.no, order),
    }


class _Reader:
    """Checks the raw JSON against the declared variables and tables;
    every error names the JSON path it occurred at."""

    def __init__(self, domains: dict, tables: dict, alphabet: str):
        self.domains = domains
        self.tables = tables
        self.alphabet = alphabet

    def fail(self, path: str, msg: str):
        raise SpecError(f"{path}: {msg}")

    def obj(self, raw, path: str, keys: set[str]) -> dict:
        if not isinstance(raw, dict):
            self.fail(path, f"expected an object, got {type(raw).__name__}")
        missing = keys - raw.keys()
        if missing:
            self.fail(path, f"missing key(s) {sorted(missing)}")
        return raw

    def var(self, name, path: str, large: bool | None = None) -> str:
        if not isinstance(name, str) or name not in self.domains:
            self.fail(path, f"undeclared variable {name!r}")
        if large is not None and self.domains[name].is_large != large:
            kind = "large" if large else "small"
            self.fail(path, f"variable {name} is not {kind}")
        return name

    def table(self, tid, path: str) -> str:
        if not isinstance(tid, str) or tid not in self.tables:
            self.fail(path, f"undeclared table {tid!r}")
        return tid

    def term(self, raw, path: str):
        if isinstance(raw, dict):
            raw = self.obj(raw, path, {"var"})
            return Var(self.var(raw["var"], path + ".var", large=True))
        if isinstance(raw, str) and raw:
            return raw.upper()
        self.fail(path, "expected a string or {\"var\": name}")

    def atom(self, raw, path: str) -> Atom:
        raw = self.obj(raw, path, {"kind", "subject", "arg"})
        try:
            kind = AtomKind(raw["kind"])
        except ValueError:
            self.fail(path + ".kind", f"unknown predicate {raw['kind']!r}")
        subject = self.var(raw["subject"], path + ".subject", large=True)
        arg = raw["arg"]
        if kind is AtomKind.IN_TABLE:
            arg = self.table(arg, path + ".arg")
        elif kind is AtomKind.IN_SET:
            if not isinstance(arg, list) or not arg or not all(isinstance(v, str) for v in arg):
                self.fail(path + ".arg", "inset needs a nonempty list of strings")
            arg = frozenset(arg)
        else:
            arg = self.term(arg, path + ".arg")
        return Atom(kind, subject, arg)

    def label(self, raw, path: str):
        if isinstance(raw, (int, float)) and not isinstance(raw, bool):
            if raw < 0 or not math.isfinite(raw):
                self.fail(path, f"constant {raw} must be finite and nonnegative")
            return Const(float(raw))
        if not isinstance(raw, dict):
            self.fail(path, "expected a number or a label object")
        if "prsing" in raw:
            return PrSing(self.term(raw["prsing"], path + ".prsing"), raw.get("alphabet", self.alphabet))
        if "lookup" in raw:
            raw = self.obj(raw, path, {"lookup", "table"})
            return TablePdf(self.term(raw["lookup"], path + ".lookup"), self.table(raw["table"], path + ".table"))
        if "pnew" in raw:
            return PNewConst(self.table(raw["pnew"], path + ".pnew"))
        for key, cls in (("product", Product), ("sum", Sum)):
            if key in raw:
                items = raw[key]
                if not isinstance(items, list) or not items:
                    self.fail(path + "." + key, "expected a nonempty list")
                return cls(tuple(self.label(x, f"{path}.{key}[{i}]") for i, x in enumerate(items)))
        self.fail(path, f"unknown label {sorted(raw)}")

    def tree(self, raw, path: str) -> TreeNode:
        if not isinstance(raw, dict):
            self.fail(path, "expected a tree node object")
        if "leaf" in raw:
            return Leaf(self.label(raw["leaf"], path + ".leaf"))
        if "pred" in raw:
            raw = self.obj(raw, path, {"pred", "yes", "no"})
            return PredSplit(
                self.atom(raw["pred"], path + ".pred"),
                self.tree(raw["yes"], path + ".yes"),
                self.tree(raw["no"], path + ".no"),
            )
        if "split" in raw:
            raw = self.obj(raw, path, {"split", "branches"})
            var = self.var(raw["split"], path + ".split", large=False)
            branches = []
            for i, b in enumerate(raw["branches"]):
                bpath = f"{path}.branches[{i}]"
                b = self.obj(b, bpath, {"values", "node"})
                values = b["values"]
                if not isinstance(values, list) or not values:
                    self.fail(bpath + ".values", "expected a nonempty list")
                for v in values:
                    if v not in self.domains[var]:
                        self.fail(bpath + ".values", f"{v!r} is not a value of {var}")
                branches.append((frozenset(values), self.tree(b["node"], bpath + ".node")))
            otherwise = self.tree(raw["else"], path + ".else") if "else" in raw else None
            try:
                return SmallSplit(var, tuple(branches), otherwise)
            except LdveError as exc:
                self.fail(path, str(exc))
        self.fail(path, "node needs one of 'leaf', 'pred', 'split'")


# -------------------------------------------------------------- networks


def _load_table(raw: dict, path: str, base_dir: Path | None) -> NameTable:
    tid = raw["id"]
    try:
        if "entries" in raw:
            return NameTable(tid, dict(raw["entries"]), raw["pnew"], _count_in(raw["n_unseen"], path + ".n_unseen"))
        if "path" in raw:
            file = Path(raw["path"])
            if not file.is_absolute() and base_dir is not None:
                file = base_dir / file
            return load_name_table(
                file.read_text(encoding="utf-8"),
                raw["pnew"],
                raw.get("coverage", 0.9),
                table_id=tid,
            )
    except KeyError as exc:
        raise SpecError(f"{path}: missing key {exc.args[0]!r}") from None
    except (OSError, ValueError) as exc:
        raise SpecError(f"{path}: {exc}") from None
    raise SpecError(f"{path}: table needs 'entries' or 'path'")


def network_from_dict(raw: dict, base_dir: str | Path | None = None, strict: bool = False) -> Network:
    base = Path(base_dir) if base_dir is not None else None
    probe = _Reader({}, {}, "")
    raw = probe.obj(raw, "$", {"variables", "cpds"})
    alphabet = raw.get("alphabet", "ABCDEFGHIJKLMNOPQRSTUVWXYZ")

    variables = []
    for i, v in enumerate(raw["variables"]):
        path = f"$.variables[{i}]"
        v = probe.obj(v, path, {"name", "kind"})
        try:
            if v["kind"] == "small":
                values = v.get("values")
                if not isinstance(values, list):
                    probe.fail(path + ".values", "a small variable needs a list of values")
                domain = SmallExtensional(tuple(values))
            elif v["kind"] == "large":
                universe = v.get("universe")
                domain = LargeCountable(
                    v.get("alphabet", alphabet),
                    None if universe is None else frozenset(u.upper() for u in universe),
                    v.get("length"),
                )
            else:
                probe.fail(path + ".kind", f"expected 'small' or 'large', got {v['kind']!r}")
        except (TypeError, ValueError) as exc:
            if isinstance(exc, SpecError):
                raise
            probe.fail(path, str(exc))
        variables.append(VariableDecl(v["name"], domain))
    domains = {v.name: v.domain for v in variables}
    if len(domains) != len(variables):
        probe.fail("$.variables", "duplicate variable names")

    tables = {}
    for i, t in enumerate(raw.get("tables", [])):
        path = f"$.tables[{i}]"
        t = probe.obj(t, path, {"id"})
        if t["id"] in tables:
            probe.fail(path + ".id", f"duplicate table id {t['id']!r}")
        tables[t["id"]] = _load_table(t, path, base)

    reader = _Reader(domains, tables, alphabet)
    cpds = []
    for i, c in enumerate(raw["cpds"]):
        path = f"$.cpds[{i}]"
        c = reader.obj(c, path, {"child", "tree"})
        child = reader.var(c["child"], path + ".child")
        parents = tuple(reader.var(p, f"{path}.parents[{j}]") for j, p in enumerate(c.get("parents", [])))
        tree = reader.tree(c["tree"], path + ".tree")
        try:
            cpds.append(CPD(child, parents, Factor(frozenset(parents) | {child}, tree)))
        except LdveError as exc:
            reader.fail(path, str(exc))
    try:
        net = Network(tuple(variables), tuple(cpds), tables, alphabet)
    except LdveError as exc:
        raise SpecError(f"$: {exc}") from None

    problems = check_normalization(net)
    if problems:
        msg = "CPDs do not normalize: " + "; ".join(problems[:5])
        if strict:
            raise SpecError(msg)
        warnings.warn(msg, SpecWarning, stacklevel=2)
    return net


def parse_network(text: str, base_dir: str | Path | None = None, strict: bool = False) -> Network:
    """Parse a network file; syntax errors report line and column."""
    try:
        raw = json.loads(text)
    except json.JSONDecodeError as exc:
        raise SpecError(f"line {exc.lineno} column {exc.colno}: {exc.msg}") from None
    return network_from_dict(raw, base_dir, strict)


def load_network(path: str | Path, strict: bool = False) -> Network:
    path = Path(path)
    try:
        text = path.read_text(encoding="utf-8")
    except OSError as exc:
        raise SpecError(f"{path}: {exc.strerror or exc}") from None
    try:
        return parse_network(text, path.parent, strict)
    except SpecError as exc:
        raise SpecError(f"{path}: {exc}") from None


def network_to_dict(net: Network) -> dict:
    """Network-file form of ``net`` with every table written inline."""
    order = {v.name: list(v.domain.values) for v in net.variables if not v.is_large}
    variables = []
    for v in net.variables:
        if v.is_large:
            d = {"name": v.name, "kind": "large", "alphabet": v.domain.alphabet}
            if v.domain.universe is not None:
                d["universe"] = sorted(v.domain.universe)
            if v.domain.length is not None:
                d["length"] = v.domain.length
        else:
            d = {"name": v.name, "kind": "small", "values": list(v.domain.values)}
        variables.append(d)
    tables = [
        {"id": t.id, "entries": dict(t.entries), "pnew": t.pnew, "n_unseen": _count_out(t.n_unseen)}
        for t in net.tables.values()
    ]
    cpds = [
        {"child": c.child, "parents": list(c.parents), "tree": tree_to_json(c.factor.root, order)}
        for c in net.cpds
    ]
    return {"alphabet": net.alphabet, "variables": variables, "tables": tables, "cpds": cpds}


def serialize_network(net: Network) -> str:
    return dumps(network_to_dict(net)) + "\n"


# ------------------------------------------------------------- posteriors


def literal_to_json(lit: Literal) -> dict:
    return {"atom": atom_to_json(lit.atom), "polarity": lit.polarity}


def posterior_to_dict(p: Posterior) -> dict:
    out: dict = {"variable": p.variable, "explicit": dict(p.explicit), "complement": None}
    c = p.complement
    if c is not None:
        out["complement"] = {
            "constraints": [literal_to_json(l) for l in c.constraints.literals],
            "listed": sorted(c.listed),
            "count": _count_out(c.count),
            "per_value": c.per_value,
            "total_mass": c.total_mass,
        }
    return out


def posterior_from_dict(raw: dict) -> Posterior:
    """Inverse of :func:`posterior_to_dict`.  Atom arguments that name
    variables are read back as :class:`Var` only when written as ``{"var": ...}``."""
    def atom(a: dict) -> Atom:
        kind = AtomKind(a["kind"])
        arg = a["arg"]
        if kind is AtomKind.IN_SET:
            arg = frozenset(arg)
        elif isinstance(arg, dict):
            arg = Var(arg["var"])
        return Atom(kind, a["subject"], arg)

    complement = None
    c = raw.get("complement")
    if c is not None:
        lits = tuple(Literal(atom(l["atom"]), l["polarity"]) for l in c["constraints"])
        complement = Complement(
            ConstraintSet(raw["variable"], lits),
            frozenset(c["listed"]),
            _count_in(c["count"], "complement.count"),
            float(c["per_value"]),
            float(c["total_mass"]),
        )
    explicit = {k: float(v) for k, v in raw["explicit"].items()}
    return Posterior(raw["variable"], explicit, complement)


def posterior_to_json(p: Posterior) -> str:
    return dumps(posterior_to_dict(p))


def posterior_from_json(text: str) -> Posterior:
    return posterior_from_dict(json.loads(text))
