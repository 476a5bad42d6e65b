"""Intensional predicates over large variables and a solver for their conjunctions.

A conjunction of grounded literals on one large variable describes either a
finite set of values (when some positive literal generates finitely many
candidates) or the complement of a finite set.  :func:`solve` computes which,
without ever enumerating the unbounded domain.
"""

from __future__ import annotations

import enum
from dataclasses import dataclass
from typing import Iterable, Mapping, Union

from ldve.domain import UNBOUNDED, Env, LargeCountable, normalize_value
from ldve.errors import TreeError


class AtomKind(enum.Enum):
    EQUAL = "equal"
    SINGLE_EDIT = "singlet"
    IN_TABLE = "intable"
    IN_SET = "inset"


SYMMETRIC = (AtomKind.EQUAL, AtomKind.SINGLE_EDIT)


@dataclass(frozen=True)
class Var:
    """Reference to a network variable inside an atom or label."""

    name: str

    def __str__(self):
        return self.name


Term = Union[Var, str]


@dataclass(frozen=True)
class Atom:
    kind: AtomKind
    subject: str
    arg: Union[Var, str, frozenset]

    def __post_init__(self):
        if self.kind is AtomKind.IN_SET:
            if not isinstance(self.arg, frozenset) or not self.arg:
                raise TreeError("IN_SET needs a nonempty frozenset argument")
            object.__setattr__(self, "arg", frozenset(normalize_value(v) for v in self.arg))
        elif self.kind in SYMMETRIC and isinstance(self.arg, str):
            object.__setattr__(self, "arg", normalize_value(self.arg))

    @property
    def variables(self) -> frozenset[str]:
        if isinstance(self.arg, Var):
            return frozenset((self.subject, self.arg.name))
        return frozenset((self.subject,))

    def mentions(self, var: str) -> bool:
        return var in self.variables

    @property
    def grounded(self) -> bool:
        return not isinstance(self.arg, Var)

    def __str__(self):
        if self.kind is AtomKind.IN_SET:
            arg = "{" + ", ".join(sorted(self.arg)) + "}"
        else:
            arg = str(self.arg)
        return f"{self.kind.value}({self.subject}, {arg})"


@dataclass(frozen=True)
class Literal:
    atom: Atom
    polarity: bool = True

    def __str__(self):
        return str(self.atom) if self.polarity else f"not {self.atom}"


@dataclass(frozen=True)
class ConstraintSet:
    subject: str
    literals: tuple[Literal, ...] = ()

    def __post_init__(self):
        for lit in self.literals:
            if lit.atom.subject != self.subject:
                raise TreeError(f"literal {lit} is not about {self.subject}")

    @classmethod
    def of(cls, subject: str, literals: Iterable[Literal]) -> "ConstraintSet":
        seen: dict[Literal, None] = {}
        for lit in literals:
            seen.setdefault(lit)
        return cls(subject, tuple(seen))

    def __str__(self):
        return " and ".join(map(str, self.literals)) or "true"


@dataclass(frozen=True)
class Explicit:
    values: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "values", tuple(sorted(set(self.values))))


@dataclass(frozen=True)
class ComplementOfFinite:
    """Every domain value except the excluded ones (and, through
    ``negated_tables``, except the entries of those tables).

    ``base`` is the table whose listed/unseen split is used for counting, or
    ``None`` for the whole domain.  ``domain_size`` is the size of a finite
    (fixed-length) domain, ``None`` when it is unbounded.
    """

    excluded_in_table: frozenset[str]
    excluded_unseen: frozenset[str]
    base: str | None = None
    negated_tables: frozenset[str] = frozenset()
    universe: frozenset[str] | None = None
    domain_size: int | None = None

    @property
    def excluded(self) -> frozenset[str]:
        return self.excluded_in_table | self.excluded_unseen


SolutionSet = Union[Explicit, ComplementOfFinite]

WHOLE_DOMAIN = None


def single_edit_neighbors(word: str, alphabet: str) -> set[str]:
    """All strings that differ from ``word`` by substituting exactly one letter."""
    if not word:
        raise ValueError("single_edit_neighbors needs a nonempty word")
    return {
        word[:i] + c + word[i + 1:]
        for i, old in enumerate(word)
        for c in alphabet
        if c != old
    }


def is_single_edit(a: str, b: str) -> bool:
    if len(a) != len(b) or not a:
        return False
    return sum(x != y for x, y in zip(a, b)) == 1


def _decide(kind: AtomKind, value: str, arg, tables: Mapping) -> bool:
    value = normalize_value(value)
    if kind is AtomKind.EQUAL:
        return value == normalize_value(arg)
    if kind is AtomKind.SINGLE_EDIT:
        return is_single_edit(value, normalize_value(arg))
    if kind is AtomKind.IN_TABLE:
        try:
            return value in tables[arg].entries
        except KeyError:
            raise TreeError(f"unknown table {arg}") from None
    return value in arg


def eval_atom(atom: Atom, assignment: Mapping[str, str], tables: Mapping = {}) -> bool:
    try:
        value = assignment[atom.subject]
        arg = assignment[atom.arg.name] if isinstance(atom.arg, Var) else atom.arg
    except KeyError as exc:
        raise TreeError(f"{atom}: variable {exc.args[0]} is unassigned") from None
    return _decide(atom.kind, value, arg, tables)


def ground(atom: Atom, var: str, value: str, tables: Mapping = {}) -> Atom | bool:
    """Substitute an observed value; decidable atoms come back as a bool."""
    if not atom.mentions(var):
        return atom
    value = normalize_value(value)
    if atom.subject == var and atom.arg == Var(var):
        return atom.kind is AtomKind.EQUAL
    if atom.subject == var:
        if isinstance(atom.arg, Var):
            # symmetric predicates: keep the unobserved variable as subject
            return Atom(atom.kind, atom.arg.name, value)
        return _decide(atom.kind, value, atom.arg, tables)
    return Atom(atom.kind, atom.subject, value)


def _generator_size(atom: Atom, env: Env) -> int:
    if atom.kind is AtomKind.EQUAL:
        return 1
    if atom.kind is AtomKind.IN_SET:
        return len(atom.arg)
    if atom.kind is AtomKind.IN_TABLE:
        return len(env.table(atom.arg).entries)
    alphabet = env.domain(atom.subject).alphabet
    return (len(alphabet) - 1) * len(atom.arg)


def _generate(atom: Atom, env: Env) -> set[str]:
    if atom.kind is AtomKind.EQUAL:
        return {atom.arg}
    if atom.kind is AtomKind.IN_SET:
        return set(atom.arg)
    if atom.kind is AtomKind.IN_TABLE:
        return set(env.table(atom.arg).entries)
    return single_edit_neighbors(atom.arg, env.domain(atom.subject).alphabet)


def solve(constraints: ConstraintSet, env: Env) -> SolutionSet:
    """Values of ``constraints.subject`` satisfying every literal."""
    y = constraints.subject
    domain = env.domain(y)
    if not isinstance(domain, LargeCountable):
        raise TreeError(f"solve needs a large variable, {y} is small")
    for lit in constraints.literals:
        if not lit.atom.grounded:
            raise TreeError(f"literal {lit} is not grounded")
    literals = constraints.literals
    tables = env.tables

    positives = [lit for lit in literals if lit.polarity]
    if positives:
        generator = min(positives, key=lambda lit: _generator_size(lit.atom, env))
        rest = [lit for lit in literals if lit is not generator]
        values = [
            v for v in _generate(generator.atom, env)
            if v in domain
            and all(_decide(l.atom.kind, v, l.atom.arg, tables) == l.polarity for l in rest)
        ]
        return Explicit(tuple(values))

    excluded: set[str] = set()
    negated_tables: set[str] = set()
    for lit in literals:
        if lit.atom.kind is AtomKind.IN_TABLE:
            negated_tables.add(lit.atom.arg)
        else:
            excluded |= _generate(lit.atom, env)
    for t in negated_tables:
        excluded |= set(env.table(t).entries)
    excluded = {v for v in excluded if v in domain}
    base = min(negated_tables) if negated_tables else WHOLE_DOMAIN
    listed = set(env.table(base).entries) if base is not None else set()
    return ComplementOfFinite(
        excluded_in_table=frozenset(excluded & listed),
        excluded_unseen=frozenset(excluded - listed),
        base=base,
        negated_tables=frozenset(negated_tables),
        universe=domain.universe,
        domain_size=domain.size,
    )


def solution_count(s: SolutionSet, tables: Mapping) -> float | int:
    if isinstance(s, Explicit):
        return len(s.values)
    if s.universe is not None:
        return len(s.universe) - len(s.excluded)
    if s.base is WHOLE_DOMAIN:
        return UNBOUNDED if s.domain_size is None else s.domain_size - len(s.excluded)
    table = tables[s.base]
    listed = len(table.entries) - len(s.excluded_in_table)
    if table.n_unseen == UNBOUNDED:
        return UNBOUNDED
    return listed + table.n_unseen - len(s.excluded_unseen)


def contains(s: SolutionSet, value: str, tables: Mapping) -> bool:
    """Membership test (used by tests and the closed-universe paths)."""
    value = normalize_value(value)
    if isinstance(s, Explicit):
        return value in s.values
    if s.universe is not None and value not in s.universe:
        return False
    return value not in s.excluded
