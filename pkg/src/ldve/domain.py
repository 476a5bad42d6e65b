"""Variables, domains and finite name tables with residual mass for unseen values."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

from ldve.errors import DomainError

#: Count sentinel for "infinitely many" (unseen names, unconstrained large domains).
UNBOUNDED = math.inf

#: Returned by :func:`table_lookup` when a value is not listed in the table.
ABSENT = None

DEFAULT_COVERAGE = 0.9


def normalize_value(value: str) -> str:
    """Large-domain values are compared uppercased."""
    return value.upper()


@dataclass(frozen=True)
class SmallExtensional:
    values: tuple[str, ...]

    def __post_init__(self):
        if len(self.values) == 0:
            raise DomainError("small domain needs at least one value")
        if len(set(self.values)) != len(self.values):
            raise DomainError(f"duplicate values in small domain {self.values}")

    @property
    def is_large(self) -> bool:
        return False

    def __contains__(self, value) -> bool:
        return value in self.values


@dataclass(frozen=True)
class LargeCountable:
    """All finite strings over ``alphabet``.

    ``length`` restricts the domain to strings of exactly that length (phone
    numbers), which makes it finite.  ``universe`` closes the domain to a
    finite set of strings; only the brute-force oracle and its comparisons
    use it.
    """

    alphabet: str
    universe: frozenset[str] | None = None
    length: int | None = None

    def __post_init__(self):
        if len(set(self.alphabet)) < 2 or len(set(self.alphabet)) != len(self.alphabet):
            raise DomainError(f"alphabet needs >= 2 distinct characters, got {self.alphabet!r}")
        if self.length is not None and self.length < 1:
            raise DomainError(f"string length must be positive, got {self.length}")

    @property
    def size(self) -> int | None:
        """Number of values, or ``None`` when the domain is unbounded."""
        if self.universe is not None:
            return len(self.universe)
        if self.length is not None:
            return len(self.alphabet) ** self.length
        return None

    @property
    def is_large(self) -> bool:
        return True

    def __contains__(self, value) -> bool:
        if not isinstance(value, str) or not value:
            return False
        value = normalize_value(value)
        if self.universe is not None:
            return value in self.universe
        if self.length is not None and len(value) != self.length:
            return False
        return set(value) <= set(self.alphabet)


Domain = SmallExtensional | LargeCountable


@dataclass(frozen=True)
class VariableDecl:
    name: str
    domain: Domain

    @property
    def is_large(self) -> bool:
        return self.domain.is_large


@dataclass
class NameTable:
    """Census-style probability table plus a closed model of the unseen names.

    Every unlisted value has probability ``pnew``; there are ``n_unseen`` of
    them (possibly :data:`UNBOUNDED`).
    """

    id: str
    entries: dict[str, float]
    pnew: float
    n_unseen: float | int

    def __post_init__(self):
        self.entries = {normalize_value(k): float(v) for k, v in self.entries.items()}
        for name, p in self.entries.items():
            if not 0.0 < p <= 1.0:
                raise DomainError(f"table {self.id}: probability of {name} is {p}, not in (0,1]")
        if not 0.0 < self.pnew < 1.0:
            raise DomainError(f"table {self.id}: pnew={self.pnew} not in (0,1)")
        if self.n_unseen != UNBOUNDED and (self.n_unseen < 0 or int(self.n_unseen) != self.n_unseen):
            raise DomainError(f"table {self.id}: n_unseen must be a nonnegative integer")
        total = self.entry_mass
        if total > 1.0 + 1e-9:
            raise DomainError(f"table {self.id}: entries sum to {total} > 1")
        if self.n_unseen != UNBOUNDED:
            self.n_unseen = int(self.n_unseen)
            if abs(total + self.pnew * self.n_unseen - 1.0) > 1e-9:
                raise DomainError(
                    f"table {self.id}: entries ({total}) + pnew*n_unseen "
                    f"({self.pnew * self.n_unseen}) != 1"
                )

    @property
    def entry_mass(self) -> float:
        return math.fsum(self.entries.values())

    def pdf(self, value: str) -> float:
        """Per-value probability: the entry if listed, else ``pnew``."""
        p = self.entries.get(normalize_value(value))
        return self.pnew if p is None else p

    def __contains__(self, value: str) -> bool:
        return normalize_value(value) in self.entries


def load_name_table(
    text: str,
    pnew: float,
    coverage: float = DEFAULT_COVERAGE,
    table_id: str = "table",
) -> NameTable:
    """Parse ``NAME WEIGHT [extra columns...]`` lines into a :class:`NameTable`.

    Weights are normalized and scaled so the listed names carry ``coverage``
    of the mass; the remainder is spread over ``round((1-coverage)/pnew)``
    unseen names.  ``pnew`` is then nudged to ``(1-coverage)/n_unseen`` so the
    table sums to one exactly.
    """
    if not 0.0 < coverage <= 1.0:
        raise DomainError(f"coverage {coverage} not in (0,1]")
    if not 0.0 < pnew < 1.0:
        raise DomainError(f"pnew={pnew} not in (0,1)")
    weights: dict[str, float] = {}
    for lineno, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        parts = line.split()
        if len(parts) < 2:
            raise DomainError(f"line {lineno}: expected NAME WEIGHT, got {raw!r}")
        name = normalize_value(parts[0])
        try:
            weight = float(parts[1])
        except ValueError:
            raise DomainError(f"line {lineno}: weight {parts[1]!r} is not a number") from None
        if not weight > 0 or not math.isfinite(weight):
            raise DomainError(f"line {lineno}: weight for {name} must be positive")
        if name in weights:
            raise DomainError(f"line {lineno}: duplicate name {name}")
        weights[name] = weight

    residual = 1.0 - coverage
    if residual > 0 and pnew >= residual:
        raise DomainError(f"pnew={pnew} must be below the residual mass {residual}")
    total = math.fsum(weights.values())
    entries = {name: w / total * coverage for name, w in weights.items()}
    if residual > 0:
        n_unseen = round(residual / pnew)
        pnew = residual / n_unseen
    else:
        n_unseen = 0
    return NameTable(id=table_id, entries=entries, pnew=pnew, n_unseen=n_unseen)


def table_lookup(table: NameTable, value: str) -> float | None:
    return table.entries.get(normalize_value(value), ABSENT)


def table_residual_mass(table: NameTable, excluded_unseen_count: int = 0) -> float:
    """Mass of the unseen names left after excluding ``excluded_unseen_count`` of them."""
    if table.n_unseen == UNBOUNDED:
        return UNBOUNDED
    if excluded_unseen_count > table.n_unseen:
        raise DomainError(
            f"table {table.id}: cannot exclude {excluded_unseen_count} of "
            f"{table.n_unseen} unseen values"
        )
    return table.pnew * (table.n_unseen - excluded_unseen_count)


@dataclass(frozen=True)
class Env:
    """What evaluation needs besides an assignment: domains and tables."""

    domains: Mapping[str, Domain] = field(default_factory=dict)
    tables: Mapping[str, NameTable] = field(default_factory=dict)

    def domain(self, var: str) -> Domain:
        try:
            return self.domains[var]
        except KeyError:
            raise DomainError(f"unknown variable {var}") from None

    def table(self, table_id: str) -> NameTable:
        try:
            return self.tables[table_id]
        except KeyError:
            raise DomainError(f"unknown table {table_id}") from None

    def is_large(self, var: str) -> bool:
        return self.domain(var).is_large
