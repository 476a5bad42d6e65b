"""Symbolic leaf labels of tree factors."""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Union

from ldve.domain import Env, normalize_value
from ldve.errors import TreeError
from ldve.predicates import Term, Var


@dataclass(frozen=True)
class Const:
    value: float

    def __str__(self):
        return format(self.value, ".10g")


@dataclass(frozen=True)
class PrSing:
    """Probability of one particular single-letter substitution of ``term``."""

    term: Term
    alphabet: str

    def __str__(self):
        return f"prsing({self.term})"


@dataclass(frozen=True)
class TablePdf:
    """Table probability of ``term``: the listed entry, else the table's pnew."""

    term: Term
    table: str

    def __str__(self):
        return f"lookup({self.term}, {self.table})"


@dataclass(frozen=True)
class PNewConst:
    table: str

    def __str__(self):
        return f"Pnew({self.table})"


@dataclass(frozen=True)
class Product:
    factors: tuple

    def __str__(self):
        return " * ".join(_paren(f) for f in self.factors)


@dataclass(frozen=True)
class Sum:
    terms: tuple

    def __str__(self):
        return " + ".join(map(str, self.terms))


LabelExpr = Union[Const, PrSing, TablePdf, PNewConst, Product, Sum]

ZERO = Const(0.0)
ONE = Const(1.0)


def _paren(label) -> str:
    return f"({label})" if isinstance(label, Sum) else str(label)


def is_zero(label) -> bool:
    return isinstance(label, Const) and label.value == 0.0


def product(*labels) -> LabelExpr:
    """Flattened product with constants merged; any zero factor gives zero."""
    coef = 1.0
    rest = []
    for label in labels:
        parts = label.factors if isinstance(label, Product) else (label,)
        for part in parts:
            if isinstance(part, Const):
                coef *= part.value
            else:
                rest.append(part)
    if coef == 0.0:
        return ZERO
    if not rest:
        return Const(coef)
    if coef != 1.0:
        rest.insert(0, Const(coef))
    if len(rest) == 1:
        return rest[0]
    return Product(tuple(rest))


def add(*labels) -> LabelExpr:
    """Flattened sum; constant terms are folded, zero terms dropped."""
    coef = 0.0
    rest = []
    for label in labels:
        parts = label.terms if isinstance(label, Sum) else (label,)
        for part in parts:
            if isinstance(part, Const):
                coef += part.value
            else:
                rest.append(part)
    if not rest:
        return Const(coef)
    if coef != 0.0:
        rest.append(Const(coef))
    if len(rest) == 1:
        return rest[0]
    return Sum(tuple(rest))


def label_vars(label) -> frozenset[str]:
    if isinstance(label, (PrSing, TablePdf)):
        return frozenset((label.term.name,)) if isinstance(label.term, Var) else frozenset()
    if isinstance(label, Product):
        return frozenset().union(*(label_vars(f) for f in label.factors))
    if isinstance(label, Sum):
        return frozenset().union(*(label_vars(t) for t in label.terms))
    return frozenset()


def prsing_value(word: str, alphabet: str) -> float:
    if not word:
        raise TreeError("prsing of an empty word")
    return 1.0 / ((len(alphabet) - 1) * len(word))


def ground_label(label, var: str, value: str, env: Env):
    """Replace ``var`` by an observed value; table lookups fold to numbers."""
    if isinstance(label, PrSing) and label.term == Var(var):
        return PrSing(normalize_value(value), label.alphabet)
    if isinstance(label, TablePdf) and label.term == Var(var):
        p = env.table(label.table).entries.get(normalize_value(value))
        return PNewConst(label.table) if p is None else Const(p)
    if isinstance(label, Product):
        return product(*(ground_label(f, var, value, env) for f in label.factors))
    if isinstance(label, Sum):
        return add(*(ground_label(t, var, value, env) for t in label.terms))
    return label


def _term_value(term: Term, assignment: Mapping[str, str]) -> str:
    if isinstance(term, Var):
        try:
            return assignment[term.name]
        except KeyError:
            raise TreeError(f"variable {term.name} is unassigned") from None
    return term


def evaluate_label(label, assignment: Mapping[str, str], env: Env) -> float:
    if isinstance(label, Const):
        return label.value
    if isinstance(label, PrSing):
        return prsing_value(_term_value(label.term, assignment), label.alphabet)
    if isinstance(label, TablePdf):
        return env.table(label.table).pdf(_term_value(label.term, assignment))
    if isinstance(label, PNewConst):
        return env.table(label.table).pnew
    if isinstance(label, Product):
        return math.prod(evaluate_label(f, assignment, env) for f in label.factors)
    if isinstance(label, Sum):
        return math.fsum(evaluate_label(t, assignment, env) for t in label.terms)
    raise TreeError(f"not a label: {label!r}")


def monomials(label, env: Env) -> list[tuple[float, tuple]]:
    """Sum-of-products form: ``[(coefficient, symbolic factors), ...]``.

    Everything that does not depend on an unobserved variable is folded into
    the coefficient; the remaining factors are ``PrSing``/``TablePdf`` of a
    :class:`Var`.
    """
    if isinstance(label, Sum):
        return [m for t in label.terms for m in monomials(t, env)]
    if isinstance(label, Product):
        result = [(1.0, ())]
        for f in label.factors:
            result = [
                (c1 * c2, s1 + s2)
                for c1, s1 in result
                for c2, s2 in monomials(f, env)
            ]
        return result
    if isinstance(label, (PrSing, TablePdf)) and isinstance(label.term, Var):
        return [(1.0, (label,))]
    return [(evaluate_label(label, {}, env), ())]
