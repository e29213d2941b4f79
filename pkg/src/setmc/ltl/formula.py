"""LTL formulae in desugared form: constants, propositions, ``!``, ``&&``, ``X``, ``U``.

Derived operators are expanded by the constructor helpers below; ``!!f`` is
collapsed to ``f`` on construction.
"""

from __future__ import annotations

import dataclasses as d
import typing as t


@d.dataclass(frozen=True)
class TrueF:
    def __str__(self) -> str:
        return "true"


@d.dataclass(frozen=True)
class AP:
    ap_id: int
    name: str = d.field(default="", compare=False)

    def __str__(self) -> str:
        return self.name or f"p{self.ap_id}"


@d.dataclass(frozen=True)
class Not:
    operand: "LtlFormula"

    def __str__(self) -> str:
        if isinstance(self.operand, TrueF):
            return "false"
        return f"!{_wrap(self.operand)}"


@d.dataclass(frozen=True)
class And:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self) -> str:
        return f"({self.left} && {self.right})"


@d.dataclass(frozen=True)
class Next:
    operand: "LtlFormula"

    def __str__(self) -> str:
        return f"X {_wrap(self.operand)}"


@d.dataclass(frozen=True)
class Until:
    left: "LtlFormula"
    right: "LtlFormula"

    def __str__(self) -> str:
        return f"({self.left} U {self.right})"


LtlFormula = t.Union[TrueF, AP, Not, And, Next, Until]

TRUE = TrueF()
FALSE = Not(TRUE)


def _wrap(f: LtlFormula) -> str:
    s = str(f)
    return s if isinstance(f, (TrueF, AP, And, Until)) or s == "false" else f"({s})"


def mk_not(f: LtlFormula) -> LtlFormula:
    return f.operand if isinstance(f, Not) else Not(f)


def mk_or(a: LtlFormula, b: LtlFormula) -> LtlFormula:
    return mk_not(And(mk_not(a), mk_not(b)))


def mk_implies(a: LtlFormula, b: LtlFormula) -> LtlFormula:
    return mk_not(And(a, mk_not(b)))


def mk_eventually(f: LtlFormula) -> LtlFormula:
    return Until(TRUE, f)


def mk_always(f: LtlFormula) -> LtlFormula:
    return mk_not(Until(TRUE, mk_not(f)))


def negate(f: LtlFormula) -> LtlFormula:
    """The formula whose automaton the checker explores: ``!f``."""
    return mk_not(f)


def subformulas(f: LtlFormula) -> t.Iterator[LtlFormula]:
    yield f
    if isinstance(f, (Not, Next)):
        yield from subformulas(f.operand)
    elif isinstance(f, (And, Until)):
        yield from subformulas(f.left)
        yield from subformulas(f.right)


def ap_ids(f: LtlFormula) -> frozenset[int]:
    return frozenset(g.ap_id for g in subformulas(f) if isinstance(g, AP))


def is_desugared(f: LtlFormula) -> bool:
    return all(isinstance(g, (TrueF, AP, Not, And, Next, Until)) for g in subformulas(f))
