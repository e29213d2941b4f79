"""Concrete LTL syntax.

Precedence, tightest first: unary (``!``, ``X``, ``F``, ``G``), ``U`` (right
associative), ``&&``, ``||``, ``->`` (right associative).
"""

from __future__ import annotations

import dataclasses as d
import re
import typing as t

from .formula import (
    AP,
    FALSE,
    TRUE,
    And,
    LtlFormula,
    Next,
    Until,
    mk_always,
    mk_eventually,
    mk_implies,
    mk_not,
    mk_or,
)


class LtlSyntaxError(ValueError):
    def __init__(self, message: str, column: int) -> None:
        self.column = column
        super().__init__(f"column {column}: {message}")


@d.dataclass(frozen=True)
class AtomicProposition:
    ap_id: int
    name: str
    expr: t.Any


def bind_aps(bindings: t.Mapping[str, t.Any]) -> tuple[AtomicProposition, ...]:
    """Number propositions in the mapping's iteration order."""
    return tuple(AtomicProposition(i, name, e) for i, (name, e) in enumerate(bindings.items()))


_TOKEN = re.compile(r"\s*(?:(->|&&|\|\||[()!])|([A-Za-z_][A-Za-z_0-9]*))")
_UNARY = {"!", "X", "F", "G"}


def _tokenize(text: str) -> list[tuple[str, int]]:
    out = []
    pos = 0
    text = text.rstrip()
    while pos < len(text):
        m = _TOKEN.match(text, pos)
        if m is None:
            raise LtlSyntaxError(f"unexpected character {text[pos:].lstrip()[:1]!r}", pos + 1)
        tok = m.group(1) or m.group(2)
        out.append((tok, m.start(1) if m.group(1) else m.start(2)))
        pos = m.end()
    return out


def parse_ltl(text: str, ap_bindings: t.Mapping[str, t.Any]) -> LtlFormula:
    """Parse ``text``; every proposition name must be a key of ``ap_bindings``.

    Proposition ids follow the mapping's order (see :func:`bind_aps`).
    """
    ids = {name: i for i, name in enumerate(ap_bindings)}
    toks = _tokenize(text)
    pos = 0

    def peek() -> t.Optional[str]:
        return toks[pos][0] if pos < len(toks) else None

    def col() -> int:
        return toks[pos][1] + 1 if pos < len(toks) else len(text) + 1

    def take() -> str:
        nonlocal pos
        tok = toks[pos][0]
        pos += 1
        return tok

    def expect(tok: str) -> None:
        if peek() != tok:
            raise LtlSyntaxError(f"expected {tok!r}", col())
        take()

    def implication() -> LtlFormula:
        left = disjunction()
        if peek() == "->":
            take()
            return mk_implies(left, implication())
        return left

    def disjunction() -> LtlFormula:
        left = conjunction()
        while peek() == "||":
            take()
            left = mk_or(left, conjunction())
        return left

    def conjunction() -> LtlFormula:
        left = until()
        while peek() == "&&":
            take()
            left = And(left, until())
        return left

    def until() -> LtlFormula:
        left = unary()
        if peek() == "U":
            take()
            return Until(left, until())
        return left

    def unary() -> LtlFormula:
        tok = peek()
        if tok in _UNARY:
            take()
            operand = unary()
            if tok == "!":
                return mk_not(operand)
            if tok == "X":
                return Next(operand)
            if tok == "F":
                return mk_eventually(operand)
            return mk_always(operand)
        return atom()

    def atom() -> LtlFormula:
        tok = peek()
        if tok is None:
            raise LtlSyntaxError("expected operand", col())
        if tok == "(":
            take()
            f = implication()
            expect(")")
            return f
        if tok == "true":
            take()
            return TRUE
        if tok == "false":
            take()
            return FALSE
        if tok in ("U", ")", "&&", "||", "->"):
            raise LtlSyntaxError("expected operand", col())
        if tok not in ids:
            raise LtlSyntaxError(f"unbound proposition {tok!r}", col())
        take()
        return AP(ids[tok], tok)

    f = implication()
    if pos != len(toks):
        raise LtlSyntaxError(f"unexpected {peek()!r}", col())
    return f
