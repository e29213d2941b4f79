"""LTL to Büchi translation by tableau expansion.

The formula is put in negation normal form (with Release as the dual of
Until).  An automaton state is the set of obligations that must hold from the
current position on; expanding it yields covers, each a conjunction of
literals for the current letter plus the obligations for the next position.
Every Until contributes one generalized acceptance set (a cover is good for
``a U b`` unless it postpones ``b``), and the sets are folded into a single
state-based acceptance condition with a level counter.
"""

from __future__ import annotations

import typing as t
from collections import deque

from .buchi import BuchiAutomaton, BuchiTransition, Label
from .formula import AP, And, LtlFormula, Next, Not, TrueF, Until

# NNF nodes are plain tuples, so they hash and sort structurally:
#   ("T",) ("F",) ("lit", id, positive) ("and", a, b) ("or", a, b)
#   ("X", a) ("U", a, b) ("R", a, b)
Nnf = tuple

_T: Nnf = ("T",)
_F: Nnf = ("F",)


def to_nnf(f: LtlFormula, positive: bool = True) -> Nnf:
    if isinstance(f, TrueF):
        return _T if positive else _F
    if isinstance(f, AP):
        return ("lit", f.ap_id, positive)
    if isinstance(f, Not):
        return to_nnf(f.operand, not positive)
    if isinstance(f, And):
        tag = "and" if positive else "or"
        return (tag, to_nnf(f.left, positive), to_nnf(f.right, positive))
    if isinstance(f, Next):
        return ("X", to_nnf(f.operand, positive))
    if isinstance(f, Until):
        tag = "U" if positive else "R"
        return (tag, to_nnf(f.left, positive), to_nnf(f.right, positive))
    raise TypeError(f"not a desugared formula: {f!r}")


def _untils(g: Nnf, out: set[Nnf]) -> None:
    if g[0] == "U":
        out.add(g)
    for child in g[1:]:
        if isinstance(child, tuple):
            _untils(child, out)


class _Cover(t.NamedTuple):
    label: Label
    nxt: frozenset
    old: frozenset


def _expand(obligations: frozenset) -> list[_Cover]:
    covers: list[_Cover] = []

    def go(todo: tuple, old: frozenset, pos: frozenset, neg: frozenset, nxt: frozenset) -> None:
        if not todo:
            covers.append(_Cover(Label(pos, neg), nxt, old))
            return
        g, rest = todo[0], todo[1:]
        if g in old:
            go(rest, old, pos, neg, nxt)
            return
        old = old | {g}
        tag = g[0]
        if tag == "T":
            go(rest, old, pos, neg, nxt)
        elif tag == "F":
            return
        elif tag == "lit":
            _, ap, positive = g
            if (ap in neg) if positive else (ap in pos):
                return
            if positive:
                go(rest, old, pos | {ap}, neg, nxt)
            else:
                go(rest, old, pos, neg | {ap}, nxt)
        elif tag == "and":
            go((g[1], g[2]) + rest, old, pos, neg, nxt)
        elif tag == "or":
            go((g[1],) + rest, old, pos, neg, nxt)
            go((g[2],) + rest, old, pos, neg, nxt)
        elif tag == "X":
            go(rest, old, pos, neg, nxt | {g[1]})
        elif tag == "U":
            # a U b  ==  b  or  (a and X(a U b))
            go((g[2],) + rest, old, pos, neg, nxt)
            go((g[1],) + rest, old, pos, neg, nxt | {g})
        elif tag == "R":
            # a R b  ==  (a and b)  or  (b and X(a R b))
            go((g[1], g[2]) + rest, old, pos, neg, nxt)
            go((g[2],) + rest, old, pos, neg, nxt | {g})
        else:
            raise ValueError(f"bad NNF node {g!r}")

    go(tuple(sorted(obligations)), frozenset(), frozenset(), frozenset(), frozenset())
    return covers


def ltl_to_buchi(f: LtlFormula) -> BuchiAutomaton:
    """Büchi automaton accepting exactly the words that satisfy ``f``.

    States are numbered in breadth-first discovery order, so the result is a
    deterministic function of ``f``.
    """
    root = to_nnf(f)
    acc_sets: set[Nnf] = set()
    _untils(root, acc_sets)
    untils = sorted(acc_sets)
    k = len(untils)

    start = (frozenset({root}), 0)
    index: dict[tuple[frozenset, int], int] = {start: 0}
    queue = deque([start])
    transitions: list[BuchiTransition] = []
    seen_edges: set[tuple[int, Label, int]] = set()
    expand_cache: dict[frozenset, list[_Cover]] = {}
    while queue:
        node = queue.popleft()
        obligations, level = node
        src = index[node]
        covers = expand_cache.get(obligations)
        if covers is None:
            covers = expand_cache[obligations] = _expand(obligations)
        base = 0 if level == k else level
        for cover in covers:
            nl = base
            while nl < k and (untils[nl] not in cover.old or untils[nl][2] in cover.old):
                nl += 1
            dst_node = (cover.nxt, nl)
            if dst_node not in index:
                index[dst_node] = len(index)
                queue.append(dst_node)
            edge = (src, cover.label, index[dst_node])
            if edge not in seen_edges:
                seen_edges.add(edge)
                transitions.append(BuchiTransition(*edge))
    accepting = frozenset(i for (_, level), i in index.items() if level == k)
    return BuchiAutomaton(len(index), 0, tuple(transitions), accepting)
