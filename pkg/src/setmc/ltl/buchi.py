from __future__ import annotations

import dataclasses as d
import typing as t


@d.dataclass(frozen=True, order=True)
class Label:
    """Conjunction of proposition literals; ``pos``/``neg`` hold proposition ids."""

    pos: frozenset[int] = frozenset()
    neg: frozenset[int] = frozenset()

    def holds(self, valuation: t.AbstractSet[int]) -> bool:
        return self.pos <= valuation and not (self.neg & valuation)

    @property
    def satisfiable(self) -> bool:
        return not (self.pos & self.neg)

    def __str__(self) -> str:
        lits = [f"p{i}" for i in sorted(self.pos)] + [f"!p{i}" for i in sorted(self.neg)]
        return " && ".join(lits) if lits else "true"


@d.dataclass(frozen=True)
class BuchiTransition:
    source: int
    label: Label
    target: int


@d.dataclass(frozen=True)
class BuchiAutomaton:
    n_states: int
    initial: int
    transitions: tuple[BuchiTransition, ...]
    accepting: frozenset[int]

    def __post_init__(self) -> None:
        out: list[list[tuple[int, BuchiTransition]]] = [[] for _ in range(self.n_states)]
        for i, tr in enumerate(self.transitions):
            out[tr.source].append((i, tr))
        object.__setattr__(self, "_out", tuple(tuple(o) for o in out))

    def outgoing(self, state: int) -> tuple[tuple[int, BuchiTransition], ...]:
        """``(transition index, transition)`` pairs leaving ``state`` in order."""
        return self._out[state]  # type: ignore[attr-defined]

    @property
    def used_aps(self) -> frozenset[int]:
        out: set[int] = set()
        for tr in self.transitions:
            out |= tr.label.pos | tr.label.neg
        return frozenset(out)


@d.dataclass(frozen=True)
class LassoWord:
    """Ultimately periodic word ``stem . cycle^omega``; letters are sets of true
    proposition ids."""

    stem: tuple[frozenset[int], ...]
    cycle: tuple[frozenset[int], ...]

    def __post_init__(self) -> None:
        if not self.cycle:
            raise ValueError("lasso cycle must be nonempty")

    @property
    def letters(self) -> tuple[frozenset[int], ...]:
        return self.stem + self.cycle

    def succ(self, i: int) -> int:
        n = len(self.stem) + len(self.cycle)
        return i + 1 if i + 1 < n else len(self.stem)


def ba_accepts_lasso(a: BuchiAutomaton, w: LassoWord) -> bool:
    """Does some run of ``a`` on ``w`` visit an accepting state infinitely often?

    Decided on the product of ``a`` with the lasso's position graph: an
    accepting product node must be reachable from ``(initial, 0)`` and lie on
    a cycle.
    """
    letters = w.letters

    def successors(node: tuple[int, int]) -> t.Iterator[tuple[int, int]]:
        q, i = node
        j = w.succ(i)
        for _, tr in a.outgoing(q):
            if tr.label.holds(letters[i]):
                yield (tr.target, j)

    start = (a.initial, 0)
    reach = {start}
    stack = [start]
    while stack:
        for nxt in successors(stack.pop()):
            if nxt not in reach:
                reach.add(nxt)
                stack.append(nxt)
    for node in sorted(reach):
        if node[0] not in a.accepting:
            continue
        seen: set[tuple[int, int]] = set()
        stack = list(successors(node))
        while stack:
            cur = stack.pop()
            if cur == node:
                return True
            if cur not in seen:
                seen.add(cur)
                stack.extend(successors(cur))
    return False
