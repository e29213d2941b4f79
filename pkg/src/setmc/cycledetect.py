"""Accepting-cycle detection over a :class:`~setmc.explore.TransitionSystemView`.

States are deduplicated by their canonical encoding, so two multi-states are
merged only when their control parts and data sets are exactly equal.
"""

from __future__ import annotations

import dataclasses as d
import sys
import time
import typing as t
from collections import deque

from .explore import EdgeAnnotation, TransitionSystemView
from .multistate import MultiState

DEFAULT_MAX_STORE_BYTES = 4 << 30

# rough per-entry cost of the index dict, the key list and the parent list
_ENTRY_OVERHEAD = 160


class StoreCapacityError(Exception):
    def __init__(self, message: str, stats: "SearchStats") -> None:
        self.stats = stats
        super().__init__(message)


class SearchTimeout(Exception):
    def __init__(self, stats: "SearchStats") -> None:
        self.stats = stats
        super().__init__(f"search timed out after {stats.wall_time:.1f}s")


@d.dataclass
class SearchStats:
    states: int = 0
    transitions: int = 0
    inner_transitions: int = 0
    iterations: int = 0
    peak_store_bytes: int = 0
    wall_time: float = 0.0


@d.dataclass
class Lasso:
    """``states[i] -> states[i+1]`` via ``edges[i]``; the last edge returns to
    ``states[loop_start]``."""

    states: list[MultiState]
    edges: list[EdgeAnnotation]
    loop_start: int

    def __post_init__(self) -> None:
        if len(self.edges) != len(self.states) or not 0 <= self.loop_start < len(self.states):
            raise ValueError("malformed lasso")

    def succ(self, i: int) -> int:
        return i + 1 if i + 1 < len(self.states) else self.loop_start

    @property
    def stem(self) -> list[tuple[MultiState, EdgeAnnotation]]:
        return list(zip(self.states[: self.loop_start], self.edges[: self.loop_start]))

    @property
    def cycle(self) -> list[tuple[MultiState, EdgeAnnotation]]:
        return list(zip(self.states[self.loop_start :], self.edges[self.loop_start :]))


@d.dataclass
class Verdict:
    holds: bool
    witness: t.Optional[Lasso]
    stats: SearchStats
    algorithm: str = "ndfs"


class VisitedStore:
    """Canonical-encoding keyed state store with first-discovery parent edges."""

    def __init__(
        self,
        encode: t.Callable[[MultiState], bytes],
        decode: t.Callable[[bytes], MultiState],
        max_bytes: int = DEFAULT_MAX_STORE_BYTES,
    ) -> None:
        self.encode = encode
        self.decode = decode
        self.max_bytes = max_bytes
        self.index: dict[bytes, int] = {}
        self.keys: list[bytes] = []
        self.parents: list[tuple[int, t.Optional[EdgeAnnotation]]] = []
        self.bytes_used = 0

    def __len__(self) -> int:
        return len(self.keys)

    def lookup_or_insert(
        self, s: MultiState, parent: int = -1, edge: t.Optional[EdgeAnnotation] = None
    ) -> tuple[int, bool]:
        key = self.encode(s)
        sid = self.index.get(key)
        if sid is not None:
            return sid, True
        cost = sys.getsizeof(key) + _ENTRY_OVERHEAD
        if self.bytes_used + cost > self.max_bytes:
            raise StoreCapacityError(
                f"state store exceeds {self.max_bytes} bytes after {len(self.keys)} states",
                SearchStats(states=len(self.keys), peak_store_bytes=self.bytes_used),
            )
        sid = len(self.keys)
        self.index[key] = sid
        self.keys.append(key)
        self.parents.append((parent, edge))
        self.bytes_used += cost
        return sid, False

    def lookup(self, s: MultiState) -> t.Optional[int]:
        return self.index.get(self.encode(s))

    def state(self, sid: int) -> MultiState:
        return self.decode(self.keys[sid])

    def path_to(self, sid: int) -> tuple[list[int], list[EdgeAnnotation]]:
        """Parent-graph path from an initial state to ``sid``; ``edges[i]``
        leads from ``ids[i]`` to ``ids[i+1]``."""
        ids = [sid]
        edges: list[EdgeAnnotation] = []
        while True:
            parent, edge = self.parents[ids[-1]]
            if parent < 0:
                break
            assert edge is not None
            ids.append(parent)
            edges.append(edge)
        ids.reverse()
        edges.reverse()
        return ids, edges


def visited_lookup_or_insert(store: VisitedStore, s: MultiState) -> tuple[int, bool]:
    return store.lookup_or_insert(s)


class _Clock:
    def __init__(self, timeout: t.Optional[float], stats: SearchStats) -> None:
        self.start = time.perf_counter()
        self.deadline = None if timeout is None else self.start + timeout
        self.stats = stats
        self.ticks = 0

    def tick(self) -> None:
        self.ticks += 1
        if self.deadline is not None and self.ticks & 255 == 0 and time.perf_counter() > self.deadline:
            self.stats.wall_time = time.perf_counter() - self.start
            raise SearchTimeout(self.stats)

    def stop(self) -> None:
        self.stats.wall_time = time.perf_counter() - self.start


Succ = t.Callable[[int], list[tuple[int, EdgeAnnotation]]]


def _nested_dfs(
    roots: t.Iterable[int],
    succ: Succ,
    accepting: t.Callable[[int], bool],
    clock: _Clock,
    inner_succ: t.Optional[Succ] = None,
) -> t.Optional[tuple[list[int], list[EdgeAnnotation], int]]:
    """Two-colour nested DFS on integer node ids.

    ``succ`` of an unseen node is called once by the outer search.  Returns
    ``(ids, edges, loop_start)`` describing a lasso from a root, or ``None``.
    """
    inner_succ = inner_succ or succ
    blue: set[int] = set()
    red: set[int] = set()
    on_stack: dict[int, int] = {}
    stats = clock.stats
    for root in roots:
        if root in blue:
            continue
        blue.add(root)
        # frame: [node, successors, next index, incoming edge]
        stack: list[list[t.Any]] = [[root, succ(root), 0, None]]
        on_stack[root] = 0
        stats.transitions += len(stack[0][1])
        while stack:
            frame = stack[-1]
            node, succs, i = frame[0], frame[1], frame[2]
            if i < len(succs):
                frame[2] = i + 1
                nxt, edge = succs[i]
                if nxt not in blue:
                    blue.add(nxt)
                    clock.tick()
                    s2 = succ(nxt)
                    stats.transitions += len(s2)
                    on_stack[nxt] = len(stack)
                    stack.append([nxt, s2, 0, edge])
                continue
            if accepting(node):
                found = _red_search(node, inner_succ, red, on_stack, clock)
                if found is not None:
                    target, inner_nodes, inner_edges = found
                    pos = on_stack[target]
                    ids = [f[0] for f in stack] + inner_nodes
                    edges = [f[3] for f in stack[1:]] + inner_edges
                    return ids, edges, pos
            del on_stack[node]
            stack.pop()
    return None


def _red_search(
    seed: int, succ: Succ, red: set[int], on_stack: dict[int, int], clock: _Clock
) -> t.Optional[tuple[int, list[int], list[EdgeAnnotation]]]:
    """Search from ``seed`` for a node on the outer stack.

    Returns the node hit, the inner path after the seed, and the edges from
    the seed along that path up to and including the edge into the hit node.
    """
    stats = clock.stats
    first = succ(seed)
    stats.inner_transitions += len(first)
    stack: list[list[t.Any]] = [[seed, first, 0, None]]
    while stack:
        frame = stack[-1]
        succs, i = frame[1], frame[2]
        if i >= len(succs):
            stack.pop()
            continue
        frame[2] = i + 1
        nxt, edge = succs[i]
        if nxt in on_stack:
            nodes = [f[0] for f in stack[1:]]
            edges = [f[3] for f in stack[1:]] + [edge]
            return nxt, nodes, edges
        if nxt not in red:
            red.add(nxt)
            clock.tick()
            s2 = succ(nxt)
            stats.inner_transitions += len(s2)
            stack.append([nxt, s2, 0, edge])
    return None


def ndfs(
    ts: TransitionSystemView,
    *,
    max_store_bytes: int = DEFAULT_MAX_STORE_BYTES,
    timeout: t.Optional[float] = None,
) -> Verdict:
    """On-the-fly nested depth-first search for an accepting cycle."""
    stats = SearchStats()
    clock = _Clock(timeout, stats)
    store = VisitedStore(ts.encode, ts.decode, max_store_bytes)
    states: dict[int, MultiState] = {}
    roots = []
    for s in ts.initial_states():
        sid, present = store.lookup_or_insert(s)
        if not present:
            roots.append(sid)
            states[sid] = s

    def succ(sid: int) -> list[tuple[int, EdgeAnnotation]]:
        s = states.pop(sid, None) or store.state(sid)
        out = []
        for t_state, edge in ts.successors(s):
            tid, present = store.lookup_or_insert(t_state, sid, edge)
            if not present:
                states[tid] = t_state
            out.append((tid, edge))
        return out

    def accepting(sid: int) -> bool:
        return ts.is_accepting(store.state(sid))

    try:
        found = _nested_dfs(roots, succ, accepting, clock)
    except StoreCapacityError as err:
        _finish(stats, store, clock)
        err.stats = stats
        raise
    except SearchTimeout:
        _finish(stats, store, clock)
        raise
    _finish(stats, store, clock)
    if found is None:
        return Verdict(True, None, stats, "ndfs")
    ids, edges, pos = found
    return Verdict(False, Lasso([store.state(i) for i in ids], edges, pos), stats, "ndfs")


def _finish(stats: SearchStats, store: VisitedStore, clock: _Clock) -> None:
    stats.states = len(store)
    stats.peak_store_bytes = store.bytes_used
    clock.stop()


@d.dataclass
class StateGraph:
    store: VisitedStore
    succ: list[list[tuple[int, EdgeAnnotation]]]
    accepting: list[bool]
    initial: list[int]

    @property
    def n_edges(self) -> int:
        return sum(len(s) for s in self.succ)


def explore_graph(
    ts: TransitionSystemView,
    *,
    max_store_bytes: int = DEFAULT_MAX_STORE_BYTES,
    timeout: t.Optional[float] = None,
    stats: t.Optional[SearchStats] = None,
) -> StateGraph:
    """Breadth-first generation of the whole reachable graph."""
    stats = stats or SearchStats()
    clock = _Clock(timeout, stats)
    store = VisitedStore(ts.encode, ts.decode, max_store_bytes)
    succ: list[list[tuple[int, EdgeAnnotation]]] = []
    accepting: list[bool] = []
    initial: list[int] = []
    queue: deque[tuple[int, MultiState]] = deque()
    try:
        for s in ts.initial_states():
            sid, present = store.lookup_or_insert(s)
            if not present:
                initial.append(sid)
                queue.append((sid, s))
                accepting.append(ts.is_accepting(s))
                succ.append([])
        while queue:
            sid, s = queue.popleft()
            clock.tick()
            out = []
            for t_state, edge in ts.successors(s):
                tid, present = store.lookup_or_insert(t_state, sid, edge)
                if not present:
                    queue.append((tid, t_state))
                    accepting.append(ts.is_accepting(t_state))
                    succ.append([])
                out.append((tid, edge))
            succ[sid] = out
            stats.transitions += len(out)
    finally:
        stats.states = len(store)
        stats.peak_store_bytes = store.bytes_used
        clock.stop()
    return StateGraph(store, succ, accepting, initial)


def owcty_fixpoint(graph: StateGraph, stats: t.Optional[SearchStats] = None, clock: t.Optional[_Clock] = None) -> list[bool]:
    """Alternate reachability-from-accepting and zero-in-degree elimination
    until the candidate set is stable; returns the membership vector."""
    stats = stats or SearchStats()
    n = len(graph.succ)
    succ_ids = [sorted({j for j, _ in out}) for out in graph.succ]
    alive = [True] * n
    while True:
        stats.iterations += 1
        # reset: keep only what is reachable from accepting candidates
        reach = [False] * n
        queue = deque(i for i in range(n) if alive[i] and graph.accepting[i])
        for i in queue:
            reach[i] = True
        while queue:
            i = queue.popleft()
            if clock is not None:
                clock.tick()
            for j in succ_ids[i]:
                if alive[j] and not reach[j]:
                    reach[j] = True
                    queue.append(j)
        # elimination: repeatedly drop candidates nobody in the set points to
        indeg = [0] * n
        for i in range(n):
            if reach[i]:
                for j in succ_ids[i]:
                    if reach[j]:
                        indeg[j] += 1
        queue = deque(i for i in range(n) if reach[i] and indeg[i] == 0)
        while queue:
            i = queue.popleft()
            reach[i] = False
            for j in succ_ids[i]:
                if reach[j]:
                    indeg[j] -= 1
                    if indeg[j] == 0:
                        queue.append(j)
        if reach == alive:
            return alive
        alive = reach


def owcty(
    ts: TransitionSystemView,
    *,
    max_store_bytes: int = DEFAULT_MAX_STORE_BYTES,
    timeout: t.Optional[float] = None,
) -> Verdict:
    """One-way-catch-them-young over the fully generated graph.

    A violation's witness comes from a nested DFS restricted to the fixpoint
    set, prefixed with the parent-graph path from an initial state.
    """
    stats = SearchStats()
    graph = explore_graph(ts, max_store_bytes=max_store_bytes, timeout=timeout, stats=stats)
    clock = _Clock(None if timeout is None else max(timeout - stats.wall_time, 0.0), stats)
    explore_time = stats.wall_time
    alive = owcty_fixpoint(graph, stats, clock)
    survivors = [i for i, a in enumerate(alive) if a]

    def finish() -> None:
        clock.stop()
        stats.wall_time += explore_time

    if not survivors:
        finish()
        return Verdict(True, None, stats, "owcty")

    def restricted(i: int) -> list[tuple[int, EdgeAnnotation]]:
        return [(j, e) for j, e in graph.succ[i] if alive[j]]

    # the restricted search counts its own transitions separately
    witness_stats = SearchStats()
    found = _nested_dfs(
        [i for i in survivors if graph.accepting[i]],
        restricted,
        lambda i: graph.accepting[i],
        _Clock(None, witness_stats),
    )
    finish()
    if found is None:
        raise RuntimeError("OWCTY fixpoint is nonempty but no accepting cycle was found")
    ids, edges, pos = found
    prefix_ids, prefix_edges = graph.store.path_to(ids[0])
    all_ids = prefix_ids[:-1] + ids
    all_edges = prefix_edges + edges
    lasso = Lasso([graph.store.state(i) for i in all_ids], all_edges, pos + len(prefix_ids) - 1)
    return Verdict(False, lasso, stats, "owcty")


ALGORITHMS: dict[str, t.Callable[..., Verdict]] = {"ndfs": ndfs, "owcty": owcty}
