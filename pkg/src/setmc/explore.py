"""Product of a process model with a Büchi automaton, as an implicit graph.

Two views share one compiled model:

* :class:`SymbolicProduct` explores the set-reduced product: each state is a
  :class:`MultiState` and successors are grouped by resulting control part.
* :class:`ExplicitProduct` explores the unreduced product: every state carries
  exactly one evaluation of the input variables.

A product step is one system step (a process transition, or a rendezvous of a
sender and a receiver on a channel) followed by one automaton step whose label
is read on the post-step state.  Initial states are obtained by one automaton
step from the initial system state.  Effects run left to right; the sender's
effects run before the receiver's.
"""

from __future__ import annotations

import dataclasses as d
import typing as t

import numpy as np

from .lang.evaluate import compile_scalar, compile_vector
from .lang.syntax import EvalError, Model
from .ltl.buchi import BuchiAutomaton
from .ltl.parser import AtomicProposition
from .multistate import (
    DEFAULT_EVAL_CAP,
    ControlPart,
    DataSet,
    Evaluation,
    MultiState,
    StateLayout,
    canonical_decode,
    canonical_encode,
    initial_dataset,
    wrap_array,
)


class VerificationError(Exception):
    """The model cannot be explored (deadlock, evaluation error)."""

    def __init__(self, message: str, state: t.Optional[MultiState] = None, **context: t.Any) -> None:
        self.state = state
        self.context = context
        super().__init__(message)


class DeadlockError(VerificationError):
    pass


@d.dataclass(frozen=True, order=True)
class SystemStep:
    """A process transition (``kind="local"``), a rendezvous (``"sync"``), or a
    stutter step added for deadlocked evaluations (``"stutter"``)."""

    kind: str
    process: int = -1
    transition: int = -1
    partner: int = -1
    partner_transition: int = -1


@d.dataclass(frozen=True, order=True)
class Move:
    step: SystemStep
    buchi: int  # index into BuchiAutomaton.transitions


@d.dataclass(frozen=True)
class EdgeAnnotation:
    """All moves that contribute to one successor, in generation order."""

    moves: tuple[Move, ...]


class TransitionSystemView(t.Protocol):
    def initial_states(self) -> list[MultiState]: ...

    def successors(self, s: MultiState) -> list[tuple[MultiState, EdgeAnnotation]]: ...

    def is_accepting(self, s: MultiState) -> bool: ...

    def encode(self, s: MultiState) -> bytes: ...

    def decode(self, blob: bytes) -> MultiState: ...


# --- compilation ----------------------------------------------------------------


@d.dataclass
class _Effect:
    kind: str
    index: int
    mask: int
    scalar: t.Callable
    vector: t.Callable
    expr: t.Any


@d.dataclass
class _Transition:
    process: int
    index: int
    target: int
    guard_expr: t.Any
    guard_scalar: t.Callable
    guard_vector: t.Callable
    guard_trivial: bool
    effects: list[_Effect]


class CompiledModel:
    def __init__(self, model: Model, automaton: BuchiAutomaton, aps: t.Sequence[AtomicProposition]) -> None:
        self.model = model
        self.automaton = automaton
        self.aps = tuple(aps)
        self.layout = StateLayout(
            len(model.processes), len(model.explicit_vars), len(model.input_vars)
        )
        self.transitions: list[list[_Transition]] = []
        # per process, per location: local transitions, send transitions, recv by channel
        self.local: list[list[list[_Transition]]] = []
        self.send: list[list[list[tuple[str, _Transition]]]] = []
        self.recv: list[list[dict[str, list[_Transition]]]] = []
        for pi, proc in enumerate(model.processes):
            trs = []
            local: list[list[_Transition]] = [[] for _ in proc.locations]
            send: list[list[tuple[str, _Transition]]] = [[] for _ in proc.locations]
            recv: list[dict[str, list[_Transition]]] = [{} for _ in proc.locations]
            for ti, tr in enumerate(proc.transitions):
                effects = []
                for a in tr.effects:
                    slot = a.target.slot
                    assert slot is not None
                    effects.append(
                        _Effect(slot.kind, slot.index, slot.mask, compile_scalar(a.expr), compile_vector(a.expr), a.expr)
                    )
                ct = _Transition(
                    pi,
                    ti,
                    tr.target_index,
                    tr.guard,
                    compile_scalar(tr.guard),
                    compile_vector(tr.guard),
                    getattr(tr.guard, "value", None) is True,
                    effects,
                )
                trs.append(ct)
                if tr.sync is None:
                    local[tr.source_index].append(ct)
                elif tr.sync.direction == "send":
                    send[tr.source_index].append((tr.sync.channel, ct))
                else:
                    recv[tr.source_index].setdefault(tr.sync.channel, []).append(ct)
            self.transitions.append(trs)
            self.local.append(local)
            self.send.append(send)
            self.recv.append(recv)

        used = automaton.used_aps
        by_id = {ap.ap_id: ap for ap in self.aps}
        missing = used - set(by_id)
        if missing:
            raise ValueError(f"automaton uses unbound propositions {sorted(missing)}")
        self.ap_scalar = {i: compile_scalar(by_id[i].expr) for i in sorted(used)}
        self.ap_vector = {i: compile_vector(by_id[i].expr) for i in sorted(used)}
        self.ap_all_scalar = {ap.ap_id: compile_scalar(ap.expr) for ap in self.aps}
        self.accepting = automaton.accepting

        self.init_locations = tuple(p.location_index(p.initial) for p in model.processes)
        self.init_explicit = tuple(v.init for _, v in model.explicit_vars)
        self._steps_cache: dict[tuple[int, ...], list[tuple[SystemStep, list[_Transition]]]] = {}

    def steps(self, locations: tuple[int, ...]) -> list[tuple[SystemStep, list[_Transition]]]:
        """System steps available from a location vector, in a fixed order:
        processes in declaration order; for each, its transitions in
        declaration order; a send is expanded over every matching receive of
        every other process."""
        cached = self._steps_cache.get(locations)
        if cached is not None:
            return cached
        out: list[tuple[SystemStep, list[_Transition]]] = []
        for pi, loc in enumerate(locations):
            by_index: list[tuple[int, list[tuple[SystemStep, list[_Transition]]]]] = []
            for tr in self.local[pi][loc]:
                by_index.append((tr.index, [(SystemStep("local", pi, tr.index), [tr])]))
            for chan, tr in self.send[pi][loc]:
                pairs = []
                for qi, qloc in enumerate(locations):
                    if qi == pi:
                        continue
                    for rtr in self.recv[qi][qloc].get(chan, ()):
                        pairs.append((SystemStep("sync", pi, tr.index, qi, rtr.index), [tr, rtr]))
                by_index.append((tr.index, pairs))
            for _, items in sorted(by_index, key=lambda x: x[0]):
                out.extend(items)
        self._steps_cache[locations] = out
        return out

    def transitions_of(self, step: SystemStep) -> list[_Transition]:
        if step.kind == "stutter":
            return []
        trs = [self.transitions[step.process][step.transition]]
        if step.kind == "sync":
            trs.append(self.transitions[step.partner][step.partner_transition])
        return trs

    def ap_valuation(self, control: ControlPart, ev: Evaluation, all_aps: bool = False) -> frozenset[int]:
        fns = self.ap_all_scalar if all_aps else self.ap_scalar
        return frozenset(i for i, fn in fns.items() if fn(control.explicit, ev, control.locations))


# --- the two views ----------------------------------------------------------------


class _ProductBase:
    def __init__(
        self,
        model: Model,
        automaton: BuchiAutomaton,
        aps: t.Sequence[AtomicProposition],
        *,
        eval_cap: int = DEFAULT_EVAL_CAP,
        self_loop_deadlocks: bool = False,
        compiled: t.Optional[CompiledModel] = None,
    ) -> None:
        self.cm = compiled or CompiledModel(model, automaton, aps)
        self.model = model
        self.automaton = automaton
        self.eval_cap = eval_cap
        self.self_loop_deadlocks = self_loop_deadlocks

    @property
    def layout(self) -> StateLayout:
        return self.cm.layout

    def is_accepting(self, s: MultiState) -> bool:
        return s.control.buchi in self.cm.accepting

    def encode(self, s: MultiState) -> bytes:
        return canonical_encode(s)

    def decode(self, blob: bytes) -> MultiState:
        return canonical_decode(blob, self.cm.layout)

    def initial_control(self) -> ControlPart:
        return ControlPart(self.cm.init_locations, self.cm.init_explicit, self.automaton.initial)

    def initial_dataset(self) -> DataSet:
        return initial_dataset(self.model.input_vars, self.eval_cap)


class SymbolicProduct(_ProductBase):
    """The set-reduced product explored with multi-states."""

    mode = "sym"

    # -- vectorised building blocks -------------------------------------------

    def _label_masks(
        self, buchi: int, explicit: tuple[int, ...], locations: tuple[int, ...], rows: np.ndarray
    ) -> list[tuple[int, int, np.ndarray]]:
        """For each automaton transition out of ``buchi``: (index, target, row mask)."""
        out = []
        cache: dict[int, np.ndarray] = {}
        n = len(rows)

        def ap_mask(i: int) -> np.ndarray:
            m = cache.get(i)
            if m is None:
                v = self.cm.ap_vector[i](explicit, locations, rows)
                m = v.astype(bool) if isinstance(v, np.ndarray) else np.full(n, bool(v))
                cache[i] = m
            return m

        for ti, tr in self.automaton.outgoing(buchi):
            mask = np.ones(n, dtype=bool)
            for i in tr.label.pos:
                mask &= ap_mask(i)
            for i in tr.label.neg:
                mask &= ~ap_mask(i)
            out.append((ti, tr.target, mask))
        return out

    def _fire_system(
        self, step: SystemStep, control: ControlPart, rows: np.ndarray
    ) -> tuple[np.ndarray, list[tuple[tuple[int, ...], tuple[int, ...], np.ndarray, np.ndarray]]]:
        """Apply a system step to ``rows`` (aligned with source indices).

        Returns the indices of rows enabling the step, and the resulting
        branches ``(locations, explicit, source indices, rows)``; a step whose
        effects write an input-dependent value to an explicit variable splits
        into one branch per stored value.
        """
        L = control.locations
        idx = np.arange(len(rows))
        cur = rows
        trs = self.cm.transitions_of(step)
        try:
            for tr in trs:
                if tr.guard_trivial:
                    continue
                g = tr.guard_vector(control.explicit, L, cur)
                if isinstance(g, np.ndarray):
                    sel = np.flatnonzero(g)
                    idx, cur = idx[sel], cur[sel]
                elif not g:
                    return idx[:0], []
                if not len(cur):
                    return idx, []
            enabled = idx
            branches = [(list(control.explicit), idx, cur)]
            for tr in trs:
                for eff in tr.effects:
                    nxt = []
                    for E, bidx, brows in branches:
                        v = eff.vector(E, L, brows)
                        if eff.kind == "input":
                            brows = brows.copy()
                            if isinstance(v, np.ndarray):
                                brows[:, eff.index] = wrap_array(v, eff.mask)
                            else:
                                brows[:, eff.index] = v & eff.mask
                            nxt.append((E, bidx, brows))
                        elif not isinstance(v, np.ndarray):
                            E2 = list(E)
                            E2[eff.index] = v & eff.mask
                            nxt.append((E2, bidx, brows))
                        else:
                            stored = wrap_array(v, eff.mask)
                            for key in np.unique(stored).tolist():
                                m = stored == key
                                E2 = list(E)
                                E2[eff.index] = key
                                nxt.append((E2, bidx[m], brows[m]))
                    branches = nxt
        except EvalError as err:
            raise VerificationError(
                f"evaluation error in {self.describe_step(step)}: {err}",
                None,
                step=step,
                evaluation=err.evaluation,
                expr=err.expr,
            ) from err
        if step.kind == "stutter":
            locs = L
        else:
            new = list(L)
            for tr in trs:
                new[tr.process] = tr.target
            locs = tuple(new)
        return enabled, [(locs, tuple(E), bidx, brows) for E, bidx, brows in branches]

    def _pieces(
        self, control: ControlPart, rows: np.ndarray, steps: t.Iterable[SystemStep], *, stutter_dead: bool
    ) -> t.Iterator[tuple[ControlPart, np.ndarray, np.ndarray, Move]]:
        """All (target control, source indices, target rows, move) pieces."""
        n = len(rows)
        enabled = np.zeros(n, dtype=bool)
        for step in steps:
            en, branches = self._fire_system(step, control, rows)
            enabled[en] = True
            for locs, E, bidx, brows in branches:
                yield from self._property_pieces(control.buchi, step, locs, E, bidx, brows)
        if stutter_dead:
            dead = np.flatnonzero(~enabled)
            if len(dead):
                if not self.self_loop_deadlocks:
                    state = MultiState(control, DataSet(rows))
                    raise DeadlockError(
                        f"deadlock: no transition enabled for {len(dead)} evaluation(s)",
                        state,
                        evaluations=[tuple(r) for r in rows[dead].tolist()],
                    )
                step = SystemStep("stutter")
                yield from self._property_pieces(
                    control.buchi, step, control.locations, control.explicit, dead, rows[dead]
                )

    def _property_pieces(
        self, buchi: int, step: SystemStep, locs: tuple[int, ...], E: tuple[int, ...], bidx: np.ndarray, brows: np.ndarray
    ) -> t.Iterator[tuple[ControlPart, np.ndarray, np.ndarray, Move]]:
        for ti, target, mask in self._label_masks(buchi, E, locs, brows):
            if mask.any():
                yield ControlPart(locs, E, target), bidx[mask], brows[mask], Move(step, ti)

    @staticmethod
    def _group(
        pieces: t.Iterable[tuple[ControlPart, np.ndarray, np.ndarray, Move]]
    ) -> list[tuple[MultiState, EdgeAnnotation]]:
        groups: dict[ControlPart, tuple[list[np.ndarray], list[Move]]] = {}
        for control, _, rows, move in pieces:
            g = groups.get(control)
            if g is None:
                g = groups[control] = ([], [])
            g[0].append(rows)
            if move not in g[1]:
                g[1].append(move)
        out = []
        for control, (chunks, moves) in groups.items():
            rows = chunks[0] if len(chunks) == 1 else np.concatenate(chunks)
            out.append((MultiState(control, DataSet(rows)), EdgeAnnotation(tuple(moves))))
        return out

    # -- the three-function interface -------------------------------------------

    def initial_states(self) -> list[MultiState]:
        control = self.initial_control()
        rows = self.initial_dataset().rows
        pieces = self._property_pieces(
            control.buchi, SystemStep("init"), control.locations, control.explicit, np.arange(len(rows)), rows
        )
        return [s for s, _ in self._group(pieces)]

    def successors(self, s: MultiState) -> list[tuple[MultiState, EdgeAnnotation]]:
        steps = [step for step, _ in self.cm.steps(s.control.locations)]
        try:
            return self._group(self._pieces(s.control, s.data.rows, steps, stutter_dead=True))
        except VerificationError as err:
            if err.state is None:
                err.state = s
            raise

    # -- support for counterexamples ----------------------------------------------

    def edge_image(
        self, control: ControlPart, annotation: EdgeAnnotation, rows: np.ndarray
    ) -> list[tuple[ControlPart, np.ndarray, np.ndarray]]:
        """Per-row images of ``rows`` under the moves of one edge:
        ``(target control, source row indices, image rows)``, unmerged."""
        out = []
        for move in annotation.moves:
            if move.step.kind == "init":
                continue
            if move.step.kind == "stutter":
                # stutter applies only where nothing else is enabled
                steps = [st for st, _ in self.cm.steps(control.locations)]
                enabled = np.zeros(len(rows), dtype=bool)
                for st in steps:
                    en, _ = self._fire_system(st, control, rows)
                    enabled[en] = True
                dead = np.flatnonzero(~enabled)
                branches = [(control.locations, control.explicit, dead, rows[dead])]
            else:
                _, branches = self._fire_system(move.step, control, rows)
            tr = self.automaton.transitions[move.buchi]
            for locs, E, bidx, brows in branches:
                for ti, target, mask in self._label_masks(control.buchi, E, locs, brows):
                    if ti == move.buchi and mask.any():
                        out.append((ControlPart(locs, E, tr.target), bidx[mask], brows[mask]))
        return out

    def ap_values(self, s: MultiState) -> dict[int, np.ndarray]:
        """Truth value of every property proposition for every member."""
        c = s.control
        out = {}
        for i, fn in self.cm.ap_vector.items():
            v = fn(c.explicit, c.locations, s.data.rows)
            out[i] = v.astype(bool) if isinstance(v, np.ndarray) else np.full(len(s.data), bool(v))
        return out

    def describe_step(self, step: SystemStep) -> str:
        return describe_step(self.model, step)


class ExplicitProduct(_ProductBase):
    """The unreduced product: one evaluation per state."""

    mode = "exp"

    def _property_states(
        self, buchi: int, step: SystemStep, locs: tuple[int, ...], E: tuple[int, ...], ev: Evaluation
    ) -> t.Iterator[tuple[ControlPart, Evaluation, Move]]:
        valuation: dict[int, bool] = {}
        for ti, tr in self.automaton.outgoing(buchi):
            ok = True
            for i in tr.label.pos:
                v = valuation.get(i)
                if v is None:
                    v = valuation[i] = bool(self.cm.ap_scalar[i](E, ev, locs))
                if not v:
                    ok = False
                    break
            if ok:
                for i in tr.label.neg:
                    v = valuation.get(i)
                    if v is None:
                        v = valuation[i] = bool(self.cm.ap_scalar[i](E, ev, locs))
                    if v:
                        ok = False
                        break
            if ok:
                yield ControlPart(locs, E, tr.target), ev, Move(step, ti)

    def _fire_system(
        self, step: SystemStep, control: ControlPart, ev: Evaluation
    ) -> t.Optional[tuple[tuple[int, ...], tuple[int, ...], Evaluation]]:
        L = control.locations
        trs = self.cm.transitions_of(step)
        try:
            for tr in trs:
                if not tr.guard_trivial and not tr.guard_scalar(control.explicit, ev, L):
                    return None
            E = list(control.explicit)
            inputs = list(ev)
            for tr in trs:
                for eff in tr.effects:
                    v = eff.scalar(E, inputs, L) & eff.mask
                    if eff.kind == "input":
                        inputs[eff.index] = v
                    else:
                        E[eff.index] = v
        except EvalError as err:
            raise VerificationError(
                f"evaluation error in {describe_step(self.model, step)}: {err}",
                None,
                step=step,
                evaluation=err.evaluation,
                expr=err.expr,
            ) from err
        locs = list(L)
        for tr in trs:
            locs[tr.process] = tr.target
        return tuple(locs), tuple(E), tuple(inputs)

    def initial_states(self) -> list[MultiState]:
        control = self.initial_control()
        out: dict[tuple[ControlPart, Evaluation], None] = {}
        for ev in self.initial_dataset().evaluations():
            for c, e, _ in self._property_states(control.buchi, SystemStep("init"), control.locations, control.explicit, ev):
                out.setdefault((c, e))
        return [MultiState(c, DataSet.single(e)) for c, e in out]

    def successors(self, s: MultiState) -> list[tuple[MultiState, EdgeAnnotation]]:
        if len(s.data) != 1:
            raise ValueError("explicit successors need a singleton data set")
        control = s.control
        ev = s.data.evaluations()[0]
        groups: dict[tuple[ControlPart, Evaluation], list[Move]] = {}
        any_enabled = False
        try:
            for step, _ in self.cm.steps(control.locations):
                post = self._fire_system(step, control, ev)
                if post is None:
                    continue
                any_enabled = True
                locs, E, ev2 = post
                for c, e, move in self._property_states(control.buchi, step, locs, E, ev2):
                    groups.setdefault((c, e), []).append(move)
            if not any_enabled:
                if not self.self_loop_deadlocks:
                    raise DeadlockError("deadlock: no transition enabled", s, evaluations=[ev])
                step = SystemStep("stutter")
                for c, e, move in self._property_states(control.buchi, step, control.locations, control.explicit, ev):
                    groups.setdefault((c, e), []).append(move)
        except VerificationError as err:
            if err.state is None:
                err.state = s
            raise
        return [
            (MultiState(c, DataSet.single(e)), EdgeAnnotation(tuple(moves)))
            for (c, e), moves in groups.items()
        ]

    def encode(self, s: MultiState) -> bytes:
        return canonical_encode(s)


# --- module-level helpers ------------------------------------------------------


def initial_multistates(
    model: Model, automaton: BuchiAutomaton, aps: t.Sequence[AtomicProposition], **kw: t.Any
) -> list[MultiState]:
    return SymbolicProduct(model, automaton, aps, **kw).initial_states()


def successors_sym(ts: SymbolicProduct, s: MultiState) -> list[tuple[MultiState, EdgeAnnotation]]:
    return ts.successors(s)


def successors_exp(ts: ExplicitProduct, s: MultiState) -> list[tuple[MultiState, EdgeAnnotation]]:
    return ts.successors(s)


def refines(t_state: MultiState, s: MultiState, accepting: t.AbstractSet[int] = frozenset()) -> bool:
    """``t`` (single evaluation) is represented by the multi-state ``s``."""
    if len(t_state.data) != 1 or t_state.control != s.control:
        return False
    acc_t = t_state.control.buchi in accepting
    acc_s = s.control.buchi in accepting
    return acc_t == acc_s and t_state.data.evaluations()[0] in s.data


def make_product(
    mode: str, model: Model, automaton: BuchiAutomaton, aps: t.Sequence[AtomicProposition], **kw: t.Any
) -> t.Union[SymbolicProduct, ExplicitProduct]:
    if mode == "sym":
        return SymbolicProduct(model, automaton, aps, **kw)
    if mode == "exp":
        return ExplicitProduct(model, automaton, aps, **kw)
    raise ValueError(f"unknown mode {mode!r}")


def describe_step(model: Model, step: SystemStep) -> str:
    if step.kind in ("stutter", "init"):
        return step.kind

    def one(pi: int, ti: int) -> str:
        proc = model.processes[pi]
        tr = proc.transitions[ti]
        return f"{proc.name}.{tr.source}->{tr.target}"

    text = one(step.process, step.transition)
    if step.kind == "sync":
        text += " | " + one(step.partner, step.partner_transition)
    return text
