"""Counterexample post-processing: narrowing, concretization, trace files."""

from __future__ import annotations

import dataclasses as d
import io
import json
import re
import typing as t

import numpy as np

from .cycledetect import Lasso
from .explore import (
    EdgeAnnotation,
    ExplicitProduct,
    Move,
    SymbolicProduct,
    SystemStep,
    describe_step,
)
from .multistate import ControlPart, DataSet, Evaluation, MultiState

UNROLL_CAP = 1 << 16


class EngineError(RuntimeError):
    """An internal invariant was violated (signals a bug, not a model error)."""


@d.dataclass
class NarrowedLasso:
    """Same shape as a :class:`Lasso`; every data set is cut down to the
    evaluations that can run the rest of the lasso forever."""

    states: list[MultiState]
    edges: list[EdgeAnnotation]
    loop_start: int
    rounds: int = 0

    def succ(self, i: int) -> int:
        return i + 1 if i + 1 < len(self.states) else self.loop_start

    def as_lasso(self) -> Lasso:
        return Lasso(list(self.states), list(self.edges), self.loop_start)


@d.dataclass
class ConcreteRun:
    """A lasso of single-evaluation states; the cycle is ``unrollings`` passes
    through the symbolic cycle."""

    states: list[MultiState]
    edges: list[EdgeAnnotation]
    loop_start: int
    unrollings: int

    def succ(self, i: int) -> int:
        return i + 1 if i + 1 < len(self.states) else self.loop_start

    def evaluations(self) -> list[Evaluation]:
        return [s.data.evaluations()[0] for s in self.states]


@d.dataclass
class SymbolicOnly:
    """Concretization gave up at the unroll limit; only the narrowed lasso is valid."""

    narrowed: NarrowedLasso
    unroll_limit: int


def symbolic_view(ts: t.Any) -> SymbolicProduct:
    """A symbolic product sharing ``ts``'s compiled model (for set images)."""
    if isinstance(ts, SymbolicProduct):
        return ts
    return SymbolicProduct(
        ts.model, ts.automaton, ts.cm.aps, eval_cap=ts.eval_cap,
        self_loop_deadlocks=ts.self_loop_deadlocks, compiled=ts.cm,
    )


def explicit_view(ts: t.Any) -> ExplicitProduct:
    if isinstance(ts, ExplicitProduct):
        return ts
    return ExplicitProduct(
        ts.model, ts.automaton, ts.cm.aps, eval_cap=ts.eval_cap,
        self_loop_deadlocks=ts.self_loop_deadlocks, compiled=ts.cm,
    )


def _row_keys(rows: np.ndarray) -> list[Evaluation]:
    return [tuple(r) for r in rows.tolist()]


def _supported(
    sym: SymbolicProduct, src: MultiState, edge: EdgeAnnotation, dst_control: ControlPart, keep: DataSet
) -> np.ndarray:
    """Mask over ``src.data``: rows with some image under ``edge`` in ``keep``."""
    ok = np.zeros(len(src.data), dtype=bool)
    allowed = set(keep.evaluations())
    for control, idx, rows in sym.edge_image(src.control, edge, src.data.rows):
        if control != dst_control:
            continue
        hit = np.fromiter((ev in allowed for ev in _row_keys(rows)), dtype=bool, count=len(rows))
        ok[idx[hit]] = True
    return ok


def narrow(lasso: Lasso, ts: t.Any) -> NarrowedLasso:
    """Greatest per-position subsets closed under "has an image in the next
    position's subset", iterated around the cycle to a fixpoint."""
    sym = symbolic_view(ts)
    n = len(lasso.states)
    kept = [s for s in lasso.states]
    dirty = True
    rounds = 0
    while dirty:
        dirty = False
        rounds += 1
        for i in reversed(range(n)):
            j = lasso.succ(i)
            src = kept[i]
            mask = _supported(sym, src, lasso.edges[i], kept[j].control, kept[j].data)
            if mask.all():
                continue
            if not mask.any():
                raise EngineError(f"narrowing emptied position {i} of the lasso")
            kept[i] = MultiState(src.control, src.data.subset(mask))
            dirty = True
    return NarrowedLasso(kept, list(lasso.edges), lasso.loop_start, rounds)


def check_narrowed(nl: NarrowedLasso, ts: t.Any) -> list[str]:
    """Violations of the narrowed-lasso invariants (empty list when valid)."""
    sym = symbolic_view(ts)
    problems = []
    for i, s in enumerate(nl.states):
        if not s.data:
            problems.append(f"position {i} is empty")
            continue
        j = nl.succ(i)
        mask = _supported(sym, s, nl.edges[i], nl.states[j].control, nl.states[j].data)
        if not mask.all():
            problems.append(f"position {i} has members without an image at position {j}")
    if not any(ts.is_accepting(s) for s in nl.states[nl.loop_start :]):
        problems.append("cycle has no accepting state")
    return problems


def default_unroll_limit(model: t.Any) -> int:
    size = 1
    for v in model.input_vars:
        size <<= v.width
    return min(size, UNROLL_CAP)


def _exp_step(
    exp: ExplicitProduct, state: MultiState, dst_control: ControlPart, allowed: DataSet
) -> t.Optional[tuple[MultiState, EdgeAnnotation]]:
    """Explicit successor into ``dst_control`` with the least allowed evaluation."""
    best = None
    for succ, edge in exp.successors(state):
        if succ.control != dst_control:
            continue
        ev = succ.data.evaluations()[0]
        if ev in allowed and (best is None or ev < best[0]):
            best = (ev, succ, edge)
    return None if best is None else (best[1], best[2])


def concretize(
    nl: NarrowedLasso, ts: t.Any, unroll_limit: t.Optional[int] = None
) -> t.Union[ConcreteRun, SymbolicOnly]:
    """Pick the least evaluation at the cycle entry, back it up along the stem,
    and unroll the cycle until the entry evaluation repeats."""
    sym = symbolic_view(ts)
    exp = explicit_view(ts)
    if unroll_limit is None:
        unroll_limit = default_unroll_limit(ts.model)
    ls = nl.loop_start
    entry = nl.states[ls]
    v = entry.data.evaluations()[0]

    # stem, backwards: least predecessor whose image hits the chosen evaluation
    stem_evs: list[Evaluation] = [v]
    for i in reversed(range(ls)):
        target = DataSet.single(stem_evs[-1])
        mask = _supported(sym, nl.states[i], nl.edges[i], nl.states[i + 1].control, target)
        if not mask.any():
            raise EngineError(f"no predecessor at stem position {i}")
        stem_evs.append(nl.states[i].data.subset(mask).evaluations()[0])
    stem_evs.reverse()

    states = [MultiState(nl.states[i].control, DataSet.single(stem_evs[i])) for i in range(ls + 1)]
    edges: list[EdgeAnnotation] = []
    for i in range(ls):
        step = _exp_step(exp, states[i], states[i + 1].control, DataSet.single(stem_evs[i + 1]))
        if step is None:
            raise EngineError(f"stem position {i} does not replay")
        edges.append(step[1])

    cycle_len = len(nl.states) - ls
    seen = {v: 0}
    entry_pos = [ls]
    cur = states[-1]
    for k in range(1, unroll_limit + 1):
        for off in range(cycle_len):
            i = ls + off
            j = nl.succ(i)
            step = _exp_step(exp, cur, nl.states[j].control, nl.states[j].data)
            if step is None:
                raise EngineError(f"cycle position {i} does not replay")
            edges.append(step[1])
            cur = step[0]
            if off + 1 < cycle_len:
                states.append(cur)
        ev = cur.data.evaluations()[0]
        if ev in seen:
            first = seen[ev]
            start = entry_pos[first]
            # the closing edge of the last pass returns to the first repeated entry
            return ConcreteRun(states, edges, start, k - first)
        seen[ev] = k
        entry_pos.append(len(states))
        states.append(cur)
    return SymbolicOnly(nl, unroll_limit)


# --- formatting ---------------------------------------------------------------


def _runs(values: list[int]) -> list[tuple[int, int]]:
    out: list[tuple[int, int]] = []
    for v in values:
        if out and v == out[-1][1] + 1:
            out[-1] = (out[-1][0], v)
        else:
            out.append((v, v))
    return out


def _fmt_run(lo: int, hi: int) -> str:
    return str(lo) if lo == hi else f"{lo}..{hi}"


def format_dataset(x: DataSet) -> str:
    """Range-compressed set syntax: ``{0..4,7}``; with several variables,
    tuples whose last component forms a run are merged: ``{(0,1..5),(2,0)}``."""
    k = x.arity
    evs = x.evaluations()
    if k == 0:
        return "{()}" if evs else "{}"
    if k == 1:
        return "{" + ",".join(_fmt_run(lo, hi) for lo, hi in _runs([e[0] for e in evs])) + "}"
    parts = []
    i = 0
    while i < len(evs):
        prefix = evs[i][:-1]
        lasts = []
        while i < len(evs) and evs[i][:-1] == prefix:
            lasts.append(evs[i][-1])
            i += 1
        for lo, hi in _runs(lasts):
            parts.append("(" + ",".join(map(str, prefix)) + "," + _fmt_run(lo, hi) + ")")
    return "{" + ",".join(parts) + "}"


_ITEM = re.compile(r"\(([^()]*)\)|([^,()]+)")


def parse_dataset(text: str, arity: int) -> DataSet:
    text = text.strip()
    if not (text.startswith("{") and text.endswith("}")):
        raise ValueError(f"not a set: {text!r}")
    body = text[1:-1].strip()
    rows: list[Evaluation] = []
    if arity == 0:
        return DataSet(np.zeros((1 if body == "()" else 0, 0), dtype=np.int64))
    for m in _ITEM.finditer(body):
        item = (m.group(1) if m.group(1) is not None else m.group(2)).strip()
        if not item:
            continue
        fields = [f.strip() for f in item.split(",")]
        if len(fields) != arity:
            raise ValueError(f"expected {arity} components in {item!r}")
        prefix = tuple(int(f) for f in fields[:-1])
        lo, _, hi = fields[-1].partition("..")
        for v in range(int(lo), int(hi or lo) + 1):
            rows.append(prefix + (v,))
    return DataSet.from_evaluations(rows, arity)


# --- trace files --------------------------------------------------------------


@d.dataclass
class TraceStep:
    section: str  # "stem" or "cycle"
    locations: dict[str, str]
    explicit: dict[str, int]
    data: list[Evaluation]
    buchi: int
    accepting: bool
    fired: str  # step leaving this state; the last cycle step returns to the cycle start


@d.dataclass
class Trace:
    model: str
    kind: str  # "lasso", "narrowed" or "concrete"
    inputs: list[str]
    steps: list[TraceStep]
    unrollings: t.Optional[int] = None


def _explicit_names(model: t.Any) -> list[str]:
    return [v.name if owner is None else f"{owner}.{v.name}" for owner, v in model.explicit_vars]


def _fired(model: t.Any, edge: EdgeAnnotation) -> str:
    seen: list[str] = []
    for m in edge.moves:
        text = f"{describe_step(model, m.step)} / q{m.buchi}"
        if text not in seen:
            seen.append(text)
    return " + ".join(seen)


def build_trace(obj: t.Union[Lasso, NarrowedLasso, ConcreteRun], ts: t.Any) -> Trace:
    model = ts.model
    names = _explicit_names(model)
    kind = {Lasso: "lasso", NarrowedLasso: "narrowed", ConcreteRun: "concrete"}[type(obj)]
    steps = []
    for i, s in enumerate(obj.states):
        c = s.control
        steps.append(
            TraceStep(
                "stem" if i < obj.loop_start else "cycle",
                {p.name: p.locations[c.locations[pi]] for pi, p in enumerate(model.processes)},
                dict(zip(names, c.explicit)),
                s.data.evaluations(),
                c.buchi,
                ts.is_accepting(s),
                _fired(model, obj.edges[i]),
            )
        )
    return Trace(
        model.name, kind, [v.name for v in model.input_vars], steps,
        obj.unrollings if isinstance(obj, ConcreteRun) else None,
    )


def _text_data(step: TraceStep, inputs: list[str], concrete: bool) -> str:
    if not inputs:
        return "-"
    if concrete:
        return " ".join(f"{n}={v}" for n, v in zip(inputs, step.data[0]))
    ds = DataSet.from_evaluations(step.data, len(inputs))
    head = inputs[0] if len(inputs) == 1 else "(" + ",".join(inputs) + ")"
    return f"{head}={format_dataset(ds)}"


def _render_text(tr: Trace) -> str:
    out = io.StringIO()
    out.write("setmc-trace 1\n")
    out.write(f"model {tr.model}\n")
    out.write(f"kind {tr.kind}\n")
    out.write("inputs " + (",".join(tr.inputs) or "-") + "\n")
    if tr.unrollings is not None:
        out.write(f"unrollings {tr.unrollings}\n")
    section = None
    concrete = tr.kind == "concrete"
    for st in tr.steps:
        if st.section != section:
            section = st.section
            out.write(f"[{section}]\n")
        locs = " ".join(f"{k}@{v}" for k, v in st.locations.items())
        expl = " ".join(f"{k}={v}" for k, v in st.explicit.items()) or "-"
        out.write(
            f"{locs} | {expl} | {_text_data(st, tr.inputs, concrete)} | q={st.buchi}"
            f" | acc={int(st.accepting)} | {st.fired}\n"
        )
    return out.getvalue()


def _render_json(tr: Trace) -> str:
    doc = {"format": "setmc-trace", "version": 1, **d.asdict(tr)}
    for st in doc["steps"]:
        st["data"] = [list(ev) for ev in st["data"]]
    return json.dumps(doc, indent=2) + "\n"


def serialize_trace(
    obj: t.Union[Lasso, NarrowedLasso, ConcreteRun, Trace], ts: t.Any = None, format: str = "text"
) -> bytes:
    tr = obj if isinstance(obj, Trace) else build_trace(obj, ts)
    if format == "text":
        return _render_text(tr).encode("utf-8")
    if format == "json":
        return _render_json(tr).encode("utf-8")
    raise ValueError(f"unknown trace format {format!r}")


def _parse_text(text: str) -> Trace:
    lines = text.splitlines()
    if not lines or lines[0] != "setmc-trace 1":
        raise ValueError("not a setmc text trace")
    header: dict[str, str] = {}
    i = 1
    while i < len(lines) and not lines[i].startswith("["):
        key, _, value = lines[i].partition(" ")
        header[key] = value
        i += 1
    inputs = [] if header["inputs"] == "-" else header["inputs"].split(",")
    kind = header["kind"]
    steps = []
    section = "stem"
    for line in lines[i:]:
        if line in ("[stem]", "[cycle]"):
            section = line[1:-1]
            continue
        locs, expl, data, q, acc, fired = line.split(" | ", 5)
        locations = dict(item.split("@", 1) for item in locs.split())
        explicit = {} if expl == "-" else {k: int(v) for k, v in (it.split("=", 1) for it in expl.split())}
        if not inputs:
            evs: list[Evaluation] = [()]
        elif kind == "concrete":
            evs = [tuple(int(it.split("=", 1)[1]) for it in data.split())]
        else:
            evs = parse_dataset(data.split("=", 1)[1], len(inputs)).evaluations()
        steps.append(
            TraceStep(section, locations, explicit, evs, int(q[2:]), acc == "acc=1", fired)
        )
    unroll = header.get("unrollings")
    return Trace(header["model"], kind, inputs, steps, None if unroll is None else int(unroll))


def parse_trace(blob: t.Union[bytes, str], format: str = "text") -> Trace:
    text = blob.decode("utf-8") if isinstance(blob, bytes) else blob
    if format == "text":
        return _parse_text(text)
    if format == "json":
        doc = json.loads(text)
        if doc.get("format") != "setmc-trace":
            raise ValueError("not a setmc JSON trace")
        steps = [
            TraceStep(
                s["section"], s["locations"], s["explicit"], [tuple(ev) for ev in s["data"]],
                s["buchi"], s["accepting"], s["fired"],
            )
            for s in doc["steps"]
        ]
        return Trace(doc["model"], doc["kind"], doc["inputs"], steps, doc["unrollings"])
    raise ValueError(f"unknown trace format {format!r}")


def replay(run: t.Union[Lasso, ConcreteRun, NarrowedLasso], ts: t.Any) -> list[str]:
    """Check each recorded edge against ``ts.successors``; returns problems."""
    problems = []
    for i, s in enumerate(run.states):
        j = run.succ(i)
        target = run.states[j]
        found = [e for succ, e in ts.successors(s) if succ == target]
        if not found:
            problems.append(f"state {i} has no successor equal to state {j}")
        elif run.edges[i] not in found:
            problems.append(f"edge {i} annotation does not match")
    return problems


def ap_word(run: t.Union[ConcreteRun, Lasso], ts: t.Any) -> tuple[list[frozenset[int]], list[frozenset[int]]]:
    """Proposition valuations along a concrete run, split into stem and cycle."""
    letters = []
    for s in run.states:
        ev = s.data.evaluations()[0]
        letters.append(ts.cm.ap_valuation(s.control, ev))
    return letters[: run.loop_start], letters[run.loop_start :]


__all__ = [
    "ConcreteRun", "EngineError", "Move", "NarrowedLasso", "SymbolicOnly", "SystemStep", "Trace",
    "TraceStep", "ap_word", "build_trace", "explicit_view", "symbolic_view", "check_narrowed", "concretize", "default_unroll_limit",
    "format_dataset", "narrow", "parse_dataset", "parse_trace", "replay", "serialize_trace",
]
