"""Shared test helpers: model loading, a brute-force product interpreter built
only on the reference expression evaluator, and a random model generator."""

from __future__ import annotations

import itertools
import random
import typing as t
from collections import deque
from importlib import resources

from setmc.explore import Move, SystemStep, make_product
from setmc.lang import Context, eval_expr, parse_model
from setmc.lang.syntax import Model
from setmc.ltl import (
    AP,
    FALSE,
    TRUE,
    And,
    BuchiAutomaton,
    LassoWord,
    Next,
    Not,
    Until,
    bind_aps,
    ltl_to_buchi,
    mk_always,
    mk_eventually,
    mk_implies,
    mk_not,
    mk_or,
    negate,
    parse_ltl,
)

MODELS = ["example2", "example3", "figure1", "no_subsumption"]


def model_text(name: str) -> str:
    return resources.files("setmc.models").joinpath(f"{name}.cdve").read_text(encoding="utf-8")


def setup(text: str, prop: t.Optional[str] = None, ltl: t.Optional[str] = None):
    """(model, automaton of the negated property, propositions)."""
    model = parse_model(text)
    p = model.property(prop)
    bindings = p.ap_bindings
    automaton = ltl_to_buchi(negate(parse_ltl(ltl or p.formula, bindings)))
    return model, automaton, bind_aps(bindings)


def products(text: str, prop: t.Optional[str] = None, **kw: t.Any):
    model, automaton, aps = setup(text, prop)
    kw.setdefault("self_loop_deadlocks", True)
    return (
        make_product("sym", model, automaton, aps, **kw),
        make_product("exp", model, automaton, aps, **kw),
    )


# --- brute-force product semantics ---------------------------------------------

Concrete = tuple[tuple[int, ...], tuple[int, ...], tuple[int, ...], int]  # locs, explicit, inputs, buchi


class Oracle:
    """Unreduced product semantics interpreted directly from the AST."""

    def __init__(self, model: Model, automaton: BuchiAutomaton, aps: t.Sequence[t.Any], stutter: bool = True):
        self.model = model
        self.automaton = automaton
        self.aps = {ap.ap_id: ap.expr for ap in aps}
        self.stutter = stutter

    def _holds(self, e: t.Any, locs, E, I) -> bool:
        return bool(eval_expr(e, Context(tuple(E), tuple(I), tuple(locs))))

    def system_steps(self, locs, E, I) -> list[tuple[SystemStep, tuple, tuple, tuple]]:
        m = self.model
        out = []
        for pi, proc in enumerate(m.processes):
            for ti, tr in enumerate(proc.transitions):
                if tr.source_index != locs[pi]:
                    continue
                if tr.sync is None:
                    pairs = [(SystemStep("local", pi, ti), [(pi, tr)])]
                elif tr.sync.direction == "send":
                    pairs = []
                    for qi, q in enumerate(m.processes):
                        if qi == pi:
                            continue
                        for rj, rt in enumerate(q.transitions):
                            if (
                                rt.source_index == locs[qi]
                                and rt.sync is not None
                                and rt.sync.direction == "recv"
                                and rt.sync.channel == tr.sync.channel
                            ):
                                pairs.append((SystemStep("sync", pi, ti, qi, rj), [(pi, tr), (qi, rt)]))
                else:
                    continue
                for step, parts in pairs:
                    if not all(self._holds(x.guard, locs, E, I) for _, x in parts):
                        continue
                    E2, I2, L2 = list(E), list(I), list(locs)
                    for _, x in parts:
                        for a in x.effects:
                            v = eval_expr(a.expr, Context(tuple(E2), tuple(I2), tuple(locs)))
                            slot = a.target.slot
                            if slot.kind == "input":
                                I2[slot.index] = v & slot.mask
                            else:
                                E2[slot.index] = v & slot.mask
                    for p, x in parts:
                        L2[p] = x.target_index
                    out.append((step, tuple(L2), tuple(E2), tuple(I2)))
        if not out:
            if not self.stutter:
                raise RuntimeError("deadlock")
            out.append((SystemStep("stutter"), tuple(locs), tuple(E), tuple(I)))
        return out

    def property_steps(self, q: int, locs, E, I) -> list[tuple[int, int]]:
        out = []
        for idx, tr in enumerate(self.automaton.transitions):
            if tr.source != q:
                continue
            if all(self._holds(self.aps[i], locs, E, I) for i in tr.label.pos) and not any(
                self._holds(self.aps[i], locs, E, I) for i in tr.label.neg
            ):
                out.append((idx, tr.target))
        return out

    def initial(self) -> list[Concrete]:
        m = self.model
        locs = tuple(p.location_index(p.initial) for p in m.processes)
        E = tuple(v.init for _, v in m.explicit_vars)
        ranges = [range(v.lo, v.hi + 1) for v in m.input_vars]
        out = []
        for I in itertools.product(*ranges):
            for _, q in self.property_steps(self.automaton.initial, locs, E, I):
                out.append((locs, E, tuple(I), q))
        return sorted(set(out))

    def successors(self, s: Concrete) -> list[tuple[Concrete, Move]]:
        locs, E, I, q = s
        out = []
        for step, L2, E2, I2 in self.system_steps(locs, E, I):
            for idx, q2 in self.property_steps(q, L2, E2, I2):
                out.append(((L2, E2, I2, q2), Move(step, idx)))
        return out

    def reachable(self, limit: int = 200_000) -> set[Concrete]:
        seen = set(self.initial())
        queue = deque(seen)
        while queue:
            s = queue.popleft()
            for t2, _ in self.successors(s):
                if t2 not in seen:
                    seen.add(t2)
                    queue.append(t2)
                    if len(seen) > limit:
                        raise RuntimeError("oracle state limit")
        return seen


def grouped_oracle(oracle: Oracle, ms) -> dict:
    """control -> (set of evaluations, set of moves) over every member of ``ms``."""
    c = ms.control
    groups: dict = {}
    for ev in ms.data.evaluations():
        for (L2, E2, I2, q2), move in oracle.successors((c.locations, c.explicit, ev, c.buchi)):
            key = (L2, E2, q2)
            g = groups.setdefault(key, (set(), set()))
            g[0].add(I2)
            g[1].add(move)
    return groups


def grouped_engine(succs) -> dict:
    out = {}
    for s, edge in succs:
        key = (s.control.locations, s.control.explicit, s.control.buchi)
        assert key not in out, "two successors share a control part"
        out[key] = (set(s.data.evaluations()), set(edge.moves))
    return out


def sym_reachable(ts, limit: int = 200_000):
    """All multi-states reachable in ``ts`` (breadth first)."""
    init = ts.initial_states()
    seen = {ts.encode(s): s for s in init}
    queue = deque(init)
    while queue:
        s = queue.popleft()
        for t2, _ in ts.successors(s):
            k = ts.encode(t2)
            if k not in seen:
                seen[k] = t2
                queue.append(t2)
                if len(seen) > limit:
                    raise RuntimeError("state limit")
    return list(seen.values())


# --- random models --------------------------------------------------------------

FORMULAS = [
    "G F p", "F G p", "G (p -> F q)", "p U q", "X p", "G p", "F p", "G (p -> X q)",
    "F (p && G q)", "G F p -> G F q", "!(p U q) || F G p", "X X p",
]


class RandomModel:
    """Small random ``.cdve`` models: at most 3 processes, 2 input variables
    with domains of at most 16 values, constant nonzero divisors."""

    def __init__(self, seed: int):
        self.rng = random.Random(seed)
        self.seed = seed

    def _int_expr(self, names: list[str], depth: int = 0) -> str:
        rng = self.rng
        if depth >= 2 or rng.random() < 0.4:
            if names and rng.random() < 0.75:
                return rng.choice(names)
            return str(rng.randint(0, 5))
        op = rng.choice(["+", "-", "*", "/", "%", "+", "-"])
        left = self._int_expr(names, depth + 1)
        if op in "/%":
            return f"({left} {op} {rng.randint(1, 4)})"
        return f"({left} {op} {self._int_expr(names, depth + 1)})"

    def _bool_expr(self, names: list[str], locs: list[str]) -> str:
        rng = self.rng
        if locs and rng.random() < 0.2:
            return rng.choice(locs)
        cmp = rng.choice(["<", "<=", ">", ">=", "==", "!="])
        e = f"{self._int_expr(names, 1)} {cmp} {self._int_expr(names, 1)}"
        if rng.random() < 0.25:
            other = f"{self._int_expr(names, 1)} {rng.choice(['<', '==', '>'])} {rng.randint(0, 8)}"
            e = f"({e}) {rng.choice(['&&', '||'])} ({other})"
        if rng.random() < 0.1:
            e = f"!({e})"
        return e

    def text(self) -> str:
        rng = self.rng
        n_inputs = rng.randint(0, 2)
        n_explicit = rng.randint(0, 2)
        n_procs = rng.randint(1, 3)
        lines = [f"system rand{self.seed};", ""]
        inputs = []
        for i in range(n_inputs):
            lo = rng.randint(0, 6)
            size = rng.randint(1, 16 if n_inputs == 1 else 8)
            inputs.append((f"in{i}", lo, lo + size - 1))
            lines.append(f"input byte in{i} = {lo}..{lo + size - 1};")
        explicit = [f"g{i}" for i in range(n_explicit)]
        for g in explicit:
            lines.append(f"byte {g} = {rng.randint(0, 2)};")
        use_chan = n_procs >= 2 and rng.random() < 0.5
        if use_chan:
            lines.append("channel ch;")
        names = [n for n, _, _ in inputs] + explicit
        proc_locs = {f"P{i}": [f"s{j}" for j in range(rng.randint(2, 3))] for i in range(n_procs)}
        loc_preds = [f"{p}@{l}" for p, ls in proc_locs.items() for l in ls]
        for pi, (pname, locs) in enumerate(proc_locs.items()):
            lines += ["", f"process {pname} {{", "    state " + ", ".join(locs) + ";", f"    init {locs[0]};", "    trans"]
            trs = []
            for _ in range(rng.randint(2, 5)):
                src, dst = rng.choice(locs), rng.choice(locs)
                parts = []
                if rng.random() < 0.6:
                    parts.append(f"guard {self._bool_expr(names, loc_preds if rng.random() < 0.2 else [])};")
                if use_chan and rng.random() < 0.3:
                    parts.append(f"sync ch{'!' if pi % 2 == 0 else '?'};")
                effs = []
                for _ in range(rng.randint(0, 2)):
                    if not names:
                        break
                    target = rng.choice(names)
                    hi = next((h for n, _, h in inputs if n == target), 3)
                    mod = max(hi + 1, 2) if rng.random() < 0.8 else rng.randint(2, 16)
                    if rng.random() < 0.5:
                        rhs = f"{target} {rng.choice(['+', '*'])} {rng.randint(1, 3)}"
                    else:
                        rhs = self._int_expr(names, 1)
                    # keep stored values in 0..mod-1 so domains stay small
                    effs.append(f"{target} = (({rhs}) % {mod} + {mod}) % {mod}")
                if effs:
                    parts.append("effect " + ", ".join(effs) + ";")
                trs.append(f"        {src} -> {dst} {{ " + " ".join(parts) + " }")
            lines.append(",\n".join(trs) + ";")
            lines.append("}")
        p = self._bool_expr(names, loc_preds)
        q = self._bool_expr(names, loc_preds)
        formula = rng.choice(FORMULAS)
        lines += ["", "#property random {", f"    ap p = {p};", f"    ap q = {q};", f'    ltl "{formula}";', "}"]
        return "\n".join(lines) + "\n"


def random_models(count: int, start: int = 0) -> t.Iterator[tuple[int, str]]:
    for seed in range(start, start + count):
        yield seed, RandomModel(seed).text()


# --- LTL formulae and lasso words ----------------------------------------------

P, Q = AP(0, "p"), AP(1, "q")
LETTERS = [frozenset(s) for s in ([], [0], [1], [0, 1])]


def word(stem, cycle):
    return LassoWord(tuple(frozenset(x) for x in stem), tuple(frozenset(x) for x in cycle))


def all_lassos(max_stem=2, max_cycle=2):
    for ls in range(max_stem + 1):
        for lc in range(1, max_cycle + 1):
            for stem in itertools.product(LETTERS, repeat=ls):
                for cycle in itertools.product(LETTERS, repeat=lc):
                    yield LassoWord(stem, cycle)


def formulas_with_ops(k, atoms=(P, Q, TRUE)):
    """Every desugared formula with exactly ``k`` operator nodes."""
    if k == 0:
        yield from atoms
        return
    for sub in formulas_with_ops(k - 1, atoms):
        yield Not(sub)
        yield Next(sub)
    for i in range(k):
        lefts = list(formulas_with_ops(i, atoms))
        rights = list(formulas_with_ops(k - 1 - i, atoms))
        for a in lefts:
            for b in rights:
                yield And(a, b)
                yield Until(a, b)


def random_formula(rng, depth):
    if depth == 0 or rng.random() < 0.25:
        return rng.choice([P, Q, P, Q, TRUE, FALSE])
    op = rng.choice(["!", "X", "F", "G", "&&", "||", "->", "U"])
    a = random_formula(rng, depth - 1)
    if op == "!":
        return mk_not(a)
    if op == "X":
        return Next(a)
    if op == "F":
        return mk_eventually(a)
    if op == "G":
        return mk_always(a)
    b = random_formula(rng, depth - 1)
    return {"&&": And, "||": mk_or, "->": mk_implies, "U": Until}[op](a, b)


def random_lasso(rng, max_stem=4, max_cycle=4):
    stem = [rng.choice(LETTERS) for _ in range(rng.randint(0, max_stem))]
    cycle = [rng.choice(LETTERS) for _ in range(rng.randint(1, max_cycle))]
    return LassoWord(tuple(stem), tuple(cycle))
