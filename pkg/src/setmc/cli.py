"""Command-line interface: ``check``, ``gen-peterson`` and ``bench``."""

from __future__ import annotations

import argparse
import csv
import dataclasses as d
import io
import logging
import sys
import time
import typing as t
from pathlib import Path

from . import __version__
from .counterexample import (
    ConcreteRun,
    EngineError,
    SymbolicOnly,
    concretize,
    narrow,
    serialize_trace,
)
from .cycledetect import ALGORITHMS, DEFAULT_MAX_STORE_BYTES, SearchTimeout, StoreCapacityError, Verdict
from .explore import VerificationError, make_product
from .lang import ModelError, parse_bool_expr, parse_model
from .lang.syntax import Model
from .ltl import LtlSyntaxError, bind_aps, ltl_to_buchi, negate, parse_ltl
from .multistate import DEFAULT_EVAL_CAP, CapacityError
from .peterson import generate_peterson

log = logging.getLogger("setmc")

EXIT_HOLDS, EXIT_VIOLATED, EXIT_ERROR = 0, 1, 2

STATS_FIELDS = [
    "model", "r", "mode", "algorithm", "states", "transitions", "iterations",
    "wall_time", "peak_store_bytes", "verdict", "note",
]


@d.dataclass
class RunConfig:
    model_path: str
    ltl: t.Optional[str] = None
    aps: list[tuple[str, str]] = d.field(default_factory=list)
    property_name: t.Optional[str] = None
    mode: str = "sym"
    algorithm: str = "ndfs"
    max_store_bytes: int = DEFAULT_MAX_STORE_BYTES
    max_evals: int = DEFAULT_EVAL_CAP
    trace_path: t.Optional[str] = None
    concrete_trace_path: t.Optional[str] = None
    trace_format: str = "text"
    stats_path: t.Optional[str] = None
    self_loop_deadlocks: bool = False
    timeout: t.Optional[float] = None
    model_text: t.Optional[str] = None  # overrides reading model_path

    def __post_init__(self) -> None:
        if self.mode not in ("sym", "exp"):
            raise ValueError(f"mode must be sym or exp, not {self.mode!r}")
        if self.algorithm not in ALGORITHMS:
            raise ValueError(f"algorithm must be one of {sorted(ALGORITHMS)}, not {self.algorithm!r}")


@d.dataclass
class StatsRow:
    model: str
    r: t.Optional[int]
    mode: str
    algorithm: str
    states: int = 0
    transitions: int = 0
    iterations: int = 0
    wall_time: float = 0.0
    peak_store_bytes: int = 0
    verdict: str = "error"
    note: str = ""

    def as_csv(self) -> dict[str, t.Any]:
        row = d.asdict(self)
        row["r"] = "" if self.r is None else self.r
        row["wall_time"] = f"{self.wall_time:.6f}"
        return row


def write_stats(rows: t.Sequence[StatsRow], out: t.TextIO) -> None:
    w = csv.DictWriter(out, fieldnames=STATS_FIELDS, lineterminator="\n")
    w.writeheader()
    for row in rows:
        w.writerow(row.as_csv())


@d.dataclass
class CheckResult:
    status: int
    row: StatsRow
    verdict: t.Optional[Verdict] = None
    message: str = ""
    product: t.Any = None
    narrowed: t.Any = None
    concrete: t.Any = None


def _load_property(model: Model, cfg: RunConfig) -> tuple[str, dict[str, t.Any]]:
    bindings: dict[str, t.Any] = {}
    formula = None
    if model.properties and (cfg.ltl is None or cfg.property_name is not None):
        prop = model.property(cfg.property_name)
        bindings.update(prop.ap_bindings)
        formula = prop.formula
    elif model.properties:
        # a formula given on the command line may reuse any declared proposition
        for prop in model.properties:
            for name, expr in prop.aps:
                bindings.setdefault(name, expr)
    for name, text in cfg.aps:
        bindings[name] = parse_bool_expr(text, model)
    if cfg.ltl is not None:
        formula = cfg.ltl
        if formula.startswith("@"):
            formula = Path(formula[1:]).read_text(encoding="utf-8").strip()
    if formula is None:
        raise ModelError("no property: give --ltl or add a #property block")
    return formula, bindings


def run_check(cfg: RunConfig, r: t.Optional[int] = None, out: t.Optional[t.TextIO] = None) -> CheckResult:
    """Parse, translate the negated property, search, and report."""
    out = out or sys.stdout
    row = StatsRow(Path(cfg.model_path).stem, r, cfg.mode, cfg.algorithm)
    result = CheckResult(EXIT_ERROR, row)
    try:
        text = cfg.model_text if cfg.model_text is not None else Path(cfg.model_path).read_text(encoding="utf-8")
        model = parse_model(text)
        row.model = model.name
        for w in model.warnings:
            log.warning("%s", w)
        formula, bindings = _load_property(model, cfg)
        aps = bind_aps(bindings)
        automaton = ltl_to_buchi(negate(parse_ltl(formula, bindings)))
        ts = make_product(
            cfg.mode, model, automaton, aps,
            eval_cap=cfg.max_evals, self_loop_deadlocks=cfg.self_loop_deadlocks,
        )
        result.product = ts
        start = time.perf_counter()
        verdict = ALGORITHMS[cfg.algorithm](ts, max_store_bytes=cfg.max_store_bytes, timeout=cfg.timeout)
        result.verdict = verdict
        st = verdict.stats
        row.states, row.transitions, row.iterations = st.states, st.transitions, st.iterations
        row.peak_store_bytes = st.peak_store_bytes
        row.wall_time = time.perf_counter() - start
        row.verdict = "holds" if verdict.holds else "violated"
        print(
            f"{row.verdict}: {model.name} [{cfg.mode}/{cfg.algorithm}] "
            f"states={st.states} transitions={st.transitions} time={row.wall_time:.3f}s",
            file=out,
        )
        if verdict.holds:
            result.status = EXIT_HOLDS
        else:
            result.status = EXIT_VIOLATED
            _report_witness(cfg, result, out)
    except SearchTimeout as err:
        _fill_failed(row, err.stats, "timeout")
        result.message = f"search: {err}"
    except StoreCapacityError as err:
        _fill_failed(row, err.stats, "capacity")
        result.message = f"search: {err}"
    except (ModelError, LtlSyntaxError) as err:
        result.message = f"{'model' if isinstance(err, ModelError) else 'ltl'}: {err}"
        row.note = "input"
    except CapacityError as err:
        result.message = f"multistate: {err}"
        row.note = "capacity"
    except VerificationError as err:
        result.message = f"explore: {err}"
        if err.state is not None:
            result.message += f" at {err.state.control} with {err.state.data!r}"
        row.note = "verification"
    except (EngineError, OSError, KeyError, ValueError) as err:
        result.message = f"{type(err).__name__}: {err}"
        row.note = "internal" if isinstance(err, EngineError) else "input"
    if result.status == EXIT_ERROR:
        row.verdict = "error"
        print(f"error: {result.message}", file=out)
    if cfg.stats_path:
        with open(cfg.stats_path, "w", encoding="utf-8", newline="") as fh:
            write_stats([row], fh)
    return result


def _fill_failed(row: StatsRow, stats: t.Any, note: str) -> None:
    row.states, row.transitions = stats.states, stats.transitions
    row.peak_store_bytes, row.wall_time = stats.peak_store_bytes, stats.wall_time
    row.note = note


def _report_witness(cfg: RunConfig, result: CheckResult, out: t.TextIO) -> None:
    ts = result.product
    lasso = result.verdict.witness
    nl = narrow(lasso, ts)
    result.narrowed = nl
    print(f"witness: stem {lasso.loop_start}, cycle {len(lasso.states) - lasso.loop_start}", file=out)
    if cfg.trace_path:
        Path(cfg.trace_path).write_bytes(serialize_trace(nl, ts, cfg.trace_format))
    if cfg.concrete_trace_path:
        cr = concretize(nl, ts)
        result.concrete = cr
        if isinstance(cr, ConcreteRun):
            Path(cfg.concrete_trace_path).write_bytes(serialize_trace(cr, ts, cfg.trace_format))
            print(f"concrete run: cycle unrolled {cr.unrollings} time(s)", file=out)
        else:
            assert isinstance(cr, SymbolicOnly)
            print(f"concrete run: symbolic only (unroll limit {cr.unroll_limit} reached)", file=out)


def run_bench(
    r_list: t.Sequence[int],
    modes: t.Sequence[str],
    algorithm: str = "ndfs",
    *,
    timeout: float = 300.0,
    property_name: str = "liveness",
    max_store_bytes: int = DEFAULT_MAX_STORE_BYTES,
    procs: int = 2,
    out: t.Optional[t.TextIO] = None,
) -> list[StatsRow]:
    """One run per (r, mode) on the generated Peterson model; failures are
    recorded in their row and the remaining runs continue."""
    rows = []
    for r in r_list:
        text = generate_peterson(r, procs)
        for mode in modes:
            cfg = RunConfig(
                f"peterson_{r}.cdve", property_name=property_name, mode=mode, algorithm=algorithm,
                max_store_bytes=max_store_bytes, timeout=timeout, model_text=text,
            )
            rows.append(run_check(cfg, r=r, out=out).row)
    return rows


def _int_list(text: str) -> list[int]:
    return [int(x) for x in text.split(",") if x.strip()]


def _ap_pair(text: str) -> tuple[str, str]:
    name, sep, expr = text.partition("=")
    if not sep:
        name, sep, expr = text.partition(":")
    if not sep or not name.strip():
        raise argparse.ArgumentTypeError(f"expected name=expr, got {text!r}")
    return name.strip(), expr.strip()


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="setmc", description="Set-based LTL model checker.")
    p.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="command", required=True)

    c = sub.add_parser("check", help="check a model against an LTL property")
    c.add_argument("model")
    c.add_argument("--ltl", help="formula, or @file; defaults to the model's first #property")
    c.add_argument("--property", dest="property_name", help="name of a #property block")
    c.add_argument("--ap", action="append", type=_ap_pair, default=[], metavar="NAME=EXPR")
    c.add_argument("--mode", choices=["sym", "exp"], default="sym")
    c.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="ndfs")
    c.add_argument("--trace", dest="trace_path")
    c.add_argument("--concrete-trace", dest="concrete_trace_path")
    c.add_argument("--trace-format", choices=["text", "json"], default="text")
    c.add_argument("--stats", dest="stats_path")
    c.add_argument("--max-store-bytes", type=int, default=DEFAULT_MAX_STORE_BYTES)
    c.add_argument("--max-evals", type=int, default=DEFAULT_EVAL_CAP)
    c.add_argument("--self-loop-deadlocks", action="store_true")
    c.add_argument("--timeout", type=float)

    g = sub.add_parser("gen-peterson", help="write the Peterson benchmark model")
    g.add_argument("--r", type=int, required=True)
    g.add_argument("--procs", type=int, default=2)
    g.add_argument("-o", "--output", default="-")

    b = sub.add_parser("bench", help="run the Peterson benchmark and write CSV")
    b.add_argument("--r", type=_int_list, default=[])
    b.add_argument("--modes", type=lambda s: [m for m in s.split(",") if m], default=["sym", "exp"])
    b.add_argument("--algorithm", choices=sorted(ALGORITHMS), default="ndfs")
    b.add_argument("--property", dest="property_name", default="liveness")
    b.add_argument("--procs", type=int, default=2)
    b.add_argument("--timeout", type=float, default=300.0)
    b.add_argument("--max-store-bytes", type=int, default=DEFAULT_MAX_STORE_BYTES)
    b.add_argument("-o", "--output", default="-")
    return p


def _write_text(path: str, text: str) -> None:
    if path == "-":
        sys.stdout.write(text)
    else:
        Path(path).write_text(text, encoding="utf-8")


def main(argv: t.Optional[t.Sequence[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(levelname)s: %(message)s")
    if args.command == "check":
        cfg = RunConfig(
            args.model, ltl=args.ltl, aps=args.ap, property_name=args.property_name, mode=args.mode,
            algorithm=args.algorithm, max_store_bytes=args.max_store_bytes, max_evals=args.max_evals,
            trace_path=args.trace_path, concrete_trace_path=args.concrete_trace_path,
            trace_format=args.trace_format, stats_path=args.stats_path,
            self_loop_deadlocks=args.self_loop_deadlocks, timeout=args.timeout,
        )
        return run_check(cfg).status
    if args.command == "gen-peterson":
        try:
            text = generate_peterson(args.r, args.procs)
        except ValueError as err:
            print(f"error: {err}", file=sys.stderr)
            return EXIT_ERROR
        _write_text(args.output, text)
        return 0
    for mode in args.modes:
        if mode not in ("sym", "exp"):
            print(f"error: unknown mode {mode!r}", file=sys.stderr)
            return EXIT_ERROR
    progress = sys.stderr if args.output == "-" else sys.stdout
    rows = run_bench(
        args.r, args.modes, args.algorithm, timeout=args.timeout, property_name=args.property_name,
        max_store_bytes=args.max_store_bytes, procs=args.procs, out=progress,
    )
    buf = io.StringIO()
    write_stats(rows, buf)
    _write_text(args.output, buf.getvalue())
    return 0


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
