"""Recursive-descent parser and semantic analysis for ``.cdve`` models."""

from __future__ import annotations

import dataclasses as d
import typing as t

from .lexer import Token, TokenStream
from .syntax import (
    ARITH_OPS,
    BOOL_OPS,
    COMPARE_OPS,
    WIDTHS,
    Assignment,
    Binary,
    BoolLit,
    ChannelDecl,
    Expr,
    IntLit,
    LocPred,
    Model,
    ModelError,
    ProcessDef,
    PropertyDef,
    Slot,
    SyncSpec,
    TransitionDef,
    Unary,
    VarDecl,
    VarRef,
    mentions_location,
)

# binary operator precedence, loosest first
_LEVELS: tuple[tuple[str, ...], ...] = (
    ("||",),
    ("&&",),
    ("==", "!="),
    ("<", "<=", ">", ">="),
    ("+", "-"),
    ("*", "/", "%"),
)


class _Parser:
    def __init__(self, text: str) -> None:
        self.ts = TokenStream(text)
        # source positions for diagnostics raised during analysis
        self.positions: dict[int, tuple[int, int]] = {}

    # -- expressions --------------------------------------------------------

    def expr(self, level: int = 0) -> Expr:
        if level == len(_LEVELS):
            return self.unary()
        left = self.expr(level + 1)
        while self.ts.current.kind == "op" and self.ts.current.text in _LEVELS[level]:
            op = self.ts.current.text
            self.ts.pos += 1
            right = self.expr(level + 1)
            left = Binary(op, left, right)
        return left

    def unary(self) -> Expr:
        if self.ts.accept("-"):
            operand = self.unary()
            if isinstance(operand, IntLit):
                return IntLit(-operand.value)
            return Unary("-", operand)
        if self.ts.accept("!"):
            return Unary("!", self.unary())
        return self.primary()

    def primary(self) -> Expr:
        tok = self.ts.current
        if tok.kind == "int":
            self.ts.pos += 1
            return IntLit(int(tok.text))
        if tok.kind == "keyword" and tok.text in ("true", "false"):
            self.ts.pos += 1
            return BoolLit(tok.text == "true")
        if tok.kind == "ident":
            self.ts.pos += 1
            if self.ts.accept("@"):
                loc = self.ts.expect_kind("ident", "location name")
                return LocPred(tok.text, loc.text, pos=(tok.line, tok.column))
            return VarRef(tok.text, pos=(tok.line, tok.column))
        if self.ts.accept("("):
            e = self.expr()
            self.ts.expect(")")
            return e
        raise self.ts.error("expected expression")

    # -- declarations -------------------------------------------------------

    def var_decls(self, tok_input: t.Optional[Token]) -> list[VarDecl]:
        type_tok = self.ts.current
        if type_tok.text not in WIDTHS:
            raise self.ts.error("expected 'byte' or 'int'")
        self.ts.pos += 1
        width = WIDTHS[type_tok.text]
        out = []
        while True:
            name = self.ts.expect_kind("ident", "variable name")
            if tok_input is not None:
                self.ts.expect("=")
                lo = self.int_literal()
                self.ts.expect("..")
                hi = self.int_literal()
                if not 0 <= lo <= hi <= (1 << width) - 1:
                    raise ModelError(
                        f"input range {lo}..{hi} of {name.text!r} is empty or does not fit "
                        f"{type_tok.text}",
                        name.line,
                        name.column,
                    )
                out.append(VarDecl(name.text, width, "input", lo=lo, hi=hi))
            else:
                init = 0
                if self.ts.accept("="):
                    init = self.int_literal()
                    if self.ts.check(".."):
                        raise self.ts.error("ranges are only allowed on input variables")
                if not 0 <= init <= (1 << width) - 1:
                    raise ModelError(
                        f"initial value {init} of {name.text!r} does not fit {type_tok.text}",
                        name.line,
                        name.column,
                    )
                out.append(VarDecl(name.text, width, "explicit", init=init))
            self.positions[id(out[-1])] = (name.line, name.column)
            if not self.ts.accept(","):
                break
        self.ts.expect(";")
        return out

    def int_literal(self) -> int:
        neg = bool(self.ts.accept("-"))
        tok = self.ts.expect_kind("int", "integer literal")
        return -int(tok.text) if neg else int(tok.text)

    def transition(self) -> TransitionDef:
        src = self.ts.expect_kind("ident", "source location")
        self.ts.expect("->")
        dst = self.ts.expect_kind("ident", "target location")
        self.ts.expect("{")
        guard: Expr = BoolLit(True)
        sync = None
        effects: list[Assignment] = []
        if self.ts.accept("guard"):
            guard = self.expr()
            self.ts.expect(";")
        if self.ts.accept("sync"):
            chan = self.ts.expect_kind("ident", "channel name")
            if self.ts.accept("!"):
                direction = "send"
            elif self.ts.accept("?"):
                direction = "recv"
            else:
                raise self.ts.error("expected '!' or '?' after channel name")
            if not self.ts.check(";"):
                raise ModelError(
                    "value-passing channels are not supported", chan.line, chan.column
                )
            self.ts.expect(";")
            sync = SyncSpec(chan.text, direction)
        if self.ts.accept("effect"):
            while True:
                target = self.ts.expect_kind("ident", "assignment target")
                self.ts.expect("=")
                effects.append(
                    Assignment(VarRef(target.text, pos=(target.line, target.column)), self.expr())
                )
                if not self.ts.accept(","):
                    break
            self.ts.expect(";")
        self.ts.expect("}")
        tr = TransitionDef(src.text, dst.text, guard, tuple(effects), sync)
        self.positions[id(tr)] = (src.line, src.column)
        return tr

    def process(self) -> ProcessDef:
        name = self.ts.expect_kind("ident", "process name")
        self.ts.expect("{")
        local_vars: list[VarDecl] = []
        while self.ts.current.text in WIDTHS or self.ts.check("input"):
            tok_in = self.ts.accept("input")
            if tok_in is not None:
                raise ModelError(
                    "input variables may only be declared globally", tok_in.line, tok_in.column
                )
            local_vars.extend(self.var_decls(None))
        self.ts.expect("state")
        locations = [self.ts.expect_kind("ident", "location name")]
        while self.ts.accept(","):
            locations.append(self.ts.expect_kind("ident", "location name"))
        self.ts.expect(";")
        self.ts.expect("init")
        init = self.ts.expect_kind("ident", "initial location")
        self.ts.expect(";")
        transitions: list[TransitionDef] = []
        if self.ts.accept("trans"):
            transitions.append(self.transition())
            while self.ts.accept(","):
                transitions.append(self.transition())
            self.ts.expect(";")
        self.ts.expect("}")
        _check_unique(
            [loc.text for loc in locations], "location", [(loc.line, loc.column) for loc in locations]
        )
        proc = ProcessDef(
            name.text,
            tuple(local_vars),
            tuple(loc.text for loc in locations),
            init.text,
            tuple(transitions),
        )
        self.positions[id(proc)] = (name.line, name.column)
        return proc

    def property_block(self) -> PropertyDef:
        name = self.ts.expect_kind("ident", "property name")
        self.ts.expect("{")
        aps: list[tuple[str, Expr]] = []
        formula = None
        while self.ts.accept("ap"):
            ap = self.ts.expect_kind("ident", "proposition name")
            self.ts.expect("=")
            aps.append((ap.text, self.expr()))
            self.positions[id(aps[-1])] = (ap.line, ap.column)
            self.ts.expect(";")
        if self.ts.accept("ltl"):
            formula = self.ts.expect_kind("string", "quoted LTL formula").text[1:-1]
            self.ts.expect(";")
        self.ts.expect("}")
        prop = PropertyDef(name.text, tuple(aps), formula)
        self.positions[id(prop)] = (name.line, name.column)
        return prop

    def model(self) -> Model:
        name = "model"
        if self.ts.accept("system"):
            name = self.ts.expect_kind("ident", "system name").text
            self.ts.expect(";")
        global_vars: list[VarDecl] = []
        channels: list[ChannelDecl] = []
        while True:
            if self.ts.accept("channel"):
                while True:
                    tok = self.ts.expect_kind("ident", "channel name")
                    channels.append(ChannelDecl(tok.text))
                    self.positions[id(channels[-1])] = (tok.line, tok.column)
                    if not self.ts.accept(","):
                        break
                self.ts.expect(";")
            elif self.ts.current.text in WIDTHS and self.ts.current.kind == "keyword":
                global_vars.extend(self.var_decls(None))
            elif self.ts.check("input"):
                tok = self.ts.expect("input")
                global_vars.extend(self.var_decls(tok))
            else:
                break
        processes = []
        while self.ts.accept("process"):
            processes.append(self.process())
        properties = []
        while self.ts.accept("#property"):
            properties.append(self.property_block())
        if self.ts.current.kind != "eof":
            raise self.ts.error("expected declaration, 'process' or '#property'")
        if not processes:
            raise self.ts.error("a model needs at least one process")
        return Model(name, tuple(global_vars), tuple(channels), tuple(processes), tuple(properties))


# --- semantic analysis -------------------------------------------------------


class _Scope:
    def __init__(self, model: Model, process: t.Optional[ProcessDef]) -> None:
        self.model = model
        self.vars: dict[str, Slot] = {}
        n_expl = 0
        n_in = 0
        for v in model.global_vars:
            if v.is_input:
                self.vars[v.name] = Slot("input", n_in, v.width)
                n_in += 1
            else:
                self.vars[v.name] = Slot("explicit", n_expl, v.width)
                n_expl += 1
        for p in model.processes:
            if process is not None and p.name == process.name:
                for v in p.local_vars:
                    self.vars[v.name] = Slot("explicit", n_expl, v.width)
                    n_expl += 1
            else:
                n_expl += len(p.local_vars)


def _pos(e: t.Any) -> tuple[int, int]:
    return getattr(e, "pos", (0, 0))


def resolve_expr(e: Expr, scope: _Scope) -> Expr:
    if isinstance(e, VarRef):
        slot = scope.vars.get(e.name)
        if slot is None:
            raise ModelError(f"unresolved variable {e.name!r}", *_pos(e))
        return VarRef(e.name, slot, e.pos)
    if isinstance(e, LocPred):
        model = scope.model
        try:
            pi = model.process_index(e.process)
        except KeyError:
            raise ModelError(f"unresolved process {e.process!r}", *_pos(e)) from None
        proc = model.processes[pi]
        if e.location not in proc.locations:
            raise ModelError(
                f"process {e.process!r} has no location {e.location!r}", *_pos(e)
            )
        return LocPred(e.process, e.location, pi, proc.location_index(e.location), e.pos)
    if isinstance(e, Unary):
        return Unary(e.op, resolve_expr(e.operand, scope))
    if isinstance(e, Binary):
        return Binary(e.op, resolve_expr(e.left, scope), resolve_expr(e.right, scope))
    return e


def expr_type(e: Expr) -> str:
    """Type-check ``e`` and return ``"int"`` or ``"bool"``."""
    if isinstance(e, (IntLit, VarRef)):
        return "int"
    if isinstance(e, (BoolLit, LocPred)):
        return "bool"
    if isinstance(e, Unary):
        want = "int" if e.op == "-" else "bool"
        _require(e.operand, want, e.op)
        return want
    if isinstance(e, Binary):
        if e.op in ARITH_OPS:
            _require(e.left, "int", e.op)
            _require(e.right, "int", e.op)
            return "int"
        if e.op in COMPARE_OPS:
            _require(e.left, "int", e.op)
            _require(e.right, "int", e.op)
            return "bool"
        if e.op in BOOL_OPS:
            _require(e.left, "bool", e.op)
            _require(e.right, "bool", e.op)
            return "bool"
    raise ModelError(f"unknown expression {e!r}")


def _require(e: Expr, want: str, op: str) -> None:
    got = expr_type(e)
    if got != want:
        line, col = _first_pos(e)
        raise ModelError(f"type mismatch: operator {op!r} expects {want}, got {got}", line, col)


def _first_pos(e: Expr) -> tuple[int, int]:
    if isinstance(e, (VarRef, LocPred)):
        return e.pos
    if isinstance(e, Unary):
        return _first_pos(e.operand)
    if isinstance(e, Binary):
        return _first_pos(e.left)
    return (0, 0)


def check_bool(e: Expr, what: str) -> None:
    if expr_type(e) != "bool":
        line, col = _first_pos(e)
        raise ModelError(f"{what} must be a Boolean expression", line, col)


def check_int(e: Expr, what: str) -> None:
    if expr_type(e) != "int":
        line, col = _first_pos(e)
        raise ModelError(f"{what} must be an integer expression", line, col)


def _check_unique(names: t.Iterable[str], what: str, positions: t.Iterable[tuple[int, int]]) -> None:
    seen: set[str] = set()
    for name, pos in zip(names, positions):
        if name in seen:
            raise ModelError(f"duplicate {what} {name!r}", *pos)
        seen.add(name)


def analyze(raw: Model, positions: t.Optional[dict[int, tuple[int, int]]] = None) -> Model:
    """Resolve names, type-check and validate a raw model."""
    pos = positions or {}

    def at(obj: t.Any) -> tuple[int, int]:
        return pos.get(id(obj), (0, 0))

    _check_unique([v.name for v in raw.global_vars], "variable", [at(v) for v in raw.global_vars])
    _check_unique([c.name for c in raw.channels], "channel", [at(c) for c in raw.channels])
    _check_unique([p.name for p in raw.processes], "process", [at(p) for p in raw.processes])
    _check_unique([p.name for p in raw.properties], "property", [at(p) for p in raw.properties])
    global_names = {v.name for v in raw.global_vars}
    channel_names = {c.name for c in raw.channels}
    warnings: list[str] = []

    processes = []
    for proc in raw.processes:
        _check_unique([v.name for v in proc.local_vars], "variable", [at(v) for v in proc.local_vars])
        for v in proc.local_vars:
            if v.name in global_names:
                raise ModelError(f"local variable {v.name!r} shadows a global", *at(v))
        if proc.initial not in proc.locations:
            raise ModelError(f"initial location {proc.initial!r} of {proc.name!r} is not declared", *at(proc))
        scope = _Scope(raw, proc)
        transitions = []
        for tr in proc.transitions:
            where = at(tr)
            for end in (tr.source, tr.target):
                if end not in proc.locations:
                    raise ModelError(f"process {proc.name!r} has no location {end!r}", *where)
            guard = resolve_expr(tr.guard, scope)
            check_bool(guard, "guard")
            if mentions_location(guard):
                warnings.append(
                    f"{where[0]}:{where[1]}: guard of {proc.name}.{tr.source}->{tr.target} "
                    "references a process location"
                )
            effects = []
            for asgn in tr.effects:
                target = resolve_expr(asgn.target, scope)
                expr = resolve_expr(asgn.expr, scope)
                check_int(expr, f"value assigned to {asgn.target.name!r}")
                effects.append(Assignment(t.cast(VarRef, target), expr))
            if tr.sync is not None and tr.sync.channel not in channel_names:
                raise ModelError(f"undeclared channel {tr.sync.channel!r}", *where)
            transitions.append(
                d.replace(
                    tr,
                    guard=guard,
                    effects=tuple(effects),
                    source_index=proc.location_index(tr.source),
                    target_index=proc.location_index(tr.target),
                )
            )
        processes.append(d.replace(proc, transitions=tuple(transitions)))

    model = d.replace(raw, processes=tuple(processes))
    properties = []
    global_scope = _Scope(model, None)
    for prop in raw.properties:
        _check_unique([n for n, _ in prop.aps], "proposition", [at(a) for a in prop.aps])
        aps = []
        for name, e in prop.aps:
            r = resolve_expr(e, global_scope)
            check_bool(r, f"proposition {name!r}")
            aps.append((name, r))
        properties.append(PropertyDef(prop.name, tuple(aps), prop.formula))
    return d.replace(model, properties=tuple(properties), warnings=tuple(warnings))


def parse_model(text: str) -> Model:
    """Parse and analyze a ``.cdve`` model.

    Raises :class:`ModelError` with line/column on any syntax or semantic error.
    """
    p = _Parser(text)
    raw = p.model()
    return analyze(raw, p.positions)


def parse_expr(text: str, model: Model, process: t.Optional[str] = None) -> Expr:
    """Parse a standalone expression resolved against ``model``'s global scope
    (or a process scope if ``process`` is given)."""
    p = _Parser(text)
    e = p.expr()
    if p.ts.current.kind != "eof":
        raise p.ts.error("unexpected trailing input")
    proc = model.processes[model.process_index(process)] if process else None
    r = resolve_expr(e, _Scope(model, proc))
    expr_type(r)
    return r


def parse_bool_expr(text: str, model: Model) -> Expr:
    e = parse_expr(text, model)
    check_bool(e, "proposition")
    return e
