"""Abstract syntax of the ``.cdve`` modelling language.

Expressions are immutable dataclasses.  After semantic analysis every
:class:`VarRef` carries a resolved :class:`Slot` and every :class:`LocPred`
carries process/location indices, so evaluation never looks names up.
"""

from __future__ import annotations

import dataclasses as d
import typing as t


class ModelError(Exception):
    """Diagnostic raised by the front end, carrying a source position."""

    def __init__(self, message: str, line: int = 0, column: int = 0) -> None:
        self.message = message
        self.line = line
        self.column = column
        where = f"{line}:{column}: " if line else ""
        super().__init__(f"{where}{message}")


class EvalError(Exception):
    """Raised when an expression cannot be evaluated (division by zero)."""

    def __init__(self, message: str, expr: "Expr", evaluation: t.Optional[tuple] = None) -> None:
        self.expr = expr
        self.evaluation = evaluation
        super().__init__(message)


WIDTHS = {"byte": 8, "int": 16}


@d.dataclass(frozen=True)
class Slot:
    """Storage location of a variable inside a state.

    ``kind`` is ``"explicit"`` (index into the explicit value vector of the
    control part) or ``"input"`` (index into an evaluation).
    """

    kind: str
    index: int
    width: int

    @property
    def mask(self) -> int:
        return (1 << self.width) - 1


# --- expressions -------------------------------------------------------------


@d.dataclass(frozen=True)
class IntLit:
    value: int


@d.dataclass(frozen=True)
class BoolLit:
    value: bool


@d.dataclass(frozen=True)
class VarRef:
    name: str
    slot: t.Optional[Slot] = d.field(default=None, compare=False)
    pos: tuple[int, int] = d.field(default=(0, 0), compare=False)


@d.dataclass(frozen=True)
class LocPred:
    process: str
    location: str
    proc_index: int = d.field(default=-1, compare=False)
    loc_index: int = d.field(default=-1, compare=False)
    pos: tuple[int, int] = d.field(default=(0, 0), compare=False)


@d.dataclass(frozen=True)
class Unary:
    op: str  # "-" or "!"
    operand: "Expr"


@d.dataclass(frozen=True)
class Binary:
    op: str
    left: "Expr"
    right: "Expr"


Expr = t.Union[IntLit, BoolLit, VarRef, LocPred, Unary, Binary]

ARITH_OPS = frozenset({"+", "-", "*", "/", "%"})
COMPARE_OPS = frozenset({"<", "<=", ">", ">=", "==", "!="})
BOOL_OPS = frozenset({"&&", "||"})


def expr_vars(e: Expr) -> t.Iterator[VarRef]:
    """Yield every variable reference in ``e`` (pre-order)."""
    if isinstance(e, VarRef):
        yield e
    elif isinstance(e, Unary):
        yield from expr_vars(e.operand)
    elif isinstance(e, Binary):
        yield from expr_vars(e.left)
        yield from expr_vars(e.right)


def mentions_input(e: Expr) -> bool:
    return any(v.slot is not None and v.slot.kind == "input" for v in expr_vars(e))


def mentions_location(e: Expr) -> bool:
    if isinstance(e, LocPred):
        return True
    if isinstance(e, Unary):
        return mentions_location(e.operand)
    if isinstance(e, Binary):
        return mentions_location(e.left) or mentions_location(e.right)
    return False


# --- declarations ------------------------------------------------------------


@d.dataclass(frozen=True)
class VarDecl:
    name: str
    width: int
    kind: str  # "explicit" or "input"
    init: int = 0
    lo: int = 0
    hi: int = 0

    @property
    def type_name(self) -> str:
        return "byte" if self.width == 8 else "int"

    @property
    def is_input(self) -> bool:
        return self.kind == "input"

    @property
    def domain_size(self) -> int:
        return self.hi - self.lo + 1


@d.dataclass(frozen=True)
class ChannelDecl:
    name: str


@d.dataclass(frozen=True)
class Assignment:
    target: VarRef
    expr: Expr


@d.dataclass(frozen=True)
class SyncSpec:
    channel: str
    direction: str  # "send" or "recv"


@d.dataclass(frozen=True)
class TransitionDef:
    source: str
    target: str
    guard: Expr = BoolLit(True)
    effects: tuple[Assignment, ...] = ()
    sync: t.Optional[SyncSpec] = None
    source_index: int = d.field(default=-1, compare=False)
    target_index: int = d.field(default=-1, compare=False)


@d.dataclass(frozen=True)
class ProcessDef:
    name: str
    local_vars: tuple[VarDecl, ...]
    locations: tuple[str, ...]
    initial: str
    transitions: tuple[TransitionDef, ...]

    def location_index(self, name: str) -> int:
        return self.locations.index(name)


@d.dataclass(frozen=True)
class PropertyDef:
    """A ``#property`` block: named atomic propositions plus an optional formula."""

    name: str
    aps: tuple[tuple[str, Expr], ...]
    formula: t.Optional[str] = None

    @property
    def ap_bindings(self) -> dict[str, Expr]:
        return dict(self.aps)


@d.dataclass(frozen=True)
class Model:
    name: str
    global_vars: tuple[VarDecl, ...]
    channels: tuple[ChannelDecl, ...]
    processes: tuple[ProcessDef, ...]
    properties: tuple[PropertyDef, ...] = ()
    warnings: tuple[str, ...] = d.field(default=(), compare=False)

    @property
    def input_vars(self) -> tuple[VarDecl, ...]:
        return tuple(v for v in self.global_vars if v.is_input)

    @property
    def explicit_vars(self) -> tuple[tuple[t.Optional[str], VarDecl], ...]:
        """Explicit variables in state order: globals, then each process's locals.

        Each entry is ``(owner, decl)`` with owner ``None`` for globals.
        """
        out: list[tuple[t.Optional[str], VarDecl]] = [
            (None, v) for v in self.global_vars if not v.is_input
        ]
        for p in self.processes:
            out.extend((p.name, v) for v in p.local_vars)
        return tuple(out)

    def process_index(self, name: str) -> int:
        for i, p in enumerate(self.processes):
            if p.name == name:
                return i
        raise KeyError(name)

    def property(self, name: t.Optional[str] = None) -> PropertyDef:
        if not self.properties:
            raise KeyError("model has no #property block")
        if name is None:
            return self.properties[0]
        for p in self.properties:
            if p.name == name:
                return p
        raise KeyError(name)
