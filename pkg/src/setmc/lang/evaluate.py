"""Expression evaluation.

Arithmetic is carried out in a wide signed domain: Python integers for the
scalar paths, ``int64`` (or object arrays when a static magnitude bound says
``int64`` could overflow) for the vectorised path.  Values are wrapped to a
variable's width only when stored (see :func:`wrap`).  Division and modulo
truncate toward zero, as in C.  ``&&`` and ``||`` short-circuit, so a guard
such as ``x != 0 && 10 / x > 1`` never divides by zero.
"""

from __future__ import annotations

import dataclasses as d
import typing as t

import numpy as np

from .syntax import Binary, BoolLit, EvalError, Expr, IntLit, LocPred, Unary, VarRef

_INT64_SAFE = 1 << 62


@d.dataclass(frozen=True)
class Context:
    """Values visible to an expression: explicit variables, one evaluation of
    the input variables, and the location index of every process."""

    explicit: tuple[int, ...] = ()
    inputs: tuple[int, ...] = ()
    locations: tuple[int, ...] = ()


def wrap(value: int, width: int) -> int:
    """Two's-complement truncation to ``width`` bits, as an unsigned value."""
    return value & ((1 << width) - 1)


def c_div(a: int, b: int) -> int:
    q = abs(a) // abs(b)
    return q if (a >= 0) == (b >= 0) else -q


def c_mod(a: int, b: int) -> int:
    return a - b * c_div(a, b)


def eval_expr(e: Expr, ctx: Context) -> t.Union[int, bool]:
    """Reference interpreter; the compiled evaluators must agree with it."""
    if isinstance(e, IntLit):
        return e.value
    if isinstance(e, BoolLit):
        return e.value
    if isinstance(e, VarRef):
        if e.slot is None:
            raise ValueError(f"unresolved variable {e.name!r}")
        src = ctx.inputs if e.slot.kind == "input" else ctx.explicit
        return src[e.slot.index]
    if isinstance(e, LocPred):
        return ctx.locations[e.proc_index] == e.loc_index
    if isinstance(e, Unary):
        v = eval_expr(e.operand, ctx)
        return -v if e.op == "-" else not v
    assert isinstance(e, Binary)
    op = e.op
    if op == "&&":
        return bool(eval_expr(e.left, ctx)) and bool(eval_expr(e.right, ctx))
    if op == "||":
        return bool(eval_expr(e.left, ctx)) or bool(eval_expr(e.right, ctx))
    a = eval_expr(e.left, ctx)
    b = eval_expr(e.right, ctx)
    if op == "+":
        return a + b
    if op == "-":
        return a - b
    if op == "*":
        return a * b
    if op in ("/", "%"):
        if b == 0:
            raise EvalError(f"{'division' if op == '/' else 'modulo'} by zero", e, ctx.inputs)
        return c_div(a, b) if op == "/" else c_mod(a, b)
    if op == "<":
        return a < b
    if op == "<=":
        return a <= b
    if op == ">":
        return a > b
    if op == ">=":
        return a >= b
    if op == "==":
        return a == b
    if op == "!=":
        return a != b
    raise ValueError(f"unknown operator {op!r}")


def magnitude_bound(e: Expr) -> int:
    """Upper bound on ``|value|`` of any subexpression of ``e``."""
    if isinstance(e, IntLit):
        return abs(e.value)
    if isinstance(e, (BoolLit, LocPred)):
        return 1
    if isinstance(e, VarRef):
        return e.slot.mask if e.slot is not None else 1 << 16
    if isinstance(e, Unary):
        return magnitude_bound(e.operand)
    assert isinstance(e, Binary)
    a = magnitude_bound(e.left)
    b = magnitude_bound(e.right)
    if e.op in ("+", "-"):
        return max(a + b, a, b)
    if e.op == "*":
        return max(a * b, a, b)
    return max(a, b)


# --- compiled scalar evaluation (explicit engine) ------------------------------

ScalarFn = t.Callable[[t.Sequence[int], t.Sequence[int], t.Sequence[int]], t.Any]


def compile_scalar(e: Expr) -> ScalarFn:
    """Compile ``e`` into ``fn(explicit, inputs, locations)``."""
    exprs: list[Expr] = []

    def gen(x: Expr) -> str:
        if isinstance(x, IntLit):
            return repr(x.value)
        if isinstance(x, BoolLit):
            return repr(x.value)
        if isinstance(x, VarRef):
            assert x.slot is not None
            return f"{'I' if x.slot.kind == 'input' else 'E'}[{x.slot.index}]"
        if isinstance(x, LocPred):
            return f"(L[{x.proc_index}] == {x.loc_index})"
        if isinstance(x, Unary):
            return f"(-{gen(x.operand)})" if x.op == "-" else f"(not {gen(x.operand)})"
        assert isinstance(x, Binary)
        if x.op == "&&":
            return f"({gen(x.left)} and {gen(x.right)})"
        if x.op == "||":
            return f"({gen(x.left)} or {gen(x.right)})"
        if x.op in ("/", "%"):
            exprs.append(x)
            fn = "_div" if x.op == "/" else "_mod"
            return f"{fn}({gen(x.left)}, {gen(x.right)}, _X[{len(exprs) - 1}], I)"
        return f"({gen(x.left)} {x.op} {gen(x.right)})"

    body = gen(e)
    namespace: dict[str, t.Any] = {"_div": _scalar_div, "_mod": _scalar_mod, "_X": exprs}
    exec(f"def _fn(E, I, L):\n    return {body}\n", namespace)  # noqa: S102
    return namespace["_fn"]


def _scalar_div(a: int, b: int, e: Expr, inputs: t.Sequence[int]) -> int:
    if b == 0:
        raise EvalError("division by zero", e, tuple(inputs))
    return c_div(a, b)


def _scalar_mod(a: int, b: int, e: Expr, inputs: t.Sequence[int]) -> int:
    if b == 0:
        raise EvalError("modulo by zero", e, tuple(inputs))
    return c_mod(a, b)


# --- compiled vectorised evaluation (set-based engine) -------------------------

VectorFn = t.Callable[[t.Sequence[int], t.Sequence[int], np.ndarray], t.Any]
"""``fn(explicit, locations, rows)``: ``rows`` is an ``(n, k)`` array of
evaluations; the result is a Python scalar when ``e`` does not depend on input
variables, otherwise an array of length ``n``."""


def _trunc_div(a: np.ndarray, b: np.ndarray) -> np.ndarray:
    q = np.abs(a) // np.abs(b)
    return np.where((a >= 0) == (b >= 0), q, -q)


def compile_vector(e: Expr) -> VectorFn:
    wide = magnitude_bound(e) >= _INT64_SAFE

    def column(i: int) -> VectorFn:
        if wide:
            return lambda E, L, rows: rows[:, i].astype(object)
        return lambda E, L, rows: rows[:, i]

    def build(x: Expr) -> VectorFn:
        if isinstance(x, (IntLit, BoolLit)):
            v = x.value
            return lambda E, L, rows: v
        if isinstance(x, VarRef):
            assert x.slot is not None
            i = x.slot.index
            if x.slot.kind == "input":
                return column(i)
            return lambda E, L, rows: E[i]
        if isinstance(x, LocPred):
            p, loc = x.proc_index, x.loc_index
            return lambda E, L, rows: L[p] == loc
        if isinstance(x, Unary):
            f = build(x.operand)
            if x.op == "-":
                return lambda E, L, rows: -f(E, L, rows)

            def neg(E: t.Any, L: t.Any, rows: np.ndarray) -> t.Any:
                v = f(E, L, rows)
                return np.logical_not(v) if isinstance(v, np.ndarray) else not v

            return neg
        assert isinstance(x, Binary)
        lf, rf = build(x.left), build(x.right)
        op = x.op
        if op in ("&&", "||"):
            return _short_circuit(lf, rf, op == "&&")
        if op in ("/", "%"):
            return _division(lf, rf, op, x)
        fn = _NUMPY_OPS[op]
        if op in ("<", "<=", ">", ">=", "==", "!="):

            def cmp(E: t.Any, L: t.Any, rows: np.ndarray) -> t.Any:
                r = fn(lf(E, L, rows), rf(E, L, rows))
                if isinstance(r, np.ndarray):
                    return r.astype(bool, copy=False)
                return bool(r)

            return cmp
        return lambda E, L, rows: fn(lf(E, L, rows), rf(E, L, rows))

    return build(e)


_NUMPY_OPS: dict[str, t.Callable[[t.Any, t.Any], t.Any]] = {
    "+": lambda a, b: a + b,
    "-": lambda a, b: a - b,
    "*": lambda a, b: a * b,
    "<": lambda a, b: a < b,
    "<=": lambda a, b: a <= b,
    ">": lambda a, b: a > b,
    ">=": lambda a, b: a >= b,
    "==": lambda a, b: a == b,
    "!=": lambda a, b: a != b,
}


def _short_circuit(lf: VectorFn, rf: VectorFn, is_and: bool) -> VectorFn:
    def fn(E: t.Any, L: t.Any, rows: np.ndarray) -> t.Any:
        left = lf(E, L, rows)
        if not isinstance(left, np.ndarray):
            if bool(left) != is_and:
                return bool(left)
            right = rf(E, L, rows)
            return right.astype(bool) if isinstance(right, np.ndarray) else bool(right)
        left = left.astype(bool, copy=False)
        sel = np.flatnonzero(left if is_and else ~left)
        out = left.copy()
        if len(sel):
            right = rf(E, L, rows[sel])
            out[sel] = right
        return out

    return fn


def _division(lf: VectorFn, rf: VectorFn, op: str, x: Expr) -> VectorFn:
    what = "division" if op == "/" else "modulo"

    def fn(E: t.Any, L: t.Any, rows: np.ndarray) -> t.Any:
        a = lf(E, L, rows)
        b = rf(E, L, rows)
        if not isinstance(a, np.ndarray) and not isinstance(b, np.ndarray):
            if b == 0:
                raise EvalError(f"{what} by zero", x, tuple(int(v) for v in rows[0]) if len(rows) else None)
            return c_div(a, b) if op == "/" else c_mod(a, b)
        b_arr = np.broadcast_to(np.asarray(b), (len(rows),))
        zero = b_arr == 0
        if zero.any():
            first = int(np.flatnonzero(zero)[0])
            raise EvalError(f"{what} by zero", x, tuple(int(v) for v in rows[first]))
        a_arr = np.broadcast_to(np.asarray(a), (len(rows),))
        q = _trunc_div(a_arr, b_arr)
        return q if op == "/" else a_arr - b_arr * q

    return fn


def eval_vector(e: Expr, explicit: t.Sequence[int], locations: t.Sequence[int], rows: np.ndarray) -> np.ndarray:
    """Evaluate ``e`` for every row; always returns an array of length ``len(rows)``."""
    v = compile_vector(e)(explicit, locations, rows)
    if isinstance(v, np.ndarray):
        return v
    return np.full(len(rows), v, dtype=bool if isinstance(v, bool) else np.int64)
