"""Multi-states: an explicit control part paired with a set of input evaluations.

A :class:`DataSet` is the plain explicit representation: a lexicographically
sorted, duplicate-free ``(n, k)`` integer array, one row per evaluation of the
``k`` input variables (columns in declaration order).  Equality is exact set
equality; there is no subsumption anywhere.
"""

from __future__ import annotations

import dataclasses as d
import struct
import typing as t

import numpy as np

from .lang.evaluate import compile_vector
from .lang.syntax import Assignment, Expr, VarDecl

Evaluation = tuple[int, ...]

DEFAULT_EVAL_CAP = 1 << 24


class CapacityError(Exception):
    def __init__(self, message: str, size: int) -> None:
        self.size = size
        super().__init__(message)


def _canonical_rows(rows: np.ndarray) -> np.ndarray:
    n, k = rows.shape
    if n <= 1:
        out = rows
    elif k == 0:
        out = rows[:1]
    elif k == 1:
        out = np.unique(rows[:, 0])[:, None]
    elif k <= 3:
        # stored values are < 2**16, so a packed key sorts lexicographically
        key = rows[:, 0].astype(np.int64)
        for j in range(1, k):
            key = (key << 16) | rows[:, j]
        _, first = np.unique(key, return_index=True)
        out = rows[first]
    else:
        out = np.unique(rows, axis=0)
    out = np.ascontiguousarray(out, dtype=np.int64)
    out.flags.writeable = False
    return out


class DataSet:
    """Immutable canonical set of evaluations."""

    __slots__ = ("rows", "_hash")

    def __init__(self, rows: np.ndarray, *, canonical: bool = False) -> None:
        rows = np.asarray(rows, dtype=np.int64)
        if rows.ndim != 2:
            raise ValueError("DataSet rows must be a 2-D array")
        if canonical:
            if rows.flags.writeable:
                rows = rows.copy()
                rows.flags.writeable = False
            self.rows = rows
        else:
            self.rows = _canonical_rows(rows)
        self._hash: t.Optional[int] = None

    @classmethod
    def from_evaluations(cls, evaluations: t.Iterable[Evaluation], arity: int) -> "DataSet":
        evs = list(evaluations)
        arr = np.array(evs, dtype=np.int64).reshape(len(evs), arity)
        return cls(arr)

    @classmethod
    def single(cls, evaluation: Evaluation) -> "DataSet":
        arr = np.array([evaluation], dtype=np.int64).reshape(1, len(evaluation))
        arr.flags.writeable = False
        return cls(arr, canonical=True)

    @property
    def arity(self) -> int:
        return self.rows.shape[1]

    def __len__(self) -> int:
        return self.rows.shape[0]

    def __bool__(self) -> bool:
        return self.rows.shape[0] > 0

    def __iter__(self) -> t.Iterator[Evaluation]:
        return iter(self.evaluations())

    def evaluations(self) -> list[Evaluation]:
        return [tuple(r) for r in self.rows.tolist()]

    def __contains__(self, ev: object) -> bool:
        if not isinstance(ev, tuple) or len(ev) != self.arity:
            return False
        return bool((self.rows == np.asarray(ev, dtype=np.int64)).all(axis=1).any())

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, DataSet):
            return NotImplemented
        return self.rows.shape == other.rows.shape and bool(np.array_equal(self.rows, other.rows))

    def __hash__(self) -> int:
        if self._hash is None:
            self._hash = hash((self.rows.shape, self.rows.tobytes()))
        return self._hash

    def __repr__(self) -> str:
        from .counterexample import format_dataset

        return f"DataSet({format_dataset(self)})"

    def issubset(self, other: "DataSet") -> bool:
        return set(self.evaluations()) <= set(other.evaluations())

    def union(self, *others: "DataSet") -> "DataSet":
        return DataSet(np.concatenate([self.rows] + [o.rows for o in others]))

    def intersection(self, other: "DataSet") -> "DataSet":
        keep = set(other.evaluations())
        return self.subset([ev in keep for ev in self.evaluations()])

    def subset(self, mask: t.Union[np.ndarray, t.Sequence[bool]]) -> "DataSet":
        """Rows selected by a Boolean mask; stays canonical."""
        rows = self.rows[np.asarray(mask, dtype=bool)]
        rows.flags.writeable = False
        return DataSet(rows, canonical=True)

    def column(self, name_index: int) -> list[int]:
        return self.rows[:, name_index].tolist()


@d.dataclass(frozen=True)
class ControlContext:
    """Everything an expression may read besides the input variables."""

    explicit: tuple[int, ...] = ()
    locations: tuple[int, ...] = ()


@d.dataclass(frozen=True)
class ControlPart:
    locations: tuple[int, ...]
    explicit: tuple[int, ...]
    buchi: int

    @property
    def context(self) -> ControlContext:
        return ControlContext(self.explicit, self.locations)


@d.dataclass(frozen=True)
class MultiState:
    control: ControlPart
    data: DataSet

    def __post_init__(self) -> None:
        if not self.data:
            raise ValueError("a multi-state needs a nonempty data set")

    @property
    def is_singleton(self) -> bool:
        return len(self.data) == 1

    def members(self) -> list[tuple[ControlPart, Evaluation]]:
        return [(self.control, ev) for ev in self.data.evaluations()]


# --- operations ---------------------------------------------------------------


def initial_dataset(decls: t.Sequence[VarDecl], cap: int = DEFAULT_EVAL_CAP) -> DataSet:
    """Every combination of values within the declared input ranges."""
    size = 1
    for v in decls:
        if not v.is_input:
            raise ValueError(f"{v.name!r} is not an input variable")
        size *= v.domain_size
    if size > cap:
        raise CapacityError(
            f"initial data set has {size} evaluations, above the cap of {cap}", size
        )
    if not decls:
        return DataSet(np.zeros((1, 0), dtype=np.int64), canonical=True)
    grids = np.meshgrid(*[np.arange(v.lo, v.hi + 1, dtype=np.int64) for v in decls], indexing="ij")
    rows = np.stack([g.ravel() for g in grids], axis=1)
    rows.flags.writeable = False
    return DataSet(rows, canonical=True)


_compiled: dict[int, tuple[Expr, t.Any]] = {}


def _vector_fn(e: Expr) -> t.Any:
    hit = _compiled.get(id(e))
    if hit is None or hit[0] is not e:
        hit = _compiled[id(e)] = (e, compile_vector(e))
    return hit[1]


def _values(e: Expr, x: DataSet, ctx: ControlContext) -> np.ndarray:
    v = _vector_fn(e)(ctx.explicit, ctx.locations, x.rows)
    if isinstance(v, np.ndarray):
        return v
    if isinstance(v, bool):
        return np.full(len(x), v, dtype=bool)
    return np.full(len(x), v, dtype=np.int64 if abs(v) < 1 << 62 else object)


def wrap_array(values: np.ndarray, mask: int) -> np.ndarray:
    """Two's-complement truncation of wide values to ``mask``'s width."""
    if values.dtype == object:
        return np.array([int(v) & mask for v in values], dtype=np.int64)
    return values.astype(np.int64, copy=False) & mask


def prune(x: DataSet, e: Expr, ctx: ControlContext = ControlContext()) -> DataSet:
    """The members of ``x`` satisfying the Boolean expression ``e``."""
    mask = _values(e, x, ctx).astype(bool)
    return x.subset(mask)


def apply(x: DataSet, asgn: Assignment, ctx: ControlContext = ControlContext()) -> DataSet:
    """Image of ``x`` under an assignment to an input variable (wrapped on store)."""
    slot = asgn.target.slot
    if slot is None or slot.kind != "input":
        raise ValueError(f"{asgn.target.name!r} is not an input variable")
    values = _values(asgn.expr, x, ctx)
    rows = x.rows.copy()
    rows[:, slot.index] = wrap_array(values, slot.mask)
    return DataSet(rows)


def partition_by(x: DataSet, e: Expr, ctx: ControlContext = ControlContext()) -> dict[int, DataSet]:
    """Split ``x`` by the (unwrapped) value of ``e``; keys in ascending order."""
    values = _values(e, x, ctx)
    out: dict[int, DataSet] = {}
    for key in sorted(set(values.tolist())):
        out[key] = x.subset(values == key)
    return out


# --- canonical encoding -------------------------------------------------------


@d.dataclass(frozen=True)
class StateLayout:
    """Field counts of a model/property binding; fixes the encoding layout."""

    n_locations: int
    n_explicit: int
    n_inputs: int

    @property
    def header(self) -> struct.Struct:
        return struct.Struct(f"<{self.n_locations}H{self.n_explicit}HII")


def canonical_encode(s: MultiState) -> bytes:
    """``[locations][explicit values][buchi state][member count][members]``,
    all little-endian; locations and values as ``u16``, the two counts as ``u32``."""
    c = s.control
    head = struct.pack(
        f"<{len(c.locations)}H{len(c.explicit)}HII", *c.locations, *c.explicit, c.buchi, len(s.data)
    )
    return head + s.data.rows.astype("<u2").tobytes()


def canonical_decode(blob: bytes, layout: StateLayout) -> MultiState:
    header = layout.header
    fields = header.unpack_from(blob)
    nl, ne = layout.n_locations, layout.n_explicit
    count = fields[-1]
    rows = np.frombuffer(blob, dtype="<u2", offset=header.size).astype(np.int64)
    rows = rows.reshape(count, layout.n_inputs)
    rows.flags.writeable = False
    control = ControlPart(tuple(fields[:nl]), tuple(fields[nl : nl + ne]), fields[-2])
    return MultiState(control, DataSet(rows, canonical=True))
