"""Front end for the ``.cdve`` modelling language."""

from .evaluate import Context, compile_scalar, compile_vector, eval_expr, eval_vector, wrap
from .parser import parse_bool_expr, parse_expr, parse_model
from .printer import format_expr, format_model
from .syntax import (
    Assignment,
    Binary,
    BoolLit,
    EvalError,
    Expr,
    IntLit,
    LocPred,
    Model,
    ModelError,
    ProcessDef,
    PropertyDef,
    Slot,
    TransitionDef,
    Unary,
    VarDecl,
    VarRef,
)

__all__ = [
    "Assignment", "Binary", "BoolLit", "Context", "EvalError", "Expr", "IntLit", "LocPred",
    "Model", "ModelError", "ProcessDef", "PropertyDef", "Slot", "TransitionDef", "Unary",
    "VarDecl", "VarRef", "compile_scalar", "compile_vector", "eval_expr", "eval_vector",
    "format_expr", "format_model", "parse_bool_expr", "parse_expr", "parse_model", "wrap",
]
