"""LTL formulae, translation to Büchi automata, and lasso-word oracles."""

from .buchi import BuchiAutomaton, BuchiTransition, Label, LassoWord, ba_accepts_lasso
from .formula import (
    AP,
    FALSE,
    TRUE,
    And,
    LtlFormula,
    Next,
    Not,
    TrueF,
    Until,
    is_desugared,
    mk_always,
    mk_eventually,
    mk_implies,
    mk_not,
    mk_or,
    negate,
)
from .parser import AtomicProposition, LtlSyntaxError, bind_aps, parse_ltl
from .semantics import ltl_eval_lasso
from .tableau import ltl_to_buchi

__all__ = [
    "AP", "FALSE", "TRUE", "And", "AtomicProposition", "BuchiAutomaton", "BuchiTransition",
    "Label", "LassoWord", "LtlFormula", "LtlSyntaxError", "Next", "Not", "TrueF", "Until",
    "ba_accepts_lasso", "bind_aps", "is_desugared", "ltl_eval_lasso", "ltl_to_buchi",
    "mk_always", "mk_eventually", "mk_implies", "mk_not", "mk_or", "negate", "parse_ltl",
]
