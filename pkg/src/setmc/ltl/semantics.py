"""Direct evaluation of LTL on ultimately periodic words (test oracle)."""

from __future__ import annotations

import functools

from .buchi import LassoWord
from .formula import AP, And, LtlFormula, Next, Not, TrueF, Until


def ltl_eval_lasso(f: LtlFormula, w: LassoWord) -> bool:
    letters = w.letters
    n = len(letters)

    @functools.lru_cache(maxsize=None)
    def holds(g: LtlFormula, i: int) -> bool:
        if isinstance(g, TrueF):
            return True
        if isinstance(g, AP):
            return g.ap_id in letters[i]
        if isinstance(g, Not):
            return not holds(g.operand, i)
        if isinstance(g, And):
            return holds(g.left, i) and holds(g.right, i)
        if isinstance(g, Next):
            return holds(g.operand, w.succ(i))
        assert isinstance(g, Until)
        # the suffixes from i onward repeat after at most n steps
        j = i
        for _ in range(n):
            if holds(g.right, j):
                return True
            if not holds(g.left, j):
                return False
            j = w.succ(j)
        return False

    return holds(f, 0)
