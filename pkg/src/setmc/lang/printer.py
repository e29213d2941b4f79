"""Pretty-printer producing canonical ``.cdve`` text (minimal parentheses)."""

from __future__ import annotations

from .syntax import Binary, BoolLit, Expr, IntLit, LocPred, Model, ProcessDef, Unary, VarDecl, VarRef

_PREC = {
    "||": 1, "&&": 2, "==": 3, "!=": 3, "<": 4, "<=": 4, ">": 4, ">=": 4,
    "+": 5, "-": 5, "*": 6, "/": 6, "%": 6,
}
_UNARY_PREC = 7


def format_expr(e: Expr, parent: int = 0) -> str:
    if isinstance(e, IntLit):
        return str(e.value)
    if isinstance(e, BoolLit):
        return "true" if e.value else "false"
    if isinstance(e, VarRef):
        return e.name
    if isinstance(e, LocPred):
        return f"{e.process}@{e.location}"
    if isinstance(e, Unary):
        inner = format_expr(e.operand, _UNARY_PREC)
        # keep "- -x" and "-5" distinguishable from a folded literal
        sep = "(" if e.op == "-" and (inner.startswith("-") or isinstance(e.operand, IntLit)) else ""
        text = f"{e.op}{sep}{inner}{')' if sep else ''}"
        return f"({text})" if parent > _UNARY_PREC else text
    assert isinstance(e, Binary)
    prec = _PREC[e.op]
    # all binary operators are left-associative
    text = f"{format_expr(e.left, prec)} {e.op} {format_expr(e.right, prec + 1)}"
    return f"({text})" if prec < parent else text


def _format_decl(v: VarDecl) -> str:
    if v.is_input:
        return f"input {v.type_name} {v.name} = {v.lo}..{v.hi};"
    return f"{v.type_name} {v.name} = {v.init};"


def _format_process(p: ProcessDef) -> list[str]:
    lines = [f"process {p.name} {{"]
    lines.extend(f"    {_format_decl(v)}" for v in p.local_vars)
    lines.append(f"    state {', '.join(p.locations)};")
    lines.append(f"    init {p.initial};")
    if p.transitions:
        lines.append("    trans")
        for i, tr in enumerate(p.transitions):
            parts = []
            if not (isinstance(tr.guard, BoolLit) and tr.guard.value):
                parts.append(f"guard {format_expr(tr.guard)};")
            if tr.sync is not None:
                parts.append(f"sync {tr.sync.channel}{'!' if tr.sync.direction == 'send' else '?'};")
            if tr.effects:
                effects = ", ".join(f"{a.target.name} = {format_expr(a.expr)}" for a in tr.effects)
                parts.append(f"effect {effects};")
            body = " ".join(parts)
            end = ";" if i == len(p.transitions) - 1 else ","
            lines.append(f"        {tr.source} -> {tr.target} {{ {body} }}{end}".replace("{  }", "{ }"))
    lines.append("}")
    return lines


def format_model(m: Model) -> str:
    lines = [f"system {m.name};", ""]
    for v in m.global_vars:
        lines.append(_format_decl(v))
    if m.channels:
        lines.append(f"channel {', '.join(c.name for c in m.channels)};")
    for p in m.processes:
        lines.append("")
        lines.extend(_format_process(p))
    for prop in m.properties:
        lines.append("")
        lines.append(f"#property {prop.name} {{")
        for name, e in prop.aps:
            lines.append(f"    ap {name} = {format_expr(e)};")
        if prop.formula is not None:
            lines.append(f'    ltl "{prop.formula}";')
        lines.append("}")
    return "\n".join(lines) + "\n"
