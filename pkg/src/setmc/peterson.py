"""Generator for the parameterized Peterson mutual-exclusion benchmark.

Each process runs ``idle -> want -> wait -> crit -> idle``.  The critical
section performs ``l = (l + 1) % r`` on the global input variable
``l in 0..r``.  Two properties are emitted: ``liveness`` (a waiting process
eventually enters) and ``progress`` (process 0 enters infinitely often),
the latter being violated without fairness.
"""

from __future__ import annotations


def generate_peterson(r: int, procs: int = 2) -> str:
    """Model text for Peterson's protocol (filter lock when ``procs > 2``)."""
    if not isinstance(r, int) or r < 1 or r >= 1 << 16:
        raise ValueError(f"r must satisfy 1 <= r < 65536, got {r!r}")
    if procs < 2:
        raise ValueError("need at least two processes")
    width = "byte" if r <= 255 else "int"
    lines = [f"// Peterson's protocol, {procs} processes, l in 0..{r}", f"system peterson_{r};", ""]
    if procs == 2:
        shared = ["flag0", "flag1", "turn"]
    else:
        shared = [f"level{i}" for i in range(procs)] + [f"victim{k}" for k in range(1, procs)]
    lines.extend(f"byte {name} = 0;" for name in shared)
    lines.append(f"input {width} l = 0..{r};")
    lines.append("")
    for i in range(procs):
        lines.extend(_process(i, procs, r))
        lines.append("")
    lines.extend(
        [
            "#property liveness {",
            "    ap w0 = P0@wait;",
            "    ap c0 = P0@crit;",
            '    ltl "G (w0 -> F c0)";',
            "}",
            "",
            "#property progress {",
            "    ap c0 = P0@crit;",
            '    ltl "G F c0";',
            "}",
        ]
    )
    return "\n".join(lines) + "\n"


def _process(i: int, procs: int, r: int) -> list[str]:
    crit_effect = f"effect l = (l + 1) % {r}, "
    if procs == 2:
        j = 1 - i
        return [
            f"process P{i} {{",
            "    state idle, want, wait, crit;",
            "    init idle;",
            "    trans",
            f"        idle -> want {{ effect flag{i} = 1; }},",
            f"        want -> wait {{ effect turn = {j}; }},",
            f"        wait -> crit {{ guard flag{j} == 0 || turn == {i}; }},",
            f"        crit -> idle {{ {crit_effect}flag{i} = 0; }};",
            "}",
        ]
    # filter lock: at level ``lev`` set the level, become the victim, then wait
    # until nobody else is at this level or higher, or someone else is the victim
    others = [k for k in range(procs) if k != i]

    def wait_name(lev: int) -> str:
        return "wait" if lev == procs - 1 else f"wait{lev}"

    def pass_guard(lev: int) -> str:
        free = " && ".join(f"level{k} < {lev}" for k in others)
        return f"guard {free} || victim{lev} != {i};"

    states = ["idle"]
    body = []
    for lev in range(1, procs):
        enter = "want" if lev == 1 else f"want{lev}"
        states += [enter, wait_name(lev)]
        if lev == 1:
            body.append(f"        idle -> want {{ effect level{i} = 1; }},")
        else:
            body.append(f"        {wait_name(lev - 1)} -> {enter} {{ {pass_guard(lev - 1)} effect level{i} = {lev}; }},")
        body.append(f"        {enter} -> {wait_name(lev)} {{ effect victim{lev} = {i}; }},")
    body.append(f"        wait -> crit {{ {pass_guard(procs - 1)} }},")
    states.append("crit")
    body.append(f"        crit -> idle {{ {crit_effect}level{i} = 0; }};")
    return [
        f"process P{i} {{",
        "    state " + ", ".join(states) + ";",
        "    init idle;",
        "    trans",
        *body,
        "}",
    ]
