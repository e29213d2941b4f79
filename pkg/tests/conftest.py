import contextlib

ACCEPTANCE: dict[int, tuple[str, str]] = {}


@contextlib.contextmanager
def criterion(number: int, title: str):
    """Record PASS/FAIL for an acceptance criterion; failures still propagate."""
    try:
        yield
    except BaseException as err:
        ACCEPTANCE[number] = ("FAIL", f"{title}: {err}".splitlines()[0])
        print(f"CRITERION {number} FAIL {title}")
        raise
    ACCEPTANCE[number] = ("PASS", title)
    print(f"CRITERION {number} PASS {title}")


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(ACCEPTANCE):
        status, text = ACCEPTANCE[number]
        terminalreporter.write_line(f"{status} criterion {number}: {text}")
