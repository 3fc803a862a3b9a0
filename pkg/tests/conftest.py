import pytest

CRITERIA: dict = {}


@pytest.fixture
def criterion():
    """Record one pass/fail line per acceptance criterion."""

    def record(number: int, title: str, ok: bool, detail: str = ""):
        # parametrized criteria pass only if every case passes
        if number in CRITERIA:
            _, prev_ok, prev_detail = CRITERIA[number]
            ok, detail = prev_ok and ok, f"{prev_detail} | {detail}"
        CRITERIA[number] = (title, bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(CRITERIA):
        title, ok, detail = CRITERIA[number]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {number:>2}: {title}  {detail}")
