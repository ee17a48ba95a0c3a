"""Prints the acceptance criteria lines at the end of the session."""

CRITERIA: dict[int, str] = {}


def record_criterion(number: int, ok: bool, detail: str) -> None:
    CRITERIA[number] = f"criterion {number}: {'PASS' if ok else 'FAIL'}  {detail}"


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        terminalreporter.write_line(CRITERIA[n])
