"""Shared test infrastructure: the acceptance verdict report.

Acceptance tests record one line per criterion through `record`; the
collected verdicts are printed after the run (and written next to the
test tree), so they stay visible even though pytest captures stdout of
passing tests.
"""

from pathlib import Path

VERDICTS: list = []

REPORT_PATH = Path(__file__).resolve().parent.parent / "acceptance_report.txt"


def record(criterion: str, ok: bool, detail: str) -> None:
    """Register a criterion verdict, then enforce it."""
    VERDICTS.append((criterion, bool(ok), detail))
    assert ok, f"{criterion}: {detail}"


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if not VERDICTS:
        return
    lines = []
    for criterion, ok, detail in VERDICTS:
        mark = "PASS" if ok else "FAIL"
        lines.append(f"{mark}  {criterion}: {detail}")
    terminalreporter.section("acceptance criteria")
    for line in lines:
        terminalreporter.write_line(line)
    REPORT_PATH.write_text("\n".join(lines) + "\n", encoding="ascii")
