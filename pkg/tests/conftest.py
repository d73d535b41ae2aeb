import pytest

_LINES: dict[int, str] = {}


@pytest.fixture
def report():
    """Record the one-line outcome of an acceptance criterion.

    The lines are printed together at the end of the session.
    """

    def record(number: int, name: str, passed: bool, detail: str = "") -> bool:
        line = f"criterion {number} {name}: {'PASS' if passed else 'FAIL'}" + (f" ({detail})" if detail else "")
        _LINES[number] = line
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not _LINES:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_LINES):
        terminalreporter.write_line(_LINES[number])
