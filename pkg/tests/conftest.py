import pytest

_LINES = []


@pytest.fixture
def record():
    """Collect one PASS/FAIL line per acceptance criterion for the summary."""
    def emit(name, ok, detail=""):
        line = f"{'PASS' if ok else 'FAIL'}  {name}  {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return ok
    return emit


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
