import pytest

_RESULTS = {}


@pytest.fixture
def acceptance():
    """Record a named acceptance outcome; the summary prints one line per criterion."""

    def record(number, label, ok, detail=""):
        _RESULTS[number] = (label, bool(ok), detail)
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for number in sorted(_RESULTS):
        label, ok, detail = _RESULTS[number]
        status = "PASS" if ok else "FAIL"
        line = f"{status} criterion {number}: {label}"
        if detail:
            line += f" ({detail})"
        terminalreporter.write_line(line)
