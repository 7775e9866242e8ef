import pytest

_LINES = pytest.StashKey[list]()


@pytest.fixture
def report(request, capsys):
    """Record one acceptance line, echo it live, and return ``passed``."""

    def _report(number: int, title: str, passed: bool, detail: str) -> bool:
        line = f"criterion {number:>2}  {'PASS' if passed else 'FAIL'}  {title}: {detail}"
        request.config.stash.setdefault(_LINES, []).append(line)
        with capsys.disabled():
            print("\n" + line)
        return passed

    return _report


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    lines = config.stash.get(_LINES, [])
    if lines:
        terminalreporter.section("acceptance criteria")
        for line in sorted(lines, key=lambda s: int(s.split()[1])):
            terminalreporter.write_line(line)
