import pytest

_LINES: list[str] = []


@pytest.fixture
def verdict():
    """Record one ``criterion N: PASS|FAIL`` line; the lines are echoed in the terminal summary."""

    def record(number: int, passed: bool, detail: str, label: str | None = None) -> bool:
        status = label or ("PASS" if passed else "FAIL")
        line = f"criterion {number}: {status} - {detail}"
        _LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(_LINES, key=lambda s: int(s.split()[1].rstrip(":"))):
            terminalreporter.write_line(line)
