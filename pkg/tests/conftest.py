import pytest

_LINES: list[str] = []


@pytest.fixture
def report_criterion():
    """Record one summary line per acceptance criterion."""

    def record(label: str, passed: bool, detail: str = "", gated: bool = True) -> bool:
        status = "PASS" if passed else ("FAIL" if gated else "FAIL (reported, not gated)")
        line = f"criterion {label}: {status} {detail}".rstrip()
        _LINES.append(line)
        print(line)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if _LINES:
        terminalreporter.section("acceptance criteria")
        for line in _LINES:
            terminalreporter.write_line(line)
