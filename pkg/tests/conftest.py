import pytest

ACCEPTANCE_RESULTS: dict[str, tuple[bool, str]] = {}


@pytest.fixture
def criterion(request):
    """Record one acceptance criterion; prints in the terminal summary."""

    def record(label: str, passed: bool, detail: str = ""):
        ACCEPTANCE_RESULTS[label] = (passed, detail)
        return passed

    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for label in sorted(ACCEPTANCE_RESULTS, key=lambda s: int(s.split()[0])):
        passed, detail = ACCEPTANCE_RESULTS[label]
        mark = "PASS" if passed else "FAIL"
        terminalreporter.write_line(f"[{mark}] {label}" + (f" -- {detail}" if detail else ""))
