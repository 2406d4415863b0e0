import pytest

_ACCEPTANCE: list[tuple[str, bool, str]] = []


@pytest.fixture
def report(request):
    """Record an acceptance outcome and assert it."""

    def _report(label: str, passed: bool, detail: str = "") -> None:
        _ACCEPTANCE.append((label, bool(passed), detail))
        assert passed, f"{label}: {detail}"

    return _report


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for label, ok, detail in _ACCEPTANCE:
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  {label}  {detail}")
