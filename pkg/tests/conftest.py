import pytest

_ACCEPTANCE = {}


@pytest.fixture
def record_criterion():
    """Store a one-line verdict for the acceptance summary, then return ``ok``."""

    def record(number: int, title: str, ok: bool, detail: str) -> bool:
        _ACCEPTANCE[number] = f"criterion {number} [{'PASS' if ok else 'FAIL'}] {title}: {detail}"
        print(_ACCEPTANCE[number])
        return ok

    return record


def pytest_terminal_summary(terminalreporter):
    if not _ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for k in sorted(_ACCEPTANCE):
        terminalreporter.write_line(_ACCEPTANCE[k])
