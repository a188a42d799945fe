import pytest

ACCEPTANCE = []


@pytest.fixture
def acceptance():
    """Record one criterion outcome: acceptance(id, passed, detail)."""
    def record(cid, passed, detail):
        ACCEPTANCE.append((cid, bool(passed), detail))
        return passed
    return record


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, passed, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if passed else 'FAIL'} [{cid}] {detail}")
