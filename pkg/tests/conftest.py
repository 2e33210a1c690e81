import pytest

# filled by test_acceptance: (criterion id, passed, detail)
ACCEPTANCE = []


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for cid, ok, detail in sorted(ACCEPTANCE, key=lambda r: r[0]):
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {detail}")


@pytest.fixture
def record_criterion():
    def record(cid, checks, detail):
        ok = all(checks.values())
        failed = [k for k, v in checks.items() if not v]
        line = detail + (f"  [failed: {', '.join(failed)}]" if failed else "")
        ACCEPTANCE.append((cid, ok, line))
        print(f"{'PASS' if ok else 'FAIL'}  criterion {cid}: {line}")
        assert ok, line

    return record
