import pytest

# criterion id -> (passed, detail); filled by test_acceptance.py
ACCEPTANCE: dict[str, tuple[bool, str]] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE, key=lambda k: (int(k.split(".")[0]), k)):
        ok, detail = ACCEPTANCE[key]
        terminalreporter.write_line(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")


@pytest.fixture
def record():
    def _record(key: str, ok: bool, detail: str):
        ACCEPTANCE[key] = (bool(ok), detail)
        print(f"{'PASS' if ok else 'FAIL'}  criterion {key}: {detail}")
        assert ok, detail

    return _record
