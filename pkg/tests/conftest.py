import pytest

from cmael.formula import Universe

# criterion number -> (passed, detail); filled by test_acceptance
CRITERIA: dict[int, tuple[bool, str]] = {}


@pytest.fixture(scope="session")
def ab():
    return Universe(["a", "b"])


@pytest.fixture(scope="session")
def abc():
    return Universe(["a", "b", "c"])


def pytest_terminal_summary(terminalreporter):
    if not CRITERIA:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(CRITERIA):
        ok, detail = CRITERIA[n]
        terminalreporter.write_line(f"criterion {n}: {'PASS' if ok else 'FAIL'} - {detail}")
