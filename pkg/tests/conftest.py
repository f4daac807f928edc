import pathlib

import pytest

from floquetspec.periodic_ode import OperatorSpec

CONFIGS = pathlib.Path(__file__).resolve().parent.parent / "configs"


@pytest.fixture(scope="session")
def configs_dir():
    return CONFIGS


@pytest.fixture(scope="session")
def free_hill():
    return OperatorSpec.hill("0")


@pytest.fixture(scope="session")
def cos_hill():
    return OperatorSpec.hill("cos(2*pi*t)")


ACCEPTANCE = pytest.StashKey[dict]()


@pytest.fixture
def acceptance(request):
    """``record(k, ok, detail)`` stores one PASS/FAIL line for criterion k and fails the test when not ok."""
    results = request.config.stash.setdefault(ACCEPTANCE, {})

    def record(k: int, ok: bool, detail: str):
        line = f"criterion {k:2d}: {'PASS' if ok else 'FAIL'}  {detail}"
        results[k] = line
        print(line)
        assert ok, line

    return record


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    results = config.stash.get(ACCEPTANCE, {})
    if results:
        terminalreporter.section("acceptance criteria")
        for k in sorted(results):
            terminalreporter.write_line(results[k])
