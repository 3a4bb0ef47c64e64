from pathlib import Path

import pytest

from decoyanon.dataset import load_dataset, load_schema, strip_direct
from decoyanon.hierarchy import bind_hierarchies, load_hierarchies

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures_dir():
    return FIXTURES


@pytest.fixture
def voters7_schema():
    return load_schema(FIXTURES / "voters7_schema.json")


@pytest.fixture
def voters7(voters7_schema):
    return load_dataset(FIXTURES / "voters7.csv", voters7_schema)


@pytest.fixture
def voters7_hierarchies(voters7_schema):
    return bind_hierarchies(voters7_schema, load_hierarchies(FIXTURES / "voters7_hierarchies.json"))


@pytest.fixture(scope="session")
def gzy_hierarchies():
    return load_hierarchies(FIXTURES / "gzy_hierarchies.json")


@pytest.fixture
def voters7_stripped(voters7):
    return strip_direct(voters7)


# One PASS/FAIL line per acceptance criterion, printed after the run.
_criteria = {}


@pytest.hookimpl(hookwrapper=True)
def pytest_runtest_makereport(item, call):
    outcome = yield
    rep = outcome.get_result()
    marker = item.get_closest_marker("criterion")
    if marker is None:
        return
    if rep.when == "call" or (rep.when == "setup" and rep.failed):
        n = marker.args[0]
        ok = _criteria.get(n, (True, ""))[0] and rep.passed
        _criteria[n] = (ok, marker.kwargs.get("title", ""))


def pytest_terminal_summary(terminalreporter):
    if not _criteria:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(_criteria):
        ok, title = _criteria[n]
        terminalreporter.write_line(f"[{'PASS' if ok else 'FAIL'}] criterion {n}: {title}")


@pytest.fixture(scope="session")
def scenario():
    """Population 1e5, sample 5000, k=10, 5% suppression."""
    from helpers import synthetic_scenario
    return synthetic_scenario(7, 100_000, 5_000, 10, 0.05)
