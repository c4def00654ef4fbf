import io
import random

import pytest

# one "[PASS]/[FAIL]/[SKIP] <criterion>" line per acceptance criterion,
# appended by tests/test_acceptance.py and printed after the test run
acceptance_results = []


def pytest_terminal_summary(terminalreporter, exitstatus, config):
    if acceptance_results:
        terminalreporter.section("acceptance criteria")
        for line in acceptance_results:
            terminalreporter.write_line(line)

from latticelm.fixtures import (fixture_arpa, fixture_lattice, fixture_symbols,
                                random_lattice, stamp_lm_costs)
from latticelm.server import LmServer


@pytest.fixture(scope="session")
def symbols():
    return fixture_symbols()


@pytest.fixture(scope="session")
def model2():
    return fixture_arpa(2)


@pytest.fixture(scope="session")
def model4():
    return fixture_arpa(4)


@pytest.fixture
def demo_lattice():
    return fixture_lattice()


@pytest.fixture
def rng():
    return random.Random(20240817)


def small_random_lattices(rng, count, **kwargs):
    return [random_lattice(rng, f"u{i}", **kwargs) for i in range(count)]


@pytest.fixture
def running_server(model2):
    server = LmServer(model2, log_stream=io.StringIO())
    server.start_background()
    yield server
    server.shutdown()


@pytest.fixture
def running_server4(model4):
    server = LmServer(model4, log_stream=io.StringIO())
    server.start_background()
    yield server
    server.shutdown()
