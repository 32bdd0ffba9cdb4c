from pathlib import Path

import pytest

from storval import reference as R
from storval.network import build_flow_operators

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def fixtures():
    return FIXTURES


@pytest.fixture
def two_node():
    net = R.two_node()
    return net, build_flow_operators(net)


@pytest.fixture
def copperplate():
    net = R.copperplate()
    return net, build_flow_operators(net)


def pytest_terminal_summary(terminalreporter):
    from test_acceptance import RESULTS

    if RESULTS:
        terminalreporter.section("acceptance criteria")
        for line in RESULTS.values():
            terminalreporter.write_line(line)
