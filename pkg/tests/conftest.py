import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from seqbn import networks  # noqa: E402
from seqbn.network import parse_network  # noqa: E402

CHAIN_TEXT = """
vars 3
var X 2
var Y 2
var Z 2
parents X
parents Y X
parents Z Y
cpt X
0.3 0.7
cpt Y
0.9 0.1
0.2 0.8
cpt Z
0.6 0.4
0.1 0.9
"""


@pytest.fixture
def chain():
    return parse_network(CHAIN_TEXT)


@pytest.fixture(params=networks.NAMES)
def reference_net(request):
    return networks.load(request.param)


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


ACCEPTANCE_LINES: list[str] = []


@pytest.fixture
def report():
    """Collects one status line per acceptance criterion for the terminal summary."""
    return ACCEPTANCE_LINES.append


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in sorted(ACCEPTANCE_LINES, key=lambda s: int(s.split()[0][1:])):
            terminalreporter.write_line(line)
