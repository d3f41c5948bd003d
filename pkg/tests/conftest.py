import sys

import numpy as np
import pytest

from bodyorder.lattice import HoppingModel, make_chain


@pytest.fixture
def model():
    return HoppingModel(h0=3.6, gamma0=2.0)


@pytest.fixture
def gapped_chain():
    """12-site alternating chain; mu = -0.13 sits inside its gap."""
    return make_chain(12, 1.0, (0.2, -0.2))


@pytest.fixture
def rng():
    return np.random.default_rng(20240611)


def pytest_terminal_summary(terminalreporter):
    mod = sys.modules.get("test_acceptance")
    outcomes = getattr(mod, "OUTCOMES", None)
    if not outcomes:
        return
    terminalreporter.write_sep("=", "acceptance criteria")
    for n in sorted(outcomes):
        terminalreporter.write_line(outcomes[n].line())
