import numpy as np
import pytest

from oracles import ACCEPTANCE_LINES
from qaoa_overparam.harness import tune_allocator
from qaoa_overparam.problems import maxcut_hamiltonian, ring_graph


def pytest_sessionstart(session):
    tune_allocator()


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


@pytest.fixture
def ring4():
    return maxcut_hamiltonian(ring_graph(4))

