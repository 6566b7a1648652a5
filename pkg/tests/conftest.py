import numpy as np
import pytest

from ontoscope.quantum import Ket, ProjectiveContext, canonical_context, make_rng, random_ket
from ontoscope.zoo import build_bb_model, build_bell_model, build_ks_qubit_model

KET0 = Ket.basis(2, 0)
KET1 = Ket.basis(2, 1)
PLUS = Ket.normalized(np.array([1.0, 1.0]))
MINUS = Ket.normalized(np.array([1.0, -1.0]))
HADAMARD = ProjectiveContext.from_rays([PLUS, MINUS], label="hadamard")


def qubit_at(bloch_angle: float) -> Ket:
    """Real qubit ket whose Bloch vector is at ``bloch_angle`` from +z."""
    return Ket.normalized(np.array([np.cos(bloch_angle / 2), np.sin(bloch_angle / 2)]))


@pytest.fixture(scope="session")
def bb_qubit():
    ctx = [canonical_context(2), HADAMARD]
    return build_bb_model(2, [KET0, KET1, PLUS], ctx)


@pytest.fixture(scope="session")
def bell3():
    return build_bell_model(3, 10_000)


@pytest.fixture(scope="session")
def ks_big():
    return build_ks_qubit_model(100_000, 7)


@pytest.fixture(scope="session")
def ks_small():
    return build_ks_qubit_model(2_000, 3)


def haar_states(dim, n, seed):
    return [random_ket(dim, make_rng(seed, 0, i)) for i in range(n)]


# one line per acceptance criterion, collected by tests/test_acceptance.py
ACCEPTANCE_LINES: list[str] = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)
