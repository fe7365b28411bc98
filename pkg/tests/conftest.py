import numpy as np
import pytest

from arblab.gelfand import SpectralModel, Weights, canonical_frame


@pytest.fixture
def w3():
    return Weights(np.array([0.5, 0.3, 0.2]))


@pytest.fixture
def diag3(w3):
    return SpectralModel(np.array([0.5, 0.25, 0.125]), canonical_frame(w3), w3)


def random_weights(rng, M):
    return Weights.from_raw(rng.uniform(0.05, 1.0, M))


ACCEPTANCE_LINES: dict[int, str] = {}


def pytest_terminal_summary(terminalreporter):
    if not ACCEPTANCE_LINES:
        return
    terminalreporter.section("acceptance criteria")
    for key in sorted(ACCEPTANCE_LINES):
        terminalreporter.write_line(ACCEPTANCE_LINES[key])
