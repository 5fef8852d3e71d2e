import sys
from pathlib import Path

import numpy as np
import pytest

sys.path.insert(0, str(Path(__file__).parent))

from threshold_spectra import (  # noqa: E402
    DIRAC,
    LOWER,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    Grid3,
    KineticModel,
    PotentialSpec,
    build_threshold_state,
    energy_ladder,
    extrapolate_threshold,
    lambda_curve,
)

ACCEPTANCE_LINES = []


def pytest_terminal_summary(terminalreporter):
    if ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


def run_ladder(kind, branch=UPPER, n=64, box_length=16.0, coupling_sign=1, quadrature=True):
    model = KineticModel(kind, 1.0)
    grid = Grid3(n, box_length)
    potential = PotentialSpec()
    first = -1.0
    energies = energy_ladder(model, branch, first, 0.5, 11)
    result = lambda_curve(model, potential, energies, grid, branch=branch, coupling_sign=coupling_sign)
    extrapolate_threshold(result)
    state = None
    if coupling_sign == 1:
        state = build_threshold_state(model, potential, result.mu_0, result.lambda_c, branch=branch,
                                      quadrature=quadrature)
    return model, potential, result, state


@pytest.fixture(scope="session")
def schrodinger_run():
    return run_ladder(SCHRODINGER)


@pytest.fixture(scope="session")
def pseudo_run():
    return run_ladder(PSEUDORELATIVISTIC)


@pytest.fixture(scope="session")
def dirac_upper_run():
    return run_ladder(DIRAC, UPPER)


@pytest.fixture(scope="session")
def dirac_lower_run():
    return run_ladder(DIRAC, LOWER)


@pytest.fixture(scope="session")
def schrodinger_refinement():
    """Schrodinger ladders at n = 48, 64, 96 (L = 16) without route quadrature."""
    return {n: run_ladder(SCHRODINGER, n=n, quadrature=False) for n in (48, 64, 96)}


@pytest.fixture
def rng():
    return np.random.default_rng(12345)
