import pytest

from threshold_spectra import diagnostics
from threshold_spectra.errors import ContractViolation
from threshold_spectra.fields import Grid3
from threshold_spectra.kinetic import (
    DIRAC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    KineticModel,
)


@pytest.mark.parametrize("suite", ["bessel", "fw"])
def test_cheap_suites_pass(suite):
    reports = diagnostics.run_suite(suite, diagnostics.SuiteConfig(samples=200, bessel_points=2000))
    assert reports
    for rep in reports:
        assert rep.passed, rep.as_dict()
        assert len(rep.inputs_digest) == 16


def test_unknown_suite():
    with pytest.raises(ContractViolation):
        diagnostics.run_suite("nope")


def test_digest_is_deterministic_and_sensitive():
    a = diagnostics.digest({"n": 64, "E": -1.0})
    assert a == diagnostics.digest({"E": -1.0, "n": 64})
    assert a != diagnostics.digest({"n": 64, "E": -0.5})


def test_reports_are_reproducible():
    cfg = diagnostics.SuiteConfig(samples=100, bessel_points=500)
    first = [r.as_dict() for r in diagnostics.run_suite("fw", cfg)]
    second = [r.as_dict() for r in diagnostics.run_suite("fw", cfg)]
    assert first == second


@pytest.mark.parametrize("kind,tol", [(SCHRODINGER, 1e-6), (DIRAC, 1e-6)])
def test_small_grid_duality(kind, tol):
    grid = Grid3(32, 16.0)
    sigma = 2 * grid.spacing
    nodes = diagnostics.duality_nodes(grid, r_min=1.0, count=8)
    worst, errs = diagnostics.duality_check(KineticModel(kind), EnergyWindow(UPPER, -1.0), grid, sigma, nodes)
    assert len(errs) == len(nodes)
    assert worst < tol
