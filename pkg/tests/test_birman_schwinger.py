import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from oracles import LAMBDA_C_EXACT, nystrom_alpha, secular_lambda

from threshold_spectra import fields
from threshold_spectra.birman_schwinger import (
    BSOperator,
    PotentialSpec,
    apply_bs,
    energy_ladder,
    extrapolate_threshold,
    hamiltonian_ground_state,
    lambda_curve,
    leading_eigenpair,
    norm_convergence_check,
)
from threshold_spectra.errors import (
    ContractViolation,
    DegenerateOperator,
    DomainError,
    InconsistencyError,
    IterationLimitError,
)
from threshold_spectra.fields import Field, Grid3
from threshold_spectra.kinetic import (
    DIRAC,
    LOWER,
    PERIODIC,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    KineticModel,
)

SCH, PSR, DIR = KineticModel(SCHRODINGER), KineticModel(PSEUDORELATIVISTIC, 1.0), KineticModel(DIRAC, 1.0)
SMALL = Grid3(32, 8.0)


def random_mu(rng, grid, components):
    shape = (components,) + grid.shape
    return Field(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def test_potential_validation():
    with pytest.raises(ContractViolation):
        PotentialSpec(form="coulomb")
    with pytest.raises(DomainError):
        PotentialSpec(depth=-1.0)
    with pytest.raises(DomainError):
        PotentialSpec(form="table", table=-np.ones((8, 8, 8)))


def test_square_well_volume_fractions():
    g = Grid3(64, 16.0)
    pot = PotentialSpec()
    v = pot.values(g)
    assert v.min() >= 0 and v.max() == pytest.approx(1.0)
    assert pot.l1_norm(g) == pytest.approx(4 * np.pi / 3, rel=2e-3)


def test_zero_potential_gives_zero_operator(rng):
    op = BSOperator(SCH, PotentialSpec(depth=0.0), EnergyWindow(UPPER, -1.0), SMALL)
    out = apply_bs(op, random_mu(rng, SMALL, 1))
    assert np.all(out.values == 0)
    with pytest.raises(DegenerateOperator):
        leading_eigenpair(op)
    report = norm_convergence_check(SCH, PotentialSpec(depth=0.0), [-1.0, -0.5, -0.25], SMALL)
    assert report["gaps"] == [0.0, 0.0]


def test_rayleigh_quotient_matches_radial_oracle():
    grid = Grid3(64, 8.0)
    op = BSOperator(SCH, PotentialSpec(), EnergyWindow(UPPER, -1.0), grid)
    alpha_oracle, r_nodes, profile = nystrom_alpha(-1.0)
    res = leading_eigenpair(op)
    assert abs(res.alpha / alpha_oracle - 1) < 5e-3
    # oracle eigenfunction sampled on the lattice gives a Rayleigh quotient within the same band
    mu = np.interp(grid.radius(), r_nodes, profile) * op.sqrt_v
    v = op.to_vector(Field(grid, mu))
    rq = np.vdot(v, op.matvec(v)).real / np.vdot(v, v).real
    assert rq <= res.alpha * (1 + 1e-12)
    assert abs(rq / alpha_oracle - 1) < 5e-3


@settings(max_examples=10, deadline=None)
@given(seed=st.integers(0, 2**31), model=st.sampled_from([SCH, PSR, DIR]), c=st.complex_numbers(max_magnitude=10))
def test_linearity_and_self_adjointness(seed, model, c):
    rng = np.random.default_rng(seed)
    op = BSOperator(model, PotentialSpec(), EnergyWindow(UPPER, -0.3), SMALL)
    f = random_mu(rng, SMALL, model.components)
    g = random_mu(rng, SMALL, model.components)
    kf, kg = apply_bs(op, f), apply_bs(op, g)
    lin = apply_bs(op, f.scaled(c))
    assert np.allclose(lin.values, c * kf.values, atol=1e-12 * (1 + abs(c)) * np.abs(kf.values).max())
    lhs, rhs = fields.inner(kf, g), fields.inner(f, kg)
    scale = fields.lq_norm(f, 2) * fields.lq_norm(g, 2)
    assert abs(lhs - rhs) < 1e-10 * scale


@pytest.mark.parametrize("model", [SCH, PSR, DIR])
@pytest.mark.parametrize("method", ["dense", "lanczos"])
def test_leading_eigenpair_contract(model, method):
    op = BSOperator(model, PotentialSpec(), EnergyWindow(UPPER, -0.5), SMALL)
    res = leading_eigenpair(op, tol=1e-10, method=method)
    assert np.linalg.norm(res.vector) == pytest.approx(1.0)
    assert np.linalg.norm(op.matvec(res.vector) - res.alpha * res.vector) <= 10 * 1e-10 * res.alpha
    k = int(np.argmax(np.abs(res.vector)))
    assert abs(res.vector[k].imag) < 1e-14 and res.vector[k].real > 0
    again = np.vdot(res.vector, op.matvec(res.vector)).real
    assert abs(again - res.alpha) < 1e-10 * res.alpha
    assert res.multiplicity == (2 if model.kind == DIRAC else 1)


def test_methods_agree():
    op = BSOperator(SCH, PotentialSpec(), EnergyWindow(UPPER, -0.5), SMALL)
    alphas = [leading_eigenpair(op, method=m).alpha for m in ("dense", "lanczos", "power")]
    assert np.ptp(alphas) < 1e-9 * alphas[0]


def test_iteration_limit_error():
    op = BSOperator(SCH, PotentialSpec(), EnergyWindow(UPPER, -0.5), SMALL)
    with pytest.raises(IterationLimitError) as info:
        leading_eigenpair(op, method="power", max_iter=2)
    assert info.value.residual > 0
    with pytest.raises(DomainError):
        leading_eigenpair(op, tol=0.0)


def test_ladder_validation():
    with pytest.raises(DomainError):
        lambda_curve(SCH, PotentialSpec(), [-0.5, -1.0, -0.25], SMALL)
    with pytest.raises(DomainError):
        energy_ladder(SCH, UPPER, 0.5)
    assert energy_ladder(DIR, LOWER, -1.0, 0.5, 3) == [-1.0, -1.5, -1.75]


def test_schrodinger_curve(schrodinger_run):
    _, _, res, _ = schrodinger_run
    lam = np.array(res.lambdas)
    assert np.all(np.diff(lam) < 0)  # lambda falls toward lambda_c as E rises to 0
    assert np.all(np.diff(res.alphas) > 0)
    assert min(res.overlaps) > 0.9
    exact = secular_lambda(res.energies[-1])
    assert abs(lam[-1] / exact - 1) < 1.5e-2
    assert abs(res.lambda_c / LAMBDA_C_EXACT - 1) < 1e-2
    assert res.eigen_relation_residual < 5e-3
    assert all(b < a for a, b in zip(res.cauchy_residuals[:-1], res.cauchy_residuals[1:]))


def test_curve_grid_control(schrodinger_refinement):
    fine = np.array(schrodinger_refinement[96][2].lambdas)
    coarse = np.array(schrodinger_refinement[64][2].lambdas)
    assert np.max(np.abs(coarse / fine - 1)) < 1e-2


def test_non_monotone_curve_is_rejected():
    res = lambda_curve(SCH, PotentialSpec(), [-1.0, -0.5, -0.25, -0.125], SMALL)
    res.alphas = res.alphas[::-1]
    with pytest.raises(InconsistencyError):
        extrapolate_threshold(res)


@pytest.mark.parametrize("model,branch", [(SCH, UPPER), (DIR, UPPER), (DIR, LOWER)])
def test_norm_gaps_decrease(model, branch):
    energies = energy_ladder(model, branch, -1.0, 0.5, 6 if model.kind == SCHRODINGER else 4)
    report = norm_convergence_check(model, PotentialSpec(), energies, SMALL, branch=branch)
    assert report["decreasing"]
    assert all(g > 0 for g in report["gaps"])


def test_periodic_hamiltonian_duality_pseudo():
    grid = Grid3(32, 8.0)
    pot = PotentialSpec()
    E, phi, resid = hamiltonian_ground_state(PSR, pot, 1.3, grid)
    assert E < 0 and resid < 1e-8
    op = BSOperator(PSR, pot, EnergyWindow(UPPER, E), grid, boundary=PERIODIC)
    assert abs(leading_eigenpair(op).alpha * 1.3 - 1) < 1e-6
    assert fields.lq_norm(phi, 2) == pytest.approx(1.0)
