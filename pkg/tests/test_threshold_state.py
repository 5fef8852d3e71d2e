import numpy as np
import pytest
from oracles import resonance_integral

from threshold_spectra import fields
from threshold_spectra.birman_schwinger import (
    BSOperator,
    PotentialSpec,
    leading_eigenpair,
)
from threshold_spectra.errors import InvalidTestFunction
from threshold_spectra.fields import MOMENTUM, Field, Grid3
from threshold_spectra.kinetic import (
    BETA_MINUS,
    BETA_PLUS,
    MIRROR,
    PERIODIC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    KineticModel,
)
from threshold_spectra.threshold_state import (
    EIGENVALUE,
    RESONANCE,
    build_threshold_state,
    far_field_exponent,
    gaussian_test_function,
    matrix_holder_check,
    phi_momentum,
    reconstruct_phi,
    resonance_criterion,
    self_consistency,
    source_field,
    weak_residual,
)

SCH = KineticModel(SCHRODINGER)


def gaussian_pack(grid, components=1):
    pack = []
    for center in ((0, 0, 0), (0.5, 0, 0), (0, 0.7, -0.3)):
        for comp in range(components):
            pack.append(gaussian_test_function(grid, center, 0.7, components, comp))
    return pack


def test_reconstruct_zero_mu():
    g = Grid3(16, 8.0)
    phi = reconstruct_phi(SCH, PotentialSpec(), EnergyWindow(UPPER, -1.0), fields.zeros(g), 2.0)
    assert np.all(phi.values == 0)


def test_reconstruct_self_consistency():
    g = Grid3(64, 16.0)
    pot = PotentialSpec()
    window = EnergyWindow(UPPER, -0.25)
    op = BSOperator(SCH, pot, window, g)
    res = leading_eigenpair(op)
    phi = reconstruct_phi(SCH, pot, window, res.mu, 1.0 / res.alpha)
    assert self_consistency(pot, phi, res.mu) < 1e-3


def test_momentum_identity_on_torus():
    g = Grid3(32, 8.0)
    pot = PotentialSpec()
    window = EnergyWindow(UPPER, -0.25)
    op = BSOperator(SCH, pot, window, g, boundary=PERIODIC)
    res = leading_eigenpair(op)
    lam = 1.0 / res.alpha
    phi_hat = phi_momentum(SCH, pot, window, res.mu, lam)
    lhs = (g.momentum_magnitude() ** 2 + 0.25) * phi_hat.values
    f_hat = fields.fourier(source_field(pot, res.mu)).values
    assert np.max(np.abs(lhs - lam * f_hat)) < 1e-8 * np.max(np.abs(lhs))
    phi = fields.fourier(phi_hat, "inverse")
    v_phi_hat = fields.fourier(phi.with_values(pot.values(g) * phi.values)).values
    assert np.max(np.abs(lhs - lam * v_phi_hat)) < 1e-8 * np.max(np.abs(lhs))


def test_schrodinger_state_shape(schrodinger_run):
    model, pot, res, state = schrodinger_run
    g = state.phi_position.grid
    assert state.phi_momentum.values[:, 0, 0, 0] == pytest.approx(0.0)
    assert state.route_discrepancy < 2e-2
    slope = far_field_exponent(state.phi_position, 2.0, g.box_length / 4)
    assert abs(slope + 1) < 0.05
    assert fields.lq_norm(res.mu_0, 2) == pytest.approx(1.0)


def test_periodic_route_is_free_field_plus_background(schrodinger_run):
    _, _, _, state = schrodinger_run
    g = state.phi_position.grid
    per = fields.fourier(state.phi_momentum, "inverse").values[0]
    iso = state.phi_position.values[0]
    r = g.radius()
    sel = r < g.box_length / 4
    design = np.vstack([np.ones(sel.sum()), r[sel] ** 2]).T
    diff = (per - iso)[sel].real
    coef, *_ = np.linalg.lstsq(design, diff, rcond=None)
    charge = state.lambda_c * np.sum(state.f0.values[0]).real * g.cell_volume
    assert coef[1] == pytest.approx(charge / (6 * g.box_length**3), rel=1e-2)
    assert np.linalg.norm(diff - design @ coef) < 1e-3 * np.linalg.norm(iso[sel])


def test_dirac_far_field(dirac_upper_run):
    _, _, res, state = dirac_upper_run
    g = state.phi_position.grid
    assert res.multiplicities[-1] == 2
    upper = far_field_exponent(state.phi_position, 2.0, g.box_length / 4, BETA_PLUS)
    lower = far_field_exponent(state.phi_position, 2.0, g.box_length / 4, BETA_MINUS)
    assert abs(upper + 1) < 0.05
    assert abs(lower + 2) < 0.1


def test_resonance_classification(schrodinger_run):
    _, pot, _, state = schrodinger_run
    assert resonance_criterion(state, pot) == RESONANCE
    c = state.criterion_value
    assert abs(c.real / resonance_integral() - 1) < 5e-2
    assert abs(c) >= 10 * state.criterion_threshold


def test_odd_state_is_eigenvalue_path(schrodinger_run):
    _, pot, _, state = schrodinger_run
    X, _, _ = state.phi_position.grid.position_axes()
    odd = state.phi_position.with_values(X * np.exp(-state.phi_position.grid.radius() ** 2))
    probe = type(state)(**{**state.__dict__, "phi_position": odd})
    assert resonance_criterion(probe, pot) == EIGENVALUE
    assert abs(probe.criterion_value) < 1e-12


def test_doubling_potential_keeps_classification(schrodinger_run):
    _, pot, _, state = schrodinger_run
    resonance_criterion(state, pot)
    c1, t1 = state.criterion_value, state.criterion_threshold
    assert abs(c1) > 2 * t1
    probe = type(state)(**state.__dict__)
    assert resonance_criterion(probe, PotentialSpec(depth=2.0)) == RESONANCE
    assert probe.criterion_value == pytest.approx(2 * c1)


def test_weak_residual_and_controls(schrodinger_run, rng):
    model, pot, _, state = schrodinger_run
    g = state.phi_position.grid
    r0 = weak_residual(state, model, pot, gaussian_pack(g))
    assert r0 < 1e-2
    for pack in ([gaussian_test_function(g, (0, 0, 0), 0.7)], [gaussian_test_function(g, (0.6, -0.2, 0.1), 0.7)]):
        assert weak_residual(state, model, pot, pack) < 1e-2
    noise = Field(g, rng.standard_normal((1,) + g.shape))
    assert weak_residual(state, model, pot, gaussian_pack(g), phi=noise) > 10 * r0
    with pytest.raises(InvalidTestFunction):
        weak_residual(state, model, pot, [gaussian_test_function(g, (0, 0, 0), 4.0)])


def test_sources_converge_along_ladder(schrodinger_run):
    _, pot, res, state = schrodinger_run
    f0 = state.f0
    f0_hat = fields.fourier(f0)
    tail = res.mus[-5:]
    for q in (1, 2):
        d = [fields.lq_norm(source_field(pot, mu) - f0, q) for mu in tail]
        assert all(b < a for a, b in zip(d[:-1], d[1:]))
    for r in (2, np.inf):
        d = [fields.lq_norm(fields.fourier(source_field(pot, mu)) - f0_hat, r) for mu in tail]
        assert all(b < a for a, b in zip(d[:-1], d[1:]))


@pytest.mark.parametrize("q,r,s", [(1, 2, 2), (2, np.inf, 2), (1, np.inf, 1)])
def test_matrix_holder(q, r, s, rng):
    violations, worst = matrix_holder_check(rng, (6, 6, 6), q, r, s, trials=50)
    assert violations == 0 and worst <= 1.0


def test_dirac_lower_state_mirrors_upper_construction(dirac_lower_run):
    model, pot, res, state = dirac_lower_run
    mirrored_mu = res.mu_0.with_values(np.tensordot(MIRROR, res.mu_0.values, axes=(1, 0)))
    mirror_state = build_threshold_state(model, pot, mirrored_mu, -res.lambda_c, branch=UPPER, quadrature=False)
    for attr in ("phi_momentum", "phi_position"):
        conj = np.tensordot(MIRROR, getattr(state, attr).values, axes=(1, 0))
        other = getattr(mirror_state, attr).values
        assert np.linalg.norm(conj - other) < 1e-10 * np.linalg.norm(other)
    resonance_criterion(state, pot)
    assert state.classification == EIGENVALUE


def test_state_requires_unit_mu():
    g = Grid3(16, 8.0)
    mu = Field(g, np.ones((1,) + g.shape), MOMENTUM)
    with pytest.raises(ValueError):
        build_threshold_state(SCH, PotentialSpec(), mu.with_values(mu.values, "position"), 2.0)
