import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from threshold_spectra import fields
from threshold_spectra.errors import ContractViolation, DomainError
from threshold_spectra.fields import MOMENTUM, Field, Grid3


def random_field(rng, grid, components=1):
    shape = (components,) + grid.shape
    return Field(grid, rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


grids = st.builds(Grid3, st.sampled_from([8, 10, 12, 16, 20, 24]), st.floats(1.0, 40.0))


def test_grid_validation():
    with pytest.raises(ContractViolation):
        Grid3(7, 1.0)
    with pytest.raises(ContractViolation):
        Grid3(6, 1.0)
    with pytest.raises(ContractViolation):
        Grid3(8, 0.0)


def test_grid_nodes_and_momentum_bound():
    g = Grid3(16, 8.0)
    assert g.x[0] == pytest.approx(-4.0)
    assert g.x[8] == pytest.approx(0.0)
    assert g.spacing == pytest.approx(0.5)
    assert g.momentum_magnitude().max() <= np.sqrt(3) * np.pi * g.n / g.box_length + 1e-12


def test_gaussian_is_self_dual():
    g = Grid3(64, 16.0)
    f = fields.from_function(g, lambda x, y, z: np.exp(-0.5 * (x**2 + y**2 + z**2)))
    fh = fields.fourier(f)
    exact = np.exp(-0.5 * g.momentum_magnitude() ** 2)
    assert np.max(np.abs(fh.values[0] - exact)) < 1e-6


def test_real_even_function_has_real_transform():
    g = Grid3(32, 16.0)
    f = fields.from_function(g, lambda x, y, z: np.exp(-0.3 * (x**2 + 2 * y**2 + z**2)))
    fh = fields.fourier(f)
    assert np.linalg.norm(fh.values.imag) < 1e-10 * np.linalg.norm(fh.values)


@settings(max_examples=20, deadline=None)
@given(grid=grids, seed=st.integers(0, 2**31), components=st.sampled_from([1, 4]))
def test_round_trip_identity(grid, seed, components):
    f = random_field(np.random.default_rng(seed), grid, components)
    back = fields.fourier(fields.fourier(f), "inverse")
    assert fields.lq_norm(back - f, 2) <= 1e-12 * fields.lq_norm(f, 2)


@settings(max_examples=20, deadline=None)
@given(grid=grids, seed=st.integers(0, 2**31))
def test_parseval(grid, seed):
    rng = np.random.default_rng(seed)
    f, g = random_field(rng, grid), random_field(rng, grid)
    lhs = fields.inner(f, g)
    rhs = fields.inner(fields.fourier(f), fields.fourier(g))
    assert abs(lhs - rhs) <= 1e-10 * abs(fields.lq_norm(f, 2) * fields.lq_norm(g, 2))


def test_forward_requires_position_field(rng):
    g = Grid3(8, 1.0)
    fh = Field(g, rng.standard_normal((1,) + g.shape), MOMENTUM)
    with pytest.raises(ContractViolation):
        fields.fourier(fh)
    with pytest.raises(ContractViolation):
        fields.fourier(random_field(rng, g), "inverse")


def test_constant_field_norm():
    g = Grid3(8, 3.0)
    f = Field(g, np.full((1,) + g.shape, 2.0 - 1.0j))
    assert fields.lq_norm(f, 2) == pytest.approx(abs(2.0 - 1.0j) * 27.0**0.5)


def test_spinor_norm_reduces_to_scalar(rng):
    g = Grid3(8, 2.0)
    phi = random_field(rng, g)
    spinor = Field(g, np.concatenate([phi.values, np.zeros((3,) + g.shape)]))
    for q in (1, 2, 3.5, np.inf):
        assert fields.lq_norm(spinor, q) == pytest.approx(fields.lq_norm(phi, q), rel=1e-14)


def test_gaussian_l2_norm():
    g = Grid3(64, 16.0)
    f = fields.from_function(g, lambda x, y, z: np.exp(-0.5 * (x**2 + y**2 + z**2)))
    assert abs(fields.lq_norm(f, 2) ** 2 - np.pi**1.5) < 1e-6


def test_lq_norm_rejects_small_q(rng):
    with pytest.raises(DomainError):
        fields.lq_norm(random_field(rng, Grid3(8, 1.0)), 0.5)


@settings(max_examples=25, deadline=None)
@given(seed=st.integers(0, 2**31), q=st.one_of(st.floats(1.0, 8.0), st.just(np.inf)))
def test_lq_norm_monotone_under_domination(seed, q):
    rng = np.random.default_rng(seed)
    g = Grid3(8, 2.0)
    big = random_field(rng, g, 4)
    shrink = rng.uniform(0.0, 1.0, g.shape)
    small = big.with_values(big.values * shrink)
    assert fields.lq_norm(small, q) <= fields.lq_norm(big, q) * (1 + 1e-12)


def test_norm_variants_agree_at_q2(rng):
    f = random_field(rng, Grid3(8, 2.0), 4)
    assert fields.componentwise_norm(f, 2) == pytest.approx(fields.lq_norm(f, 2), rel=1e-12)


def test_inner_properties(rng):
    g = Grid3(8, 2.0)
    f, h = random_field(rng, g, 4), random_field(rng, g, 4)
    ff = fields.inner(f, f)
    assert ff.imag == 0.0 and ff.real > 0
    assert ff.real == pytest.approx(fields.lq_norm(f, 2) ** 2)
    assert fields.inner(f, h) == pytest.approx(np.conj(fields.inner(h, f)))
    with pytest.raises(ContractViolation):
        fields.inner(f, random_field(rng, Grid3(10, 2.0), 4))


def test_fields_are_immutable_and_finite(rng):
    f = random_field(rng, Grid3(8, 1.0))
    with pytest.raises(ValueError):
        f.values[0, 0, 0, 0] = 1.0
    bad = np.zeros((1, 8, 8, 8))
    bad[0, 1, 1, 1] = np.nan
    with pytest.raises(ContractViolation):
        Field(Grid3(8, 1.0), bad)
