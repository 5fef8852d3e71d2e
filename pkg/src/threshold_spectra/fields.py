"""Periodic cubic grids, scalar/spinor fields and the unitary lattice Fourier transform.

Position nodes sit at ``x_j = -L/2 + j h`` so the origin is a node; momentum
nodes are ``p_k = 2 pi k / L`` stored in native FFT order (``k = 0, 1, ...,
n/2-1, -n/2, ..., -1`` per axis).  The forward transform approximates

    f^(p) = (2 pi)^(-3/2) \\int e^{-i p.x} f(x) dx

by a Riemann sum, so ``<f, g>_pos == <f^, g^>_mom`` exactly on the lattice.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
import scipy.fft as sfft

from .errors import ContractViolation, DomainError

POSITION = "position"
MOMENTUM = "momentum"

_TWO_PI_32 = (2.0 * np.pi) ** 1.5


def fft_workers():
    """Thread count for scipy.fft, overridable through THRESHOLD_SPECTRA_THREADS."""
    raw = os.environ.get("THRESHOLD_SPECTRA_THREADS")
    return int(raw) if raw else 1


@dataclass(frozen=True)
class Grid3:
    n: int
    box_length: float

    def __post_init__(self):
        if self.n < 8 or self.n % 2:
            raise ContractViolation(f"grid needs an even n >= 8, got {self.n}")
        if not self.box_length > 0:
            raise ContractViolation(f"box_length must be positive, got {self.box_length}")

    @property
    def spacing(self):
        return self.box_length / self.n

    @property
    def dp(self):
        return 2.0 * np.pi / self.box_length

    @property
    def cell_volume(self):
        return self.spacing**3

    @property
    def momentum_cell_volume(self):
        return self.dp**3

    @property
    def shape(self):
        return (self.n, self.n, self.n)

    @property
    def x(self):
        return -0.5 * self.box_length + self.spacing * np.arange(self.n)

    @property
    def p(self):
        return self.dp * _kint(self.n)

    def position_axes(self):
        """Sparse (broadcastable) coordinate arrays X, Y, Z."""
        return _position_axes(self.n, self.box_length)

    def momentum_axes(self):
        return _momentum_axes(self.n, self.box_length)

    def radius(self):
        """|x| at every position node."""
        return _radius(self.n, self.box_length)

    def momentum_magnitude(self):
        """|p| at every momentum node (FFT order); the zero node is index (0, 0, 0)."""
        return _pmag(self.n, self.box_length)


@lru_cache(maxsize=8)
def _kint(n):
    return np.fft.fftfreq(n, d=1.0 / n).round().astype(int)


@lru_cache(maxsize=8)
def _position_axes(n, box_length):
    x = -0.5 * box_length + (box_length / n) * np.arange(n)
    axes = np.meshgrid(x, x, x, indexing="ij", sparse=True)
    for a in axes:
        a.setflags(write=False)
    return tuple(axes)


@lru_cache(maxsize=8)
def _momentum_axes(n, box_length):
    p = (2.0 * np.pi / box_length) * _kint(n)
    axes = np.meshgrid(p, p, p, indexing="ij", sparse=True)
    for a in axes:
        a.setflags(write=False)
    return tuple(axes)


@lru_cache(maxsize=8)
def _radius(n, box_length):
    X, Y, Z = _position_axes(n, box_length)
    r = np.sqrt(X**2 + Y**2 + Z**2)
    r.setflags(write=False)
    return r


@lru_cache(maxsize=8)
def _pmag(n, box_length):
    PX, PY, PZ = _momentum_axes(n, box_length)
    p = np.sqrt(PX**2 + PY**2 + PZ**2)
    p.setflags(write=False)
    return p


@lru_cache(maxsize=8)
def _phase_sign(n):
    # e^{-i p_k x_0} with x_0 = -L/2 is (-1)^k per axis
    s = np.where(_kint(n) % 2 == 0, 1.0, -1.0)
    out = s[:, None, None] * s[None, :, None] * s[None, None, :]
    out.setflags(write=False)
    return out


@dataclass(frozen=True, eq=False)
class Field:
    """Complex samples on a grid; ``values`` has shape (components, n, n, n)."""

    grid: Grid3
    values: np.ndarray
    representation: str = POSITION

    def __post_init__(self):
        vals = np.array(self.values, dtype=complex)
        if vals.ndim == 3:
            vals = vals[None]
        if vals.shape[1:] != self.grid.shape or vals.shape[0] not in (1, 4):
            raise ContractViolation(
                f"field of shape {vals.shape} does not fit grid {self.grid.shape} "
                "with 1 or 4 components"
            )
        if self.representation not in (POSITION, MOMENTUM):
            raise ContractViolation(f"unknown representation {self.representation!r}")
        if not np.all(np.isfinite(vals)):
            raise ContractViolation("field contains NaN or Inf")
        vals.setflags(write=False)
        object.__setattr__(self, "values", vals)

    @property
    def components(self):
        return self.values.shape[0]

    @property
    def is_spinor(self):
        return self.components == 4

    def with_values(self, values, representation=None):
        return Field(self.grid, values, representation or self.representation)

    def scaled(self, c):
        return self.with_values(c * self.values)

    def __add__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values + other.values)

    def __sub__(self, other):
        _check_compatible(self, other)
        return self.with_values(self.values - other.values)

    def pointwise_norm(self):
        """Pointwise C^4 Euclidean norm (or |.| for scalars), shape (n, n, n)."""
        return np.sqrt(np.sum(np.abs(self.values) ** 2, axis=0))

    def measure(self):
        if self.representation == POSITION:
            return self.grid.cell_volume
        return self.grid.momentum_cell_volume


def zeros(grid, components=1, representation=POSITION):
    return Field(grid, np.zeros((components,) + grid.shape, complex), representation)


def from_function(grid, func):
    """Sample a scalar ``func(X, Y, Z)`` on the position nodes."""
    X, Y, Z = grid.position_axes()
    return Field(grid, np.broadcast_to(func(X, Y, Z), grid.shape), POSITION)


def forward_array(values, grid):
    """Forward lattice transform of a (components, n, n, n) array."""
    out = sfft.fftn(values, axes=(-3, -2, -1), workers=fft_workers())
    out *= (grid.cell_volume / _TWO_PI_32) * _phase_sign(grid.n)
    return out


def inverse_array(values, grid):
    out = sfft.ifftn(values * _phase_sign(grid.n), axes=(-3, -2, -1), workers=fft_workers())
    out *= grid.momentum_cell_volume * grid.n**3 / _TWO_PI_32
    return out


def fourier(field, direction="forward"):
    if direction == "forward":
        if field.representation != POSITION:
            raise ContractViolation("forward transform needs a position-space field")
        return Field(field.grid, forward_array(field.values, field.grid), MOMENTUM)
    if direction == "inverse":
        if field.representation != MOMENTUM:
            raise ContractViolation("inverse transform needs a momentum-space field")
        return Field(field.grid, inverse_array(field.values, field.grid), POSITION)
    raise ContractViolation(f"direction must be 'forward' or 'inverse', got {direction!r}")


def lq_norm(field, q):
    """Lattice L_q norm of the pointwise C^4 norm; ``q=np.inf`` gives the max."""
    if q < 1:
        raise DomainError(f"L_q norm needs q >= 1, got {q}")
    pw = field.pointwise_norm()
    if np.isinf(q):
        return float(pw.max())
    return float((np.sum(pw**q) * field.measure()) ** (1.0 / q))


def componentwise_norm(field, q):
    """The (sum_i ||phi_i||_q^q)^(1/q) variant; equals lq_norm at q = 2."""
    if q < 1 or np.isinf(q):
        raise DomainError(f"componentwise norm needs finite q >= 1, got {q}")
    per = np.sum(np.abs(field.values) ** q, axis=(1, 2, 3)) * field.measure()
    return float(np.sum(per) ** (1.0 / q))


def inner(a, b):
    """Lattice approximation of \\int <a(x), b(x)> dx, conjugate-linear in ``a``."""
    _check_compatible(a, b)
    return complex(np.vdot(a.values, b.values) * a.measure())


def _check_compatible(a, b):
    if a.grid != b.grid:
        raise ContractViolation("fields live on different grids")
    if a.representation != b.representation:
        raise ContractViolation("fields are in different representations")
    if a.components != b.components:
        raise ContractViolation("fields have different component counts")
