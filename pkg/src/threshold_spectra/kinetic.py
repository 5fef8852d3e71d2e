"""Kinetic symbols T(p), Dirac algebra, Foldy-Wouthuysen matrices and resolvent multipliers.

Pointwise functions take a single 3-vector ``p``.  Lattice work goes through
:class:`ResolventMultiplier`, which applies ``(T(p) - E)^{-1}`` (or a
box-adapted version of it, see ``boundary``) to momentum-space arrays without
ever materialising 4x4 matrices per node.

Dirac matrices use the standard representation: ``beta = diag(1, 1, -1, -1)``
and ``alpha_i`` built from Pauli blocks, so ``beta_+`` / ``beta_-`` project onto
the upper / lower 2-spinors.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import ContractViolation, DomainError

SCHRODINGER = "schrodinger"
PSEUDORELATIVISTIC = "pseudorelativistic"
DIRAC = "dirac"
KINDS = (SCHRODINGER, PSEUDORELATIVISTIC, DIRAC)

UPPER = "upper"
LOWER = "lower"

# boundary realisations of (T - E)^{-1} on the periodic box
ISOLATED = "isolated"
PERIODIC = "periodic"

SIGMA = np.array(
    [
        [[0, 1], [1, 0]],
        [[0, -1j], [1j, 0]],
        [[1, 0], [0, -1]],
    ],
    dtype=complex,
)
IDENTITY4 = np.eye(4, dtype=complex)
BETA = np.diag([1, 1, -1, -1]).astype(complex)
ALPHA = np.array([np.block([[np.zeros((2, 2)), s], [s, np.zeros((2, 2))]]) for s in SIGMA])
BETA_PLUS = 0.5 * (IDENTITY4 + BETA)
BETA_MINUS = 0.5 * (IDENTITY4 - BETA)
# anticommutes with beta and every alpha_i; maps T_D - E to -(T_D + 2m + E)
MIRROR = 1j * BETA @ ALPHA[0] @ ALPHA[1] @ ALPHA[2]


@dataclass(frozen=True)
class KineticModel:
    kind: str
    mass: float = 1.0

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ContractViolation(f"unknown kinetic model {self.kind!r}; expected one of {KINDS}")
        if self.kind != SCHRODINGER and not self.mass > 0:
            raise DomainError(f"{self.kind} model needs a positive mass, got {self.mass}")

    @property
    def components(self):
        return 4 if self.kind == DIRAC else 1

    @property
    def branches(self):
        return (UPPER, LOWER) if self.kind == DIRAC else (UPPER,)

    def threshold(self, branch=UPPER):
        if branch == UPPER:
            return 0.0
        if branch == LOWER and self.kind == DIRAC:
            return -2.0 * self.mass
        raise DomainError(f"{self.kind} model has no {branch!r} threshold")


@dataclass(frozen=True)
class EnergyWindow:
    """An energy off the spectrum, or the threshold of ``branch`` when ``at_threshold``."""

    branch: str
    energy: float
    at_threshold: bool = False

    @classmethod
    def threshold(cls, model, branch=UPPER):
        return cls(branch, model.threshold(branch), True)

    def validate(self, model):
        if self.branch not in model.branches:
            raise DomainError(f"branch {self.branch!r} not available for {model.kind}")
        if self.at_threshold:
            if self.energy != model.threshold(self.branch):
                raise DomainError("threshold window energy does not match the branch edge")
            return self
        E = self.energy
        if model.kind == DIRAC:
            if not -2.0 * model.mass < E < 0.0:
                raise DomainError(f"Dirac energy must lie in (-2m, 0), got {E}")
        elif not E < 0.0:
            raise DomainError(f"energy must be negative for {model.kind}, got {E}")
        return self

    def distance_to_threshold(self, model):
        return abs(self.energy - model.threshold(self.branch))


def nu_e(model, energy):
    """Decay rate of the resolvent kernel: sqrt(|E|) or sqrt(|m^2 - (E+m)^2|)."""
    if model.kind == SCHRODINGER:
        return float(np.sqrt(abs(energy)))
    m = model.mass
    return float(np.sqrt(abs(m * m - (energy + m) ** 2)))


def alpha_dot(p):
    p = np.asarray(p, dtype=float)
    return np.tensordot(p, ALPHA, axes=(0, 0))


def relativistic_excess(p2, m):
    """sqrt(p^2 + m^2) - m written as p^2 / (sqrt(p^2 + m^2) + m); exact for small p."""
    return p2 / (np.sqrt(p2 + m * m) + m)


def kinetic_symbol(model, p):
    p = np.asarray(p, dtype=float)
    p2 = float(p @ p)
    if model.kind == SCHRODINGER:
        return p2
    m = model.mass
    if model.kind == PSEUDORELATIVISTIC:
        return float(relativistic_excess(p2, m))
    return alpha_dot(p) + m * BETA - m * IDENTITY4


def fw_coefficients(pnorm, m):
    omega = np.sqrt(pnorm**2 + m * m)
    a_plus = np.sqrt(0.5 * (1.0 + m / omega))
    # 1 - m/omega cancels for small p
    a_minus = pnorm / np.sqrt(2.0 * omega * (omega + m))
    return a_plus, a_minus


def fw_matrix(p, m, inverse=False):
    """Foldy-Wouthuysen matrix a_+ + beta alpha.(p/|p|) a_- (minus sign for the inverse)."""
    if not m > 0:
        raise DomainError(f"FW transform needs m > 0, got {m}")
    p = np.asarray(p, dtype=float)
    pn = float(np.sqrt(p @ p))
    a_plus, a_minus = fw_coefficients(pn, m)
    if pn == 0.0:
        return IDENTITY4.copy()
    sign = -1.0 if inverse else 1.0
    return a_plus * IDENTITY4 + sign * a_minus * (BETA @ alpha_dot(p / pn))


def _check_resolvent_energy(model, window):
    window.validate(model)
    if window.at_threshold:
        raise DomainError("energy lies in the spectrum; use zero_energy_multiplier at the threshold")


def resolvent_multiplier(model, p, window):
    """(T(p) - E)^{-1}; for Dirac through the FW-diagonalised form beta_+ h^+ + beta_- h^-."""
    _check_resolvent_energy(model, window)
    E = window.energy
    if model.kind != DIRAC:
        return 1.0 / (kinetic_symbol(model, p) - E)
    m = model.mass
    p2 = float(np.dot(p, p))
    omega = float(np.sqrt(p2 + m * m))
    h_plus = 1.0 / (relativistic_excess(p2, m) - E)
    h_minus = 1.0 / (-omega - m - E)
    diag = h_plus * BETA_PLUS + h_minus * BETA_MINUS
    return fw_matrix(p, m, inverse=True) @ diag @ fw_matrix(p, m)


def zero_energy_multiplier(model, p, branch=UPPER):
    """T(p)^{-1} (upper) or (T(p) + 2m)^{-1} (lower, Dirac); 0 at p = 0 by convention."""
    p = np.asarray(p, dtype=float)
    p2 = float(p @ p)
    shift = 0.0 if branch == UPPER else 2.0 * model.mass
    if branch == LOWER and model.kind != DIRAC:
        raise DomainError("the lower threshold exists only for the Dirac model")
    if p2 == 0.0:
        return 0.0 if model.kind != DIRAC else np.zeros((4, 4), complex)
    if model.kind != DIRAC:
        return 1.0 / kinetic_symbol(model, p)
    m = model.mass
    # (alpha.p + m beta + z)^{-1} = (alpha.p + m beta - z) ... with z = m - shift; use the
    # identity (alpha.p + m beta + z)/(p^2 + m^2 - z^2) for T + shift = alpha.p + m beta - z
    z = m - shift
    return (alpha_dot(p) + m * BETA + z * IDENTITY4) / (p2 + m * m - z * z)


def dirac_apply(values, px, py, pz, mass, z):
    """(alpha.p + m beta + z) psi for psi of shape (4, ...), vectorised over nodes."""
    u0, u1, l0, l1 = values
    # sigma.p acting on a 2-spinor (a, b)
    sp_l0 = pz * l0 + (px - 1j * py) * l1
    sp_l1 = (px + 1j * py) * l0 - pz * l1
    sp_u0 = pz * u0 + (px - 1j * py) * u1
    sp_u1 = (px + 1j * py) * u0 - pz * u1
    return np.stack(
        [
            sp_l0 + (mass + z) * u0,
            sp_l1 + (mass + z) * u1,
            sp_u0 + (z - mass) * l0,
            sp_u1 + (z - mass) * l1,
        ]
    )


def dirac_spectral_apply(values, px, py, pz, mass, f_plus, f_minus):
    """Apply f(T_D(p)) = f_+ P_+ + f_- P_- with P_pm the spectral projectors of T_D(p)."""
    omega = np.sqrt(px**2 + py**2 + pz**2 + mass * mass)
    d_psi = dirac_apply(values, px, py, pz, mass, 0.0)
    return 0.5 * (f_plus + f_minus) * values + (0.5 * (f_plus - f_minus) / omega) * d_psi


def truncated_yukawa_hat(pmag, nu, radius):
    """Fourier transform of e^{-nu r}/(4 pi r) restricted to r < radius.

    Equals the full Yukawa multiplier 1/(p^2 + nu^2) minus the far-tail part; the
    truncated kernel reproduces the free-space resolvent exactly for separations
    below ``radius`` and has no periodic images inside the box when
    ``radius <= L/2``.
    """
    p = np.asarray(pmag, dtype=float)
    R = radius
    with np.errstate(divide="ignore", invalid="ignore"):
        sinc_r = np.where(p > 0, np.sin(p * R) / np.where(p > 0, p, 1.0), R)
        if nu == 0.0:
            out = np.where(p > 0, (1.0 - np.cos(p * R)) / np.where(p > 0, p, 1.0) ** 2, 0.5 * R * R)
        else:
            damp = np.exp(-nu * R)
            out = (1.0 - damp * (np.cos(p * R) + nu * sinc_r)) / (p * p + nu * nu)
    return out


class ResolventMultiplier:
    """Lattice realisation of (T - E)^{-1} acting on momentum-space arrays.

    ``boundary`` selects how the free resolvent is carried onto the periodic box:

    * ``"periodic"`` - the symbol sampled on the lattice (the torus operator).  At a
      threshold the p = 0 node is set to 0.  This is the exact inverse of the lattice
      kinetic operator, and ``phi^ = lambda (T - E)^{-1} f^`` on it reproduces the
      momentum-space formulas verbatim.
    * ``"isolated"`` - the free-space (R^3) resolvent for sources and targets within
      ``box_length/4`` of the origin, obtained by truncating the Yukawa factor at
      ``R = box_length/2``.  Needed near thresholds, where periodic images and the
      zero mode would otherwise dominate.
    """

    def __init__(self, model, grid, window, boundary=ISOLATED):
        window.validate(model)
        if boundary not in (ISOLATED, PERIODIC):
            raise ContractViolation(f"unknown boundary {boundary!r}")
        self.model = model
        self.grid = grid
        self.window = window
        self.boundary = boundary
        self.truncation_radius = 0.5 * grid.box_length
        self._build()

    def _build(self):
        model, grid, window = self.model, self.grid, self.window
        E = window.energy
        m = model.mass
        pmag = grid.momentum_magnitude()
        p2 = pmag**2
        self.z = E + m if model.kind != SCHRODINGER else None
        nu = nu_e(model, E)
        self.nu = nu
        if self.boundary == ISOLATED:
            if model.kind == PSEUDORELATIVISTIC and not -2.0 * m < E <= 0.0:
                raise DomainError("isolated pseudorelativistic resolvent needs -2m < E <= 0")
            y_hat = truncated_yukawa_hat(pmag, nu, self.truncation_radius)
            if model.kind == SCHRODINGER:
                self.scalar = y_hat
            elif model.kind == PSEUDORELATIVISTIC:
                inv_omega = 1.0 / np.sqrt(p2 + m * m)
                z = self.z
                self.scalar = inv_omega + (z + z * z * inv_omega) * y_hat
            else:
                self.scalar = y_hat
        else:
            with np.errstate(divide="ignore"):
                if model.kind == SCHRODINGER:
                    s = 1.0 / (p2 - E)
                elif model.kind == PSEUDORELATIVISTIC:
                    s = 1.0 / (relativistic_excess(p2, m) - E)
                else:
                    s = 1.0 / (p2 + nu * nu)
            if window.at_threshold:
                s = np.where(pmag > 0, s, 0.0)
            self.scalar = s

    @property
    def is_dirac(self):
        return self.model.kind == DIRAC

    def apply(self, hat_values):
        """Multiply a (components, n, n, n) momentum array by the resolvent."""
        if not self.is_dirac:
            return hat_values * self.scalar
        px, py, pz = self.grid.momentum_axes()
        return dirac_apply(hat_values * self.scalar, px, py, pz, self.model.mass, self.z)

    def matrix_at(self, index):
        """The multiplier at one lattice node, as a scalar or 4x4 matrix (for checks)."""
        s = self.scalar[index]
        if not self.is_dirac:
            return s
        px, py, pz = (a.reshape(-1)[i] for a, i in zip(self.grid.momentum_axes(), index))
        p = np.array([px, py, pz])
        return s * (alpha_dot(p) + self.model.mass * BETA + self.z * IDENTITY4)
