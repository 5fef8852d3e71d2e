"""Lippmann-Schwinger reconstruction of phi_E, threshold states and the resonance test.

Momentum-space states use the R^3 symbol sampled on the lattice
(``phi^ = lambda (T(p) - E)^{-1} f^``, zero node set to 0 at a threshold).
Position-space states use the isolated-box resolvent, which equals the free-space
kernel for targets within ``L/4`` of the origin; a second position route sums the
closed-form threshold kernels directly over the support of ``V``.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from . import fields, specfun
from .errors import ContractViolation, DomainError, InvalidTestFunction
from .fields import MOMENTUM, POSITION, Field
from .kinetic import (
    BETA_MINUS,
    BETA_PLUS,
    DIRAC,
    ISOLATED,
    PERIODIC,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    ResolventMultiplier,
    relativistic_excess,
)

EIGENVALUE = "eigenvalue"
RESONANCE = "resonance"


def source_field(potential, mu):
    """f = V^{1/2} mu."""
    return mu.with_values(potential.sqrt_values(mu.grid) * mu.values)


def reconstruct_phi(model, potential, window, mu, coupling, boundary=ISOLATED):
    """phi_E = lambda (T - E)^{-1} V^{1/2} mu in position space."""
    window.validate(model)
    if window.at_threshold:
        raise DomainError("use build_threshold_state at the threshold")
    f = source_field(potential, mu)
    mult = ResolventMultiplier(model, mu.grid, window, boundary)
    vals = fields.inverse_array(mult.apply(fields.forward_array(f.values, mu.grid)), mu.grid)
    return Field(mu.grid, coupling * vals, POSITION)


def phi_momentum(model, potential, window, mu, coupling):
    """phi^_E = lambda (T(p) - E)^{-1} f^(p) sampled on the momentum lattice."""
    f_hat = fields.fourier(source_field(potential, mu))
    mult = ResolventMultiplier(model, mu.grid, window, PERIODIC)
    return Field(mu.grid, coupling * mult.apply(f_hat.values), MOMENTUM)


def self_consistency(potential, phi, mu):
    """|| V^{1/2} phi / ||V^{1/2} phi|| - mu ||_2 after phase alignment."""
    g = potential.sqrt_values(phi.grid) * phi.values
    nrm = np.sqrt(np.sum(np.abs(g) ** 2) * phi.grid.cell_volume)
    if nrm == 0:
        return float(np.sqrt(np.sum(np.abs(mu.values) ** 2) * mu.grid.cell_volume))
    g = g / nrm
    ov = np.vdot(g, mu.values)
    if abs(ov) > 0:
        g = g * (ov / abs(ov))
    return float(np.sqrt(np.sum(np.abs(g - mu.values) ** 2) * mu.grid.cell_volume))


@dataclass
class ThresholdState:
    model: object
    branch: str
    lambda_c: float
    f0: Field
    phi_momentum: Field
    phi_position: Field
    quadrature_nodes: np.ndarray
    quadrature_values: np.ndarray
    route_discrepancy: float
    classification: str | None = None
    criterion_value: complex | None = None
    criterion_threshold: float | None = None
    meta: dict = field(default_factory=dict)


def build_threshold_state(model, potential, mu0, lambda_c, branch=UPPER, subsample=64, seed=0,
                          quadrature=True):
    """Threshold state phi_0 (or phi_{-2m}) from the limit vector mu0."""
    norm = fields.lq_norm(mu0, 2)
    if abs(norm - 1.0) > 1e-6:
        raise ContractViolation(f"mu0 must have unit L2 norm, got {norm}")
    grid = mu0.grid
    window = EnergyWindow.threshold(model, branch)
    f0 = source_field(potential, mu0)
    f_hat = fields.forward_array(f0.values, grid)
    raw = ResolventMultiplier(model, grid, window, PERIODIC)
    phi_hat = Field(grid, lambda_c * raw.apply(f_hat), MOMENTUM)
    iso = ResolventMultiplier(model, grid, window, ISOLATED)
    phi_pos = Field(grid, lambda_c * fields.inverse_array(iso.apply(f_hat), grid), POSITION)

    nodes = np.zeros((0, 3), dtype=int)
    quad_vals = np.zeros((0, model.components), complex)
    discrepancy = float("nan")
    if quadrature:
        nodes = quadrature_subsample(grid, subsample, seed)
        quad_vals = lambda_c * kernel_quadrature(model, window, f0, nodes)
        fft_vals = phi_pos.values[:, nodes[:, 0], nodes[:, 1], nodes[:, 2]].T
        discrepancy = float(np.linalg.norm(fft_vals - quad_vals) / np.linalg.norm(quad_vals))
    return ThresholdState(
        model=model, branch=branch, lambda_c=float(lambda_c), f0=f0, phi_momentum=phi_hat,
        phi_position=phi_pos, quadrature_nodes=nodes, quadrature_values=quad_vals,
        route_discrepancy=discrepancy,
        meta={"zero_node": "phi_momentum at p = 0 set to 0", "position_route": "isolated-box resolvent"},
    )


def quadrature_subsample(grid, count, seed=0):
    """Pseudo-random nodes with h/2 < |x| < L/4 (the isolated resolvent's range)."""
    r = grid.radius()
    cand = np.argwhere((r > 0.5 * grid.spacing) & (r < 0.25 * grid.box_length))
    rng = np.random.default_rng(seed)
    pick = rng.choice(len(cand), size=min(count, len(cand)), replace=False)
    return cand[np.sort(pick)]


def _threshold_profile(model, window, grid):
    """Radial profile(s) of the threshold kernel and the self-cell integrals."""
    z, _ = specfun.kernel_parameters(model, window)
    h = grid.spacing
    if model.kind == SCHRODINGER:
        return (lambda r: 1.0 / (4.0 * np.pi * r)), specfun.coulomb_self_cell(h)
    m = model.mass
    if model.kind == PSEUDORELATIVISTIC:

        def prof(r):
            return (
                m / (4.0 * np.pi * r)
                + specfun.relativistic_free_kernel(r, m)
                + m * m * specfun.pseudo_threshold_correction(r, m)
            )

        cell = (
            m * specfun.coulomb_self_cell(h)
            + specfun.radial_self_cell(None, h, moment=lambda rho: specfun.relativistic_free_moment(rho, m))
            + m * m * specfun.radial_self_cell(
                None, h, moment=lambda rho: specfun.pseudo_threshold_correction_moment(rho, m)
            )
        )
        return prof, cell
    return None, specfun.coulomb_self_cell(h)


def kernel_quadrature(model, window, f, nodes):
    """sum_j G(x_i - x_j) f_j h^3 over the support of f, at the given nodes.

    The singular j = i term uses the exact cell integral of the kernel (the odd
    Dirac part integrates to zero over the cell).
    """
    grid = f.grid
    h3 = grid.cell_volume
    supp = np.argwhere(np.any(f.values != 0, axis=0))
    fv = f.values[:, supp[:, 0], supp[:, 1], supp[:, 2]]  # (c, s)
    x = grid.x
    xs = x[supp]  # (s, 3)
    prof, cell = _threshold_profile(model, window, grid)
    out = np.zeros((len(nodes), model.components), complex)
    for k, node in enumerate(nodes):
        d = x[node][None, :] - xs
        r = np.sqrt(np.sum(d * d, axis=1))
        self_mask = r == 0
        rs = np.where(self_mask, 1.0, r)
        if model.kind != DIRAC:
            w = np.where(self_mask, cell, prof(rs) * h3)
            out[k, 0] = np.sum(w * fv[0])
            continue
        z, nu = specfun.kernel_parameters(model, window)
        a, b = specfun.dirac_kernel_parts(rs, nu)
        a = np.where(self_mask, cell, a * h3)
        b = np.where(self_mask, 0.0, b * h3)
        m = model.mass
        from .kinetic import dirac_apply

        # sum_j [a_j (m beta + z) + i b_j alpha.d_j] f_j
        dx, dy, dz = (1j * b * d[:, i] for i in range(3))
        mass_part = dirac_apply(a * fv, 0.0, 0.0, 0.0, m, z)
        kin_part = np.stack([
            dz * fv[2] + (dx - 1j * dy) * fv[3],
            (dx + 1j * dy) * fv[2] - dz * fv[3],
            dz * fv[0] + (dx - 1j * dy) * fv[1],
            (dx + 1j * dy) * fv[0] - dz * fv[1],
        ])
        out[k] = np.sum(mass_part + kin_part, axis=1)
    return out


def critical_projection(model, branch):
    if model.kind != DIRAC:
        return None
    return BETA_PLUS if branch == UPPER else BETA_MINUS


def resonance_criterion(state, potential, tol_c=1e-2):
    """c = int V phi_0 (beta_+ / beta_- projected for Dirac); resonance iff |c| is not small.

    The threshold is tol_c * ||V||_1 * sup_{supp V} |phi_0|.
    """
    phi = state.phi_position
    grid = phi.grid
    v = potential.values(grid)
    proj = critical_projection(state.model, state.branch)
    vals = phi.values
    if proj is not None:
        vals = np.tensordot(proj, vals, axes=(1, 0))
    integ = np.sum(v * vals, axis=(1, 2, 3)) * grid.cell_volume
    c = complex(integ[0]) if integ.shape[0] == 1 else integ
    local = float(np.max(np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))[v > 0])) if np.any(v > 0) else 0.0
    thr = tol_c * potential.l1_norm(grid) * local
    size = float(np.linalg.norm(np.atleast_1d(c)))
    state.criterion_value = c
    state.criterion_threshold = thr
    state.classification = RESONANCE if size > thr else EIGENVALUE
    return state.classification


def gaussian_test_function(grid, center=(0.0, 0.0, 0.0), width=1.0, components=1, component=0):
    X, Y, Z = grid.position_axes()
    cx, cy, cz = center
    g = np.exp(-((X - cx) ** 2 + (Y - cy) ** 2 + (Z - cz) ** 2) / (2.0 * width * width))
    vals = np.zeros((components,) + grid.shape, complex)
    vals[component] = g
    return Field(grid, vals, POSITION)


def _check_decay(psi, rel=1e-10):
    v = psi.pointwise_norm()
    peak = v.max()
    boundary = max(v[0].max(), v[-1].max(), v[:, 0].max(), v[:, -1].max(), v[:, :, 0].max(), v[:, :, -1].max())
    if peak == 0 or boundary > rel * peak:
        raise InvalidTestFunction("test function has not decayed at the box boundary")


def weak_residual(state, model, potential, test_pack, phi=None):
    """max_psi |<phi, T psi> - lambda_c <phi, V psi>| / (|<phi, T psi>| + lambda_c |<phi, V psi>|).

    ``phi`` defaults to the stored position-space threshold state; T psi is evaluated
    spectrally so the pairing is the distributional one.
    """
    phi = state.phi_position if phi is None else phi
    grid = phi.grid
    window = EnergyWindow.threshold(model, state.branch)
    v = potential.values(grid)
    worst = 0.0
    for psi in test_pack:
        if psi.grid != grid or psi.components != phi.components:
            raise ContractViolation("test function does not match the state")
        _check_decay(psi)
        t_psi = _apply_kinetic(model, window, psi)
        a = fields.inner(phi, t_psi)
        b = state.lambda_c * fields.inner(phi, psi.with_values(v * psi.values))
        denom = abs(a) + abs(b)
        if denom == 0:
            continue
        worst = max(worst, abs(a - b) / denom)
    return worst


def _apply_kinetic(model, window, psi):
    """(T - E_thr) psi spectrally (E_thr = 0 upper, -2m lower)."""
    g = psi.grid
    hat = fields.forward_array(psi.values, g)
    pmag = g.momentum_magnitude()
    if model.kind == SCHRODINGER:
        out = hat * pmag**2
    elif model.kind == PSEUDORELATIVISTIC:
        out = hat * relativistic_excess(pmag**2, model.mass)
    else:
        from .kinetic import dirac_apply

        px, py, pz = g.momentum_axes()
        shift = -window.energy  # T + 2m on the lower branch
        out = dirac_apply(hat, px, py, pz, model.mass, -model.mass + shift)
    return Field(g, fields.inverse_array(out, g), POSITION)


def far_field_exponent(phi, r_min, r_max, component_mask=None):
    """Least-squares slope of log|phi| against log r over r_min < r < r_max."""
    r = phi.grid.radius()
    vals = phi.values if component_mask is None else np.tensordot(component_mask, phi.values, axes=(1, 0))
    amp = np.sqrt(np.sum(np.abs(vals) ** 2, axis=0))
    sel = (r > r_min) & (r < r_max) & (amp > 0)
    slope, _ = np.polyfit(np.log(r[sel]), np.log(amp[sel]), 1)
    return float(slope)


def matrix_holder_check(rng, grid_shape, q, r, s, trials=10, components=4):
    """Count violations of ||A g||_q <= || |A|_op ||_r ||g||_s on random fields (unit cell measure)."""
    violations = 0
    worst = 0.0

    def lnorm(x, p):
        return float(np.max(x)) if np.isinf(p) else float(np.sum(x**p) ** (1.0 / p))

    for _ in range(trials):
        A = rng.standard_normal(grid_shape + (components, components)) + 1j * rng.standard_normal(
            grid_shape + (components, components)
        )
        g = rng.standard_normal(grid_shape + (components,)) + 1j * rng.standard_normal(grid_shape + (components,))
        Ag = np.einsum("...ij,...j->...i", A, g)
        lhs = lnorm(np.linalg.norm(Ag, axis=-1), q)
        opn = np.linalg.norm(A, ord=2, axis=(-2, -1))
        rhs = lnorm(opn, r) * lnorm(np.linalg.norm(g, axis=-1), s)
        worst = max(worst, lhs / rhs)
        if lhs > rhs * (1 + 1e-12):
            violations += 1
    return violations, worst
