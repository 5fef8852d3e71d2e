"""Momentum-space weights w(p), their admissibility, weighted distances and convergence certificates.

Admissibility conditions (chi_< = 1 on |p| < 1, chi_> = 1 on |p| >= 1, |.| the operator norm):

* Schrodinger:        w chi_< / p^2 in L_2   and   w chi_> / p^2 in L_inf
* pseudorelativistic: w chi_< / p^2 in L_2   and   w chi_> / p   in L_inf
* Dirac (literal):    |w| chi_< / p^2 in L_2 and   |w| chi_> / p in L_inf
* Dirac (branch-wise, in the Foldy-Wouthuysen frame w~ = U w U^{-1}): the critical
  block (beta_+ upper, beta_- lower) obeys the pseudorelativistic pair, the other
  block needs only ||w~ beta chi_<||_2 < inf and ||w~ beta chi_> / p||_inf < inf.

The literal Dirac condition rejects every |T_D|^s (its norm tends to (2m)^s at
p = 0); the branch-wise pair is the sharper sufficient condition and decides.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ContractViolation, InadmissibleWeight
from .fields import MOMENTUM
from .kinetic import (
    ALPHA,
    BETA,
    BETA_MINUS,
    BETA_PLUS,
    DIRAC,
    PERIODIC,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    EnergyWindow,
    ResolventMultiplier,
    dirac_spectral_apply,
    fw_matrix,
    relativistic_excess,
)
from .threshold_state import phi_momentum

POWER = "power"
CUSTOM = "custom"


@dataclass(frozen=True, eq=False)
class Weight:
    """``power``: |T(p)|^s (|T_D + 2m|^s on the lower Dirac branch); ``custom``: an evaluator.

    A custom ``evaluator(p)`` takes momenta of shape (..., 3) and returns either a
    scalar array (...) or matrices (..., 4, 4).
    """

    kind: str = POWER
    s: float = 1.0
    evaluator: object = None
    valued: str = "scalar"
    label: str = ""

    def __post_init__(self):
        if self.kind not in (POWER, CUSTOM):
            raise ContractViolation(f"unknown weight kind {self.kind!r}")
        if self.kind == CUSTOM and not callable(self.evaluator):
            raise ContractViolation("custom weight needs a callable evaluator")
        if self.valued not in ("scalar", "matrix"):
            raise ContractViolation("valued must be 'scalar' or 'matrix'")

    @property
    def name(self):
        if self.label:
            return self.label
        return f"power_s{self.s:g}" if self.kind == POWER else "custom"


def power_spectral_pair(model, pmag, s, branch=UPPER):
    """Eigenvalue functions of the power weight: scalar for scalar models, (f_+, f_-) for Dirac."""
    pmag = np.asarray(pmag, dtype=float)
    if model.kind == SCHRODINGER:
        return pmag ** (2.0 * s)
    m = model.mass
    omega = np.sqrt(pmag**2 + m * m)
    excess = relativistic_excess(pmag**2, m)
    if model.kind == PSEUDORELATIVISTIC:
        return excess**s
    if branch == UPPER:
        return excess**s, (omega + m) ** s
    return (omega + m) ** s, excess**s


def _power_small_p_exponent(model, s):
    # |w| ~ p^a near 0 on the block that is divided by p^2
    return 2.0 * s


def _power_large_p(model, s):
    # (growth exponent of |w|, allowed exponent)
    if model.kind == SCHRODINGER:
        return 2.0 * s, 2.0
    return s, 1.0


@dataclass
class AdmissibilityVerdict:
    model: str
    admissible: bool
    small_p_ok: bool
    large_p_ok: bool
    method: str
    small_p_diagnostic: float
    large_p_diagnostic: float
    literal: dict | None = None
    notes: list = field(default_factory=list)

    def as_dict(self):
        return {
            "model": self.model,
            "admissible": self.admissible,
            "small_p_ok": self.small_p_ok,
            "large_p_ok": self.large_p_ok,
            "method": self.method,
            "small_p_diagnostic": self.small_p_diagnostic,
            "large_p_diagnostic": self.large_p_diagnostic,
            "literal": self.literal,
            "notes": list(self.notes),
        }


def check_admissible(weight, model, branch=UPPER, seed=0):
    """Decide the admissibility conditions for ``weight`` and ``model``.

    Power weights are decided exactly by radial exponents; custom weights by a
    refinement ladder near p = 0 and a growth-rate fit at large p.
    """
    if weight.kind == POWER:
        return _power_verdict(weight, model, branch)
    return _numeric_verdict(weight, model, branch, seed)


def _power_verdict(weight, model, branch):
    s = weight.s
    a = _power_small_p_exponent(model, s)
    # int_0^1 p^{2a-4} p^2 dp < inf  <=>  2a - 2 > -1
    small_ok = 2.0 * a - 2.0 > -1.0
    grow, allowed = _power_large_p(model, s)
    large_ok = grow <= allowed
    notes = []
    literal = None
    if model.kind == DIRAC:
        # operator norm of |T_D|^s tends to (2m)^s at p = 0, so |w|/p^2 is never L_2 near 0
        literal = {"small_p_ok": False, "large_p_ok": large_ok, "admissible": False}
        notes.append("literal matrix-norm condition fails at small p for every s; branch-wise condition decides")
    if model.kind == SCHRODINGER and 0.5 < s <= 2.0 and not (small_ok and large_ok):
        notes.append("p^{2s} with 1 < s <= 2 grows faster than p^2 and violates the large-p condition")
    return AdmissibilityVerdict(
        model=model.kind, admissible=bool(small_ok and large_ok), small_p_ok=bool(small_ok),
        large_p_ok=bool(large_ok), method="analytic", small_p_diagnostic=2.0 * a - 2.0,
        large_p_diagnostic=grow - allowed, literal=literal, notes=notes,
    )


def _directions(rng, count=24):
    v = rng.standard_normal((count, 3))
    return v / np.linalg.norm(v, axis=1, keepdims=True)


def _evaluate_norms(weight, model, p_vecs, branch):
    """Block norms along p: (critical, noncritical) for Dirac, (norm, norm) otherwise."""
    w = np.asarray(weight.evaluator(p_vecs))
    if model.kind != DIRAC:
        if w.ndim == p_vecs.ndim + 1:
            raise ContractViolation("matrix-valued weight for a scalar model")
        nrm = np.abs(w)
        return nrm, nrm, nrm
    if w.ndim == p_vecs.ndim - 1:
        w = w[..., None, None] * np.eye(4)
    full = np.linalg.norm(w, ord=2, axis=(-2, -1))
    crit_proj, other_proj = (BETA_PLUS, BETA_MINUS) if branch == UPPER else (BETA_MINUS, BETA_PLUS)
    crit = np.empty(full.shape)
    other = np.empty(full.shape)
    for idx in np.ndindex(full.shape):
        p = p_vecs[idx]
        wt = fw_matrix(p, model.mass) @ w[idx] @ fw_matrix(p, model.mass, inverse=True)
        crit[idx] = np.linalg.norm(wt @ crit_proj, 2)
        other[idx] = np.linalg.norm(wt @ other_proj, 2)
    return crit, other, full


def _radial_increments(values, p):
    """Increments of int |v|^2 p^2 dp over decades (trapezoid in log p)."""
    integrand = values**2 * p**3  # p^2 dp = p^3 d(log p)
    logp = np.log(p)
    return np.array([np.trapezoid(integrand[i:i + 9], logp[i:i + 9]) for i in range(0, len(p) - 1, 8)])


def _converging(increments):
    tail = increments[-4:]
    total = np.sum(increments)
    if total == 0:
        return True, 0.0
    ratios = tail[1:] / np.maximum(tail[:-1], 1e-300)
    return bool(np.all(ratios < 0.5) and tail[-1] < 1e-3 * total), float(np.max(ratios))


def _numeric_verdict(weight, model, branch, seed):
    rng = np.random.default_rng(seed)
    dirs = _directions(rng)
    # decades 1e-8 .. 1 with 8 log-steps per decade (ordered large -> small p)
    p_small = np.geomspace(1.0, 1e-8, 8 * 8 + 1)
    p_large = np.geomspace(1.0, 1e6, 6 * 8 + 1)
    small_vecs = p_small[None, :, None] * dirs[:, None, :]
    large_vecs = p_large[None, :, None] * dirs[:, None, :]
    crit_s, other_s, full_s = (np.max(x, axis=0) for x in _evaluate_norms(weight, model, small_vecs, branch))
    crit_l, other_l, full_l = (np.max(x, axis=0) for x in _evaluate_norms(weight, model, large_vecs, branch))
    denom = 2 if model.kind == SCHRODINGER else 1

    def small_test(vals, power):
        inc = _radial_increments(vals / p_small**power, p_small)
        return _converging(np.abs(inc))

    def large_test(vals):
        ratio = vals / p_large**denom
        tail = ratio[-17:]
        slope = np.polyfit(np.log(p_large[-17:]), np.log(np.maximum(tail, 1e-300)), 1)[0]
        return bool(slope <= 1e-3 and np.all(np.isfinite(ratio))), float(slope)

    notes = ["numeric proxy: refinement ladder near p = 0, growth fit at large p"]
    if model.kind != DIRAC:
        sm_ok, sm_diag = small_test(crit_s, 2)
        lg_ok, lg_diag = large_test(crit_l)
        literal = None
    else:
        c_ok, c_diag = small_test(crit_s, 2)
        o_ok, o_diag = small_test(other_s, 0)
        sm_ok, sm_diag = c_ok and o_ok, max(c_diag, o_diag)
        lc_ok, lc_diag = large_test(crit_l)
        lo_ok, lo_diag = large_test(other_l)
        lg_ok, lg_diag = lc_ok and lo_ok, max(lc_diag, lo_diag)
        lit_small, _ = small_test(full_s, 2)
        lit_large, _ = large_test(full_l)
        literal = {"small_p_ok": lit_small, "large_p_ok": lit_large, "admissible": lit_small and lit_large}
    return AdmissibilityVerdict(
        model=model.kind, admissible=bool(sm_ok and lg_ok), small_p_ok=bool(sm_ok), large_p_ok=bool(lg_ok),
        method="numeric", small_p_diagnostic=sm_diag, large_p_diagnostic=lg_diag, literal=literal, notes=notes,
    )


# -- lattice application ----------------------------------------------------------


def apply_weight(weight, model, values, grid, branch=UPPER):
    """w(p) acting on momentum samples of shape (components, n, n, n); zero node excluded."""
    pmag = grid.momentum_magnitude()
    components = values.shape[0]
    if weight.kind == POWER:
        w = power_spectral_pair(model, pmag, weight.s, branch)
        if model.kind == DIRAC:
            px, py, pz = grid.momentum_axes()
            out = dirac_spectral_apply(values, px, py, pz, model.mass, w[0], w[1])
        else:
            out = values * w
    else:
        px, py, pz = grid.momentum_axes()
        pv = np.stack(np.broadcast_arrays(px, py, pz), axis=-1)
        w = np.asarray(weight.evaluator(pv))
        if w.ndim == 5:
            if components == 1:
                raise ContractViolation("matrix-valued weight applied to a scalar field")
            out = np.einsum("xyzij,jxyz->ixyz", w, values)
        else:
            out = values * w
    out = np.array(out)
    out[:, 0, 0, 0] = 0.0
    return out


def weighted_distance(weight, model, phi_a, phi_b, branch=UPPER):
    """|| w (phi^_A - phi^_B) ||_2 on the momentum lattice (zero node excluded)."""
    for f in (phi_a, phi_b):
        if f.representation != MOMENTUM:
            raise ContractViolation("weighted_distance needs momentum-space fields")
    if phi_a.grid != phi_b.grid or phi_a.components != phi_b.components:
        raise ContractViolation("fields do not match")
    diff = apply_weight(weight, model, phi_a.values - phi_b.values, phi_a.grid, branch)
    return float(np.sqrt(np.sum(np.abs(diff) ** 2) * phi_a.grid.momentum_cell_volume))


def weighted_norm(weight, model, phi, branch=UPPER):
    w = apply_weight(weight, model, phi.values, phi.grid, branch)
    return float(np.sqrt(np.sum(np.abs(w) ** 2) * phi.grid.momentum_cell_volume))


def proof_bound_factors(weight, model, window, grid):
    """(|| |w (T - E)^{-1}| chi_< ||_2, || |w (T - E)^{-1}| chi_> ||_inf) on the lattice.

    |.| is the pointwise operator norm; the zero node is excluded.
    """
    pmag = grid.momentum_magnitude()
    E = window.energy
    if weight.kind == POWER:
        w = power_spectral_pair(model, pmag, weight.s, window.branch)
        if model.kind == DIRAC:
            m = model.mass
            omega = np.sqrt(pmag**2 + m * m)
            with np.errstate(divide="ignore", invalid="ignore"):
                hp = np.abs(w[0] / (relativistic_excess(pmag**2, m) - E))
                hm = np.abs(w[1] / (-omega - m - E))
            pointwise = np.maximum(hp, hm)
        else:
            t = pmag**2 if model.kind == SCHRODINGER else relativistic_excess(pmag**2, model.mass)
            with np.errstate(divide="ignore", invalid="ignore"):
                pointwise = np.abs(w / (t - E))
    else:
        mult = ResolventMultiplier(model, grid, window, PERIODIC)
        px, py, pz = grid.momentum_axes()
        pv = np.stack(np.broadcast_arrays(px, py, pz), axis=-1)
        w = np.asarray(weight.evaluator(pv))
        if model.kind != DIRAC:
            pointwise = np.abs(w * mult.scalar)
        else:
            p_vec = pv.reshape(-1, 3)
            sym = mult.scalar.reshape(-1, 1, 1) * (
                np.einsum("ki,ijl->kjl", p_vec, ALPHA) + model.mass * BETA + mult.z * np.eye(4))
            if w.ndim == 3:
                prod = w.reshape(-1, 1, 1) * sym
            else:
                prod = w.reshape(-1, 4, 4) @ sym
            pointwise = np.linalg.svd(prod, compute_uv=False)[:, 0].reshape(grid.shape)
    pointwise = np.where(pmag > 0, pointwise, 0.0)
    small = float(np.sqrt(np.sum(np.where(pmag < 1.0, pointwise**2, 0.0)) * grid.momentum_cell_volume))
    large = float(np.max(np.where(pmag >= 1.0, pointwise, 0.0)))
    return small, large


@dataclass
class ConvergenceReport:
    weight: str
    model: str
    branch: str
    verdict: AdmissibilityVerdict
    energies: list
    distances: list
    relative_distances: list
    smallp_factors: list
    largep_factors: list
    smallp_factor_threshold: float
    largep_factor_threshold: float
    reference_norm: float
    rungs_checked: int
    decreasing: bool
    floor: float
    passed: bool

    def table(self):
        return [
            {"E": E, "weighted_distance": d, "smallp_factor": s, "largep_factor": l}
            for E, d, s, l in zip(self.energies, self.distances, self.smallp_factors, self.largep_factors)
        ]


def certify_convergence(model, potential, weight, result, state, rungs=4, floor=5e-2):
    """d_n = || w (phi^_{E_n} - phi^_0) ||_2 along the ladder.

    Passes when d_n strictly decreases over the last ``rungs`` rungs and the
    last distance relative to || w phi^_0 ||_2 is below ``floor``.
    """
    branch = result.branch
    verdict = check_admissible(weight, model, branch)
    if not verdict.admissible:
        raise InadmissibleWeight(f"weight {weight.name} is not admissible for {model.kind}", verdict=verdict)
    grid = result.grid
    ref = state.phi_momentum
    ref_norm = weighted_norm(weight, model, ref, branch)
    distances, rel, small_f, large_f = [], [], [], []
    for E, mu, lam in zip(result.energies, result.mus, result.lambdas):
        window = EnergyWindow(branch, E)
        phi_hat = phi_momentum(model, potential, window, mu, lam)
        d = weighted_distance(weight, model, phi_hat, ref, branch)
        distances.append(d)
        rel.append(d / ref_norm if ref_norm > 0 else float("inf"))
        s, l = proof_bound_factors(weight, model, window, grid)
        small_f.append(s)
        large_f.append(l)
    s0, l0 = proof_bound_factors(weight, model, EnergyWindow.threshold(model, branch), grid)
    tail = distances[-rungs:]
    decreasing = bool(len(tail) == rungs and all(b < a for a, b in zip(tail[:-1], tail[1:])))
    passed = decreasing and rel[-1] < floor
    return ConvergenceReport(
        weight=weight.name, model=model.kind, branch=branch, verdict=verdict, energies=list(result.energies),
        distances=distances, relative_distances=rel, smallp_factors=small_f, largep_factors=large_f,
        smallp_factor_threshold=s0, largep_factor_threshold=l0, reference_norm=ref_norm, rungs_checked=rungs,
        decreasing=decreasing, floor=floor, passed=passed,
    )
