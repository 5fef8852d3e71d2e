"""Birman-Schwinger operators K_E = V^{1/2} (T - E)^{-1} V^{1/2}, coupling curves and thresholds.

``H = T - lambda V`` has eigenvalue ``E`` iff ``1/lambda`` is an eigenvalue of ``K_E``.
Operators act on vectors restricted to the support of ``V`` (the only place where
``mu = V^{1/2} phi`` can be non-zero).  ``coupling_sign = -1`` solves for the
largest eigenvalue of ``-K_E`` instead, i.e. the coupling of ``H = T + lambda V``;
this is the mirrored spectral problem that exchanges the two Dirac thresholds.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from functools import lru_cache

import numpy as np
from scipy.sparse.linalg import LinearOperator, eigsh, lobpcg, minres

from . import fields
from .errors import (
    ContractViolation,
    DegenerateOperator,
    DomainError,
    InconsistencyError,
    IterationLimitError,
)
from .fields import POSITION, Field, Grid3
from .kinetic import (
    ALPHA,
    BETA,
    DIRAC,
    IDENTITY4,
    ISOLATED,
    LOWER,
    UPPER,
    EnergyWindow,
    ResolventMultiplier,
    relativistic_excess,
)

SQUARE_WELL = "square_well"
GAUSSIAN = "gaussian"
TABLE = "table"

# dense assembly is used when the support dimension is at most this
DENSE_LIMIT = 4096
DEGENERACY_RTOL = 1e-7


@dataclass(frozen=True, eq=False)
class PotentialSpec:
    """Non-negative bounded potential.

    ``square_well``: ``depth`` on the ball of ``radius``; each lattice cell carries
    ``depth`` times the fraction of its volume inside the ball (``supersample``^3
    sub-cells).  ``gaussian``: ``depth * exp(-|x|^2 / (2 width^2))``.  ``table``:
    values sampled on the grid of the run.
    """

    form: str = SQUARE_WELL
    radius: float = 1.0
    depth: float = 1.0
    width: float = 1.0
    table: np.ndarray | None = None
    supersample: int = 8

    def __post_init__(self):
        if self.form not in (SQUARE_WELL, GAUSSIAN, TABLE):
            raise ContractViolation(f"unknown potential form {self.form!r}")
        if self.depth < 0 or not np.isfinite(self.depth):
            raise DomainError("potential depth must be finite and non-negative")
        if self.form == SQUARE_WELL and not self.radius > 0:
            raise DomainError("square well radius must be positive")
        if self.form == GAUSSIAN and not self.width > 0:
            raise DomainError("gaussian width must be positive")
        if self.form == TABLE:
            if self.table is None:
                raise ContractViolation("table potential needs sampled values")
            tab = np.array(self.table, dtype=float)
            if not np.all(np.isfinite(tab)) or np.any(tab < 0):
                raise DomainError("tabulated potential must be finite and non-negative")
            tab.setflags(write=False)
            object.__setattr__(self, "table", tab)
        if self.supersample < 1:
            raise ContractViolation("supersample must be >= 1")

    def values(self, grid):
        if self.form == TABLE:
            if self.table.shape != grid.shape:
                raise ContractViolation(f"table of shape {self.table.shape} does not match grid {grid.shape}")
            return self.table
        if self.form == SQUARE_WELL:
            return self.depth * _ball_fraction(grid.n, grid.box_length, self.radius, self.supersample)
        return self.depth * np.exp(-0.5 * (grid.radius() / self.width) ** 2)

    def sqrt_values(self, grid):
        return np.sqrt(self.values(grid))

    def l1_norm(self, grid):
        return float(np.sum(self.values(grid)) * grid.cell_volume)

    def sup_norm(self, grid):
        return float(np.max(self.values(grid)))

    def describe(self):
        out = {"form": self.form}
        if self.form == SQUARE_WELL:
            out.update(radius=self.radius, depth=self.depth, supersample=self.supersample)
        elif self.form == GAUSSIAN:
            out.update(width=self.width, depth=self.depth)
        return out


@lru_cache(maxsize=8)
def _ball_fraction(n, box_length, radius, sub):
    grid = Grid3(n, box_length)
    h = grid.spacing
    r = grid.radius()
    half_diag = 0.5 * np.sqrt(3.0) * h
    frac = np.where(r <= radius - half_diag, 1.0, 0.0)
    edge = np.argwhere((r > radius - half_diag) & (r < radius + half_diag))
    offs = (np.arange(sub) + 0.5) / sub - 0.5
    ox, oy, oz = (a.ravel() for a in np.meshgrid(offs, offs, offs, indexing="ij"))
    x = grid.x
    for i, j, k in edge:
        d2 = (x[i] + ox * h) ** 2 + (x[j] + oy * h) ** 2 + (x[k] + oz * h) ** 2
        frac[i, j, k] = np.count_nonzero(d2 < radius * radius) / sub**3
    frac.setflags(write=False)
    return frac


class BSOperator:
    """K_E on the lattice, acting on fields supported where V > 0."""

    def __init__(self, model, potential, window, grid, boundary=ISOLATED, coupling_sign=1):
        if coupling_sign not in (1, -1):
            raise ContractViolation("coupling_sign must be +1 or -1")
        self.model = model
        self.potential = potential
        self.window = window.validate(model)
        self.grid = grid
        self.boundary = boundary
        self.coupling_sign = coupling_sign
        self.multiplier = ResolventMultiplier(model, grid, window, boundary)
        self.sqrt_v = potential.sqrt_values(grid)
        self.support = self.sqrt_v > 0
        self.support_size = int(np.count_nonzero(self.support))
        self.components = model.components
        self._sq = self.sqrt_v[self.support]
        self._dense = None

    @property
    def dimension(self):
        return self.components * self.support_size

    # vector <-> field plumbing -------------------------------------------------
    def to_vector(self, mu):
        if mu.grid != self.grid or mu.representation != POSITION:
            raise ContractViolation("mu must be a position-space field on the operator grid")
        if mu.components != self.components:
            raise ContractViolation(f"mu has {mu.components} components, model needs {self.components}")
        return mu.values[:, self.support].ravel() * np.sqrt(self.grid.cell_volume)

    def to_field(self, vec):
        full = np.zeros((self.components,) + self.grid.shape, complex)
        full[:, self.support] = np.asarray(vec).reshape(self.components, self.support_size)
        return Field(self.grid, full / np.sqrt(self.grid.cell_volume), POSITION)

    # application ------------------------------------------------------------------
    def matvec(self, vec):
        """Apply K_E to a support vector (Euclidean coordinates, lattice-unitary)."""
        v = np.asarray(vec).reshape(self.components, self.support_size)
        full = np.zeros((self.components,) + self.grid.shape, complex)
        full[:, self.support] = v * self._sq
        out = fields.inverse_array(self.multiplier.apply(fields.forward_array(full, self.grid)), self.grid)
        res = out[:, self.support] * self._sq
        if not np.iscomplexobj(vec) and not self.multiplier.is_dirac:
            res = res.real
        return res.ravel()

    def apply(self, mu):
        return self.to_field(self.matvec(self.to_vector(mu)))

    def kernel_arrays(self):
        """Position kernel of the multiplier on lattice offsets (FFT order), scaled by h^3."""
        g = self.grid
        scale = g.n**3 * g.momentum_cell_volume / (2.0 * np.pi) ** 3 * g.cell_volume
        s = self.multiplier.scalar
        k0 = np.fft.ifftn(s) * scale
        if not self.multiplier.is_dirac:
            return (k0,)
        px, py, pz = g.momentum_axes()
        return (k0,) + tuple(np.fft.ifftn(pc * s) * scale for pc in (px, py, pz))

    def dense(self):
        """Assemble K_E on the support from the lattice kernel (identical to matvec)."""
        if self._dense is not None:
            return self._dense
        idx = np.argwhere(self.support)
        n = self.grid.n
        off = (idx[:, None, :] - idx[None, :, :]) % n
        outer_sq = self._sq[:, None] * self._sq[None, :]
        kernels = [k[off[..., 0], off[..., 1], off[..., 2]] * outer_sq for k in self.kernel_arrays()]
        if not self.multiplier.is_dirac:
            mat = kernels[0].real
        else:
            m, z = self.model.mass, self.multiplier.z
            ns = self.support_size
            mat = np.zeros((4 * ns, 4 * ns), complex)
            struct = [m * BETA + z * IDENTITY4] + list(ALPHA)
            for coeff, ker in zip(struct, kernels):
                for a in range(4):
                    for b in range(4):
                        if coeff[a, b] != 0:
                            mat[a * ns:(a + 1) * ns, b * ns:(b + 1) * ns] += coeff[a, b] * ker
            mat = 0.5 * (mat + mat.conj().T)
        self._dense = mat
        return mat

    def linear_operator(self, dense=None):
        sign = self.coupling_sign
        dtype = complex if self.multiplier.is_dirac else float
        if dense is not None:
            return LinearOperator((self.dimension,) * 2, matvec=lambda v: sign * (dense @ v), dtype=dtype)
        return LinearOperator((self.dimension,) * 2, matvec=lambda v: sign * self.matvec(v), dtype=dtype)


def apply_bs(op, mu):
    return op.apply(mu)


@dataclass
class EigenResult:
    alpha: float
    mu: Field
    vector: np.ndarray
    residual: float
    method: str
    multiplicity: int = 1
    basis: np.ndarray | None = None
    spectrum: np.ndarray | None = None


def _fix_phase(vec):
    k = int(np.argmax(np.abs(vec)))
    return vec * (np.abs(vec[k]) / vec[k])


def _choose_method(op, method):
    if method != "auto":
        return method
    return "dense" if op.dimension <= DENSE_LIMIT else "lanczos"


def leading_eigenpair(op, tol=1e-10, max_iter=2000, v0=None, method="auto", seed=0):
    """Largest eigenvalue alpha of coupling_sign * K_E with unit eigenvector mu.

    ``method``: ``lanczos`` (ARPACK on the matrix-free operator), ``dense`` (ARPACK
    on the assembled support matrix), ``power`` (plain power iteration, positive
    operators only) or ``auto``.  ``v0`` (support vector) warm-starts the solve
    and, for degenerate eigenvalues, selects the eigenvector closest to it.
    """
    if not tol > 0:
        raise DomainError("tol must be positive")
    if op.support_size == 0:
        raise DegenerateOperator("V vanishes identically; K_E = 0")
    method = _choose_method(op, method)
    rng = np.random.default_rng(seed)
    dtype = complex if op.multiplier.is_dirac else float
    if v0 is not None:
        v0 = np.asarray(v0)
        v0 = v0.astype(complex) if dtype is complex else v0.real.astype(float)
    start = v0 if v0 is not None else rng.standard_normal(op.dimension).astype(dtype)
    k = 2 if op.multiplier.is_dirac else 1
    if method == "power":
        alpha, vec = _power_iteration(lambda v: op.coupling_sign * op.matvec(v), start, tol, max_iter)
        basis, spectrum = vec[:, None], np.array([alpha])
    else:
        dense = op.dense() if method == "dense" else None
        lin = op.linear_operator(dense)
        if op.dimension <= k + 1:
            mat = op.coupling_sign * (dense if dense is not None else op.dense())
            w, v = np.linalg.eigh(mat)
            w, v = w[-k:], v[:, -k:]
        else:
            try:
                w, v = eigsh(lin, k=k, which="LA", tol=tol * 1e-2, v0=start, maxiter=max_iter)
            except Exception as exc:  # ARPACK no-convergence
                raise IterationLimitError(f"Lanczos did not converge: {exc}") from exc
        order = np.argsort(w)[::-1]
        w, v = w[order], v[:, order]
        alpha = float(w[0])
        close = np.abs(w - alpha) <= DEGENERACY_RTOL * max(abs(alpha), 1e-300)
        # ARPACK does not orthonormalise within a degenerate cluster
        basis, spectrum = np.linalg.qr(v[:, close])[0], w
        vec = v[:, 0]
        if v0 is not None and basis.shape[1] > 1:
            proj = basis @ (basis.conj().T @ v0)
            if np.linalg.norm(proj) > 0:
                vec = proj / np.linalg.norm(proj)
    if alpha == 0.0 or not np.any(vec):
        raise DegenerateOperator("leading eigenvalue is zero; K_E vanishes on the probed subspace")
    vec = _fix_phase(vec / np.linalg.norm(vec))
    if not op.multiplier.is_dirac:
        vec = vec.real
    resid_vec = op.coupling_sign * op.matvec(vec) - alpha * vec
    residual = float(np.linalg.norm(resid_vec))
    if residual > max(tol, 1e-12) * abs(alpha) * 10.0:
        raise IterationLimitError(
            f"eigenpair residual {residual:.3e} exceeds tolerance {tol:.1e}*alpha", residual=residual
        )
    return EigenResult(
        alpha=alpha,
        mu=op.to_field(vec),
        vector=vec,
        residual=residual,
        method=method,
        multiplicity=int(basis.shape[1]),
        basis=basis,
        spectrum=spectrum,
    )


def _power_iteration(apply, start, tol, max_iter):
    vec = start / np.linalg.norm(start)
    alpha = 0.0
    for _ in range(max_iter):
        w = apply(vec)
        new_alpha = float(np.real(np.vdot(vec, w)))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            raise DegenerateOperator("operator annihilates the iterate")
        vec_new = w / norm
        if abs(new_alpha - alpha) <= tol * abs(new_alpha) and np.linalg.norm(w - new_alpha * vec) <= 10 * tol * abs(new_alpha):
            return new_alpha, vec_new
        alpha, vec = new_alpha, vec_new
    raise IterationLimitError("power iteration hit max_iter", residual=float(np.linalg.norm(apply(vec) - alpha * vec)))


def operator_norm(apply, dim, dtype=float, tol=1e-8, max_iter=500, seed=0):
    """Operator norm of a self-adjoint map by power iteration on its square."""
    rng = np.random.default_rng(seed)
    vec = rng.standard_normal(dim).astype(dtype)
    vec /= np.linalg.norm(vec)
    est = 0.0
    for _ in range(max_iter):
        w = apply(apply(vec))
        norm = np.linalg.norm(w)
        if norm == 0.0:
            return 0.0
        new = float(np.sqrt(norm))
        vec = w / norm
        if abs(new - est) <= tol * new:
            return new
        est = new
    return est


# -- ladders and thresholds ---------------------------------------------------------


def energy_ladder(model, branch, first_energy, ratio=0.5, count=11):
    """Geometric ladder with distance to the branch threshold shrinking by ``ratio``."""
    thr = model.threshold(branch)
    gap = first_energy - thr
    if count < 1 or not 0 < ratio < 1:
        raise DomainError("ladder needs count >= 1 and 0 < ratio < 1")
    if (branch == UPPER and not gap < 0) or (branch == LOWER and not gap > 0):
        raise DomainError("first energy lies on the wrong side of the branch threshold")
    return [thr + gap * ratio**k for k in range(count)]


def _check_ladder(model, branch, energies):
    thr = model.threshold(branch)
    d = np.abs(np.asarray(energies, dtype=float) - thr)
    if len(d) < 1 or np.any(np.diff(d) >= 0):
        raise DomainError("energies must move strictly monotonically toward the branch threshold")


@dataclass
class ThresholdResult:
    model: object
    potential: PotentialSpec
    grid: Grid3
    branch: str
    boundary: str
    coupling_sign: int
    energies: list
    alphas: list
    lambdas: list
    mus: list
    residuals: list
    cauchy_residuals: list
    overlaps: list
    multiplicities: list
    lambda_c: float | None = None
    fit: dict = field(default_factory=dict)
    mu_0: Field | None = None
    alpha_zero: float | None = None
    lambda_c_direct: float | None = None
    eigen_relation_residual: float | None = None
    mu_0_source: str = "last rung"

    def table(self):
        rows = []
        for k, E in enumerate(self.energies):
            rows.append(
                {
                    "E": E,
                    "lambda": self.lambdas[k],
                    "alpha": self.alphas[k],
                    "mu_cauchy_residual": self.cauchy_residuals[k - 1] if k > 0 else float("nan"),
                }
            )
        return rows


def lambda_curve(model, potential, energies, grid, branch=UPPER, boundary=ISOLATED, coupling_sign=1,
                 tol=1e-10, max_iter=2000, method="auto", seed=0):
    """Leading eigenpairs along ``energies`` (warm-started, phase-aligned)."""
    _check_ladder(model, branch, energies)
    alphas, lambdas, mus, residuals, cauchy, overlaps, mults = [], [], [], [], [], [], []
    prev = None
    for E in energies:
        op = BSOperator(model, potential, EnergyWindow(branch, E), grid, boundary, coupling_sign)
        res = leading_eigenpair(op, tol=tol, max_iter=max_iter, v0=prev, method=method, seed=seed)
        vec = res.vector
        if prev is not None:
            ov = np.vdot(prev, vec)
            if np.real(ov) < 0:
                vec = -vec
            # fix the remaining phase so consecutive vectors overlap positively
            ov = np.vdot(prev, vec)
            if abs(ov) > 0:
                vec = vec * (np.conj(ov) / abs(ov))
            overlaps.append(float(np.real(np.vdot(prev, vec))))
            cauchy.append(float(np.linalg.norm(vec - prev)))
        if not res.alpha > 0:
            raise InconsistencyError(f"leading eigenvalue {res.alpha} is not positive at E = {E}")
        alphas.append(res.alpha)
        lambdas.append(1.0 / res.alpha)
        mus.append(op.to_field(vec))
        residuals.append(res.residual)
        mults.append(res.multiplicity)
        prev = vec
    return ThresholdResult(
        model=model, potential=potential, grid=grid, branch=branch, boundary=boundary,
        coupling_sign=coupling_sign, energies=list(map(float, energies)), alphas=alphas,
        lambdas=lambdas, mus=mus, residuals=residuals, cauchy_residuals=cauchy,
        overlaps=overlaps, multiplicities=mults,
    )


def _linear_fit(t, y):
    A = np.vstack([np.ones_like(t), t]).T
    coef, *_ = np.linalg.lstsq(A, y, rcond=None)
    resid = y - A @ coef
    return coef, float(np.sqrt(np.mean(resid**2))), float(np.linalg.cond(A))


def extrapolate_threshold(result, rungs=4, tol=1e-10, method="auto", seed=0):
    """Extrapolate lambda_c, fix mu_0 and check the threshold eigen-relation.

    lambda_n is fitted linearly against sqrt(d_n) and against d_n (d_n = distance
    of E_n to the threshold) over the last ``rungs`` rungs; the fit with the
    smaller rms residual is used and both are reported.
    """
    if len(result.energies) < 4 or rungs < 2:
        raise ContractViolation("extrapolation needs at least 4 energies")
    model, branch = result.model, result.branch
    thr = model.threshold(branch)
    energies = np.asarray(result.energies)
    alphas = np.asarray(result.alphas)
    # alpha_n = max eig of sign*K_E; d/dE (sign*K_E) has the sign of coupling_sign
    slope = np.diff(alphas) / np.diff(energies) * result.coupling_sign
    if np.any(slope <= 0):
        raise InconsistencyError("alpha(E) is not monotone along the ladder; resolvent monotonicity violated")
    d = np.abs(energies[-rungs:] - thr)
    lam = np.asarray(result.lambdas[-rungs:])
    fits = {}
    for name, t in (("sqrt", np.sqrt(d)), ("linear", d)):
        coef, rms, cond = _linear_fit(t, lam)
        fits[name] = {"lambda_c": float(coef[0]), "slope": float(coef[1]), "rms": rms, "cond": cond}
    best = min(fits, key=lambda k: fits[k]["rms"])
    result.fit = {"chosen": best, "rungs": rungs, **fits}
    result.lambda_c = fits[best]["lambda_c"]

    op0 = BSOperator(model, result.potential, EnergyWindow.threshold(model, branch), result.grid,
                     result.boundary, result.coupling_sign)
    mu_last = result.mus[-1]
    v_last = op0.to_vector(mu_last)
    eig0 = leading_eigenpair(op0, tol=tol, v0=v_last, method=method, seed=seed)
    result.alpha_zero = eig0.alpha
    result.lambda_c_direct = 1.0 / eig0.alpha
    v0 = eig0.vector
    ov = np.vdot(v_last, v0)
    if abs(ov) > 0:
        v0 = v0 * (np.conj(ov) / abs(ov))
    result.mu_0 = op0.to_field(v0)
    result.mu_0_source = "threshold operator eigenvector"
    resid = result.coupling_sign * op0.matvec(v0) - v0 / result.lambda_c
    result.eigen_relation_residual = float(np.linalg.norm(resid))
    result.cauchy_residuals_to_limit = [float(np.linalg.norm(op0.to_vector(m) - v0)) for m in result.mus]
    return result


def threshold_operator(result):
    return BSOperator(result.model, result.potential, EnergyWindow.threshold(result.model, result.branch),
                      result.grid, result.boundary, result.coupling_sign)


def norm_convergence_check(model, potential, energies, grid, branch=UPPER, boundary=ISOLATED, seed=0):
    """Operator-norm gaps ||K_{E_{n+1}} - K_{E_n}|| along the ladder."""
    _check_ladder(model, branch, energies)
    ops = [BSOperator(model, potential, EnergyWindow(branch, E), grid, boundary) for E in energies]
    if ops[0].support_size == 0:
        gaps = [0.0] * (len(ops) - 1)
    else:
        gaps = []
        dtype = complex if model.kind == DIRAC else float
        for a, b in zip(ops[:-1], ops[1:]):
            if a.dimension <= DENSE_LIMIT:
                diff = b.dense() - a.dense()
                gaps.append(float(np.max(np.abs(np.linalg.eigvalsh(diff)))))
                a._dense = None
            else:
                gaps.append(operator_norm(lambda v, a=a, b=b: b.matvec(v) - a.matvec(v), a.dimension, dtype, seed=seed))
    ratios = [g0 / g1 if g1 > 0 else float("inf") for g0, g1 in zip(gaps[:-1], gaps[1:])]
    decreasing = all(g1 < g0 for g0, g1 in zip(gaps[:-1], gaps[1:])) if any(gaps) else True
    return {"energies": list(energies), "gaps": gaps, "ratios": ratios, "decreasing": decreasing}


# -- direct Hamiltonian ------------------------------------------------------------


def hamiltonian_ground_state(model, potential, coupling, grid, tol=1e-10, max_iter=50, seed=0):
    """Lowest eigenvalue of the periodic lattice Hamiltonian T - coupling*V (scalar models).

    A preconditioned LOBPCG estimate is refined by Rayleigh-quotient (inverse)
    iteration with MINRES inner solves.
    """
    if model.kind == DIRAC:
        raise ContractViolation("direct Hamiltonian solve is implemented for scalar models")
    g = grid
    pmag = g.momentum_magnitude()
    if model.kind == "schrodinger":
        t_sym = pmag**2
    else:
        t_sym = relativistic_excess(pmag**2, model.mass)
    v = potential.values(g)
    N = g.n**3

    def h_apply(x):
        x = np.asarray(x).reshape(g.shape)
        kin = np.fft.ifftn(t_sym * np.fft.fftn(x)).real
        return (kin - coupling * v * x).ravel()

    def precond(x):
        x = np.asarray(x)
        cols = x.reshape(N, -1)
        out = np.empty_like(cols)
        for j in range(cols.shape[1]):
            out[:, j] = np.fft.ifftn(np.fft.fftn(cols[:, j].reshape(g.shape)) / (t_sym + 1.0)).real.ravel()
        return out.reshape(x.shape)

    rng = np.random.default_rng(seed)
    x0 = (np.exp(-0.5 * g.radius() ** 2) + 1e-3 * rng.standard_normal(g.shape)).ravel()[:, None]
    H = LinearOperator((N, N), matvec=h_apply, dtype=float)
    M = LinearOperator((N, N), matvec=precond, matmat=precond, dtype=float)
    w, X = lobpcg(H, x0, M=M, largest=False, tol=1e-6, maxiter=400)
    x = X[:, 0] / np.linalg.norm(X[:, 0])
    E = float(x @ h_apply(x))
    for _ in range(max_iter):
        shifted = LinearOperator((N, N), matvec=lambda y, s=E: h_apply(y) - s * y, dtype=float)
        y, _ = minres(shifted, x, rtol=1e-12, maxiter=2000)
        if not np.all(np.isfinite(y)) or np.linalg.norm(y) == 0:
            break
        x = y / np.linalg.norm(y)
        E_new = float(x @ h_apply(x))
        resid = float(np.linalg.norm(h_apply(x) - E_new * x))
        E = E_new
        if resid <= tol * max(1.0, abs(E)):
            break
    resid = float(np.linalg.norm(h_apply(x) - E * x))
    return E, Field(g, (x / np.sqrt(g.cell_volume)).reshape(g.shape), POSITION), resid
