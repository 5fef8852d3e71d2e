"""Modified Bessel functions K_n, position-space resolvent kernels and radial convolutions.

Kernels follow the unitary convention of :mod:`fields`: ``(T - E)^{-1} f = G * f``
with ``G(x) = (2 pi)^{-3/2} F^{-1}[(T(p) - E)^{-1}](x)``.

* Schrodinger:        ``G = e^{-nu r} / (4 pi r)``                         (nu = sqrt|E|)
* pseudorelativistic: ``G = z Y_nu + G_m + z^2 (G_m * Y_nu)``               (z = E + m)
  with ``G_m = m K_1(m r) / (2 pi^2 r)`` the kernel of ``(p^2 + m^2)^{-1/2}``
* Dirac:              ``G = A(r) (m beta + z) + i B(r) alpha.r``
  with ``A = e^{-nu r}/(4 pi r)`` and ``B = e^{-nu r}(nu/r^2 + 1/r^3)/(4 pi)``.

At a threshold ``nu = 0`` and ``z = m`` (upper) or ``z = -m`` (lower, Dirac).
"""

from __future__ import annotations

import math

import numpy as np
from scipy import integrate
from scipy.special import erfc, erfcx

from .errors import ContractViolation, DomainError
from .kinetic import (
    ALPHA,
    BETA,
    IDENTITY4,
    PSEUDORELATIVISTIC,
    SCHRODINGER,
    UPPER,
    nu_e,
)

EULER_GAMMA = 0.5772156649015329
# \int_{[-1/2,1/2]^3} |x|^{-1} dx
UNIT_CUBE_COULOMB = 3.0 * math.log(2.0 + math.sqrt(3.0)) - 0.5 * math.pi

_SERIES_CUTOFF = 2.0
_EPS = 1e-16


def _k01_series(x):
    """K_0, K_1 from the ascending series (accurate for x <= 2)."""
    y = 0.25 * x * x
    log_half = np.log(0.5 * x)
    term0 = np.ones_like(x)  # (x^2/4)^k / (k!)^2
    term1 = np.ones_like(x)  # (x^2/4)^k / (k! (k+1)!)
    i0 = np.zeros_like(x)
    i1s = np.zeros_like(x)
    s0 = np.zeros_like(x)
    s1 = np.zeros_like(x)
    harmonic = 0.0
    for k in range(40):
        if k > 0:
            term0 = term0 * y / (k * k)
            term1 = term1 * y / (k * (k + 1))
            harmonic += 1.0 / k
        psi1 = harmonic - EULER_GAMMA
        psi2 = harmonic + 1.0 / (k + 1) - EULER_GAMMA
        i0 += term0
        i1s += term1
        s0 += term0 * harmonic
        s1 += term1 * (psi1 + psi2)
    k0 = -(log_half + EULER_GAMMA) * i0 + s0
    i1 = 0.5 * x * i1s
    k1 = 1.0 / x + log_half * i1 - 0.25 * x * s1
    return k0, k1


def _k01_steed(x):
    """K_0, K_1 from Steed's continued fraction (Temme's CF2), accurate for x >= 2."""
    b = 2.0 * (1.0 + x)
    d = 1.0 / b
    h = d.copy()
    delh = d.copy()
    q1 = np.zeros_like(x)
    q2 = np.ones_like(x)
    a1 = 0.25
    q = np.full_like(x, a1)
    c = np.full_like(x, a1)
    a = -a1
    s = 1.0 + q * delh
    for i in range(2, 200000):
        a -= 2 * (i - 1)
        c = -a * c / i
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels / s) < _EPS):
            break
    h = a1 * h
    k0 = np.sqrt(np.pi / (2.0 * x)) * np.exp(-x) / s
    k1 = k0 * (x + 0.5 - h) / x
    return k0, k1


def bessel_k(order, x):
    """Modified Bessel function of the second kind K_order(x) for integer order >= 0."""
    if int(order) != order or order < 0:
        raise ContractViolation(f"bessel_k needs a non-negative integer order, got {order}")
    xa = np.asarray(x, dtype=float)
    if np.any(~(xa > 0)):
        raise DomainError("bessel_k needs x > 0")
    flat = np.atleast_1d(xa).ravel()
    k0 = np.empty_like(flat)
    k1 = np.empty_like(flat)
    small = flat <= _SERIES_CUTOFF
    if np.any(small):
        k0[small], k1[small] = _k01_series(flat[small])
    if np.any(~small):
        k0[~small], k1[~small] = _k01_steed(flat[~small])
    lo, hi = k0, k1
    if order == 0:
        out = lo
    else:
        for n in range(1, int(order)):
            lo, hi = hi, lo + (2.0 * n / flat) * hi
        out = hi
    out = out.reshape(np.shape(xa))
    return float(out) if np.ndim(xa) == 0 else out


def yukawa(r, nu):
    r = np.asarray(r, dtype=float)
    return np.exp(-nu * r) / (4.0 * np.pi * r)


def relativistic_free_kernel(r, m):
    """Kernel of (p^2 + m^2)^{-1/2}: m K_1(m r) / (2 pi^2 r)."""
    r = np.asarray(r, dtype=float)
    return m * bessel_k(1, m * r) / (2.0 * np.pi**2 * r)


def yukawa_moment(a, b, nu):
    """\\int_a^b t * e^{-nu t}/(4 pi t) dt."""
    if nu == 0.0:
        return (b - a) / (4.0 * np.pi)
    return (np.exp(-nu * a) - np.exp(-nu * b)) / (4.0 * np.pi * nu)


def radial_convolution(f_radial, g_radial, r, g_moment=None, epsabs=1e-10, epsrel=1e-9):
    """(f * g)(r) in R^3 for radial profiles f(s), g(t).

    Uses (f * g)(r) = (2 pi / r) int_0^inf s f(s) [int_{|r-s|}^{r+s} t g(t) dt] ds.
    ``g_moment(a, b)`` may supply the inner integral in closed form; otherwise it is
    computed by adaptive quadrature.  The outer integral is split at the kink s = r.
    """
    if not r > 0:
        raise DomainError(f"radial_convolution needs r > 0, got {r}")

    if g_moment is None:

        def g_moment(a, b):
            val, _ = integrate.quad(lambda t: t * g_radial(t), a, b, epsabs=epsabs * 1e-2, limit=200)
            return val

    def outer(s):
        if s <= 0.0:
            return 0.0
        return s * f_radial(s) * g_moment(abs(r - s), r + s)

    pieces = [(0.0, r), (r, 2.0 * r + 1.0), (2.0 * r + 1.0, np.inf)]
    total = 0.0
    for a, b in pieces:
        val, _ = integrate.quad(outer, a, b, epsabs=epsabs, epsrel=epsrel, limit=400)
        total += val
    if not np.isfinite(total):
        raise DomainError("radial convolution diverged; profile integrals are not finite")
    return 2.0 * np.pi * total / r


def newton_potential(rho_radial, r, epsabs=1e-12):
    """(rho * 1/(4 pi |.|))(r) = (1/r) int_0^r s^2 rho ds + int_r^inf s rho ds."""
    inner, _ = integrate.quad(lambda s: s * s * rho_radial(s), 0.0, r, epsabs=epsabs, limit=200)
    outer, _ = integrate.quad(lambda s: s * rho_radial(s), r, np.inf, epsabs=epsabs, limit=200)
    return inner / r + outer


def pseudo_correction(r, m, nu):
    """(G_m * Y_nu)(r), the convolution term of the pseudorelativistic kernel."""
    return radial_convolution(
        lambda s: relativistic_free_kernel(s, m),
        lambda t: yukawa(t, nu),
        r,
        g_moment=lambda a, b: yukawa_moment(a, b, nu),
    )


_GL_X, _GL_W = np.polynomial.legendre.leggauss(64)


def _gauss_legendre(func, a, b):
    """Vectorised 64-point Gauss-Legendre over [a, b] for arrays a, b."""
    a = np.asarray(a, dtype=float)[..., None]
    b = np.asarray(b, dtype=float)[..., None]
    half = 0.5 * (b - a)
    pts = a + half * (_GL_X + 1.0)
    return np.sum(_GL_W * func(pts), axis=-1) * half[..., 0]


def integral_t_k1(x):
    """\\int_0^x t K_1(t) dt, split at t = 1 where the log term of K_1 stops mattering."""
    x = np.asarray(x, dtype=float)

    def integrand(t):
        safe = np.where(t > 0, t, 1.0)
        return np.where(t > 0, safe * bessel_k(1, safe), 1.0)

    lo = np.minimum(x, 1.0)
    out = _gauss_legendre(integrand, np.zeros_like(x), lo)
    hi = x > 1.0
    if np.any(hi):
        out = out + np.where(hi, _gauss_legendre(integrand, np.ones_like(x), np.maximum(x, 1.0)), 0.0)
    return out


def relativistic_free_moment(rho, m):
    """\\int_0^rho G_m(s) s^2 ds = (1/(2 pi^2 m)) int_0^{m rho} t K_1(t) dt."""
    return integral_t_k1(m * np.asarray(rho, dtype=float)) / (2.0 * np.pi**2 * m)


def pseudo_threshold_correction(r, m):
    """(G_m * 1/(4 pi |.|))(r) by Newton's theorem: M(r)/r + K_0(m r)/(2 pi^2).

    Closed-form counterpart of ``pseudo_correction(r, m, 0)``.
    """
    r = np.asarray(r, dtype=float)
    return relativistic_free_moment(r, m) / r + bessel_k(0, m * r) / (2.0 * np.pi**2)


def pseudo_threshold_correction_moment(rho, m):
    """\\int_0^rho s^2 (G_m * 1/(4 pi |.|))(s) ds."""
    return _gauss_legendre(lambda s: s * s * pseudo_threshold_correction(s, m), np.zeros_like(rho), rho)


def pseudo_kernel_profile(r, m, z, nu):
    return z * yukawa(r, nu) + relativistic_free_kernel(r, m) + z * z * pseudo_correction(r, m, nu)


def dirac_kernel_parts(r, nu):
    """Radial factors (A, B) of the Dirac kernel A (m beta + z) + i B alpha.r."""
    r = np.asarray(r, dtype=float)
    damp = np.exp(-nu * r) / (4.0 * np.pi)
    return damp / r, damp * (nu / r**2 + 1.0 / r**3)


def dirac_kernel_matrix(r_vec, m, z, nu):
    r_vec = np.asarray(r_vec, dtype=float)
    rn = float(np.sqrt(r_vec @ r_vec))
    a, b = dirac_kernel_parts(rn, nu)
    return a * (m * BETA + z * IDENTITY4) + 1j * b * np.tensordot(r_vec, ALPHA, axes=(0, 0))


def kernel_parameters(model, window):
    """(z, nu) for the given window; threshold windows give nu = 0 and z = +-m."""
    window.validate(model)
    if model.kind == SCHRODINGER:
        return None, (0.0 if window.at_threshold else nu_e(model, window.energy))
    m = model.mass
    if window.at_threshold:
        return (m if window.branch == UPPER else -m), 0.0
    return window.energy + m, nu_e(model, window.energy)


def resolvent_kernel(model, r_vec, window):
    """Closed-form (T - E)^{-1}(x, y) at separation r_vec = x - y, or its threshold limit."""
    r_vec = np.asarray(r_vec, dtype=float)
    rn = float(np.sqrt(r_vec @ r_vec))
    if rn == 0.0:
        raise DomainError("resolvent kernel is singular at r = 0")
    z, nu = kernel_parameters(model, window)
    if model.kind == SCHRODINGER:
        return float(yukawa(rn, nu))
    if model.kind == PSEUDORELATIVISTIC:
        return float(pseudo_kernel_profile(rn, model.mass, z, nu))
    return dirac_kernel_matrix(r_vec, model.mass, z, nu)


def coulomb_self_cell(h):
    """\\int over the cube of side h centred at 0 of 1/(4 pi |x|)."""
    return h * h * UNIT_CUBE_COULOMB / (4.0 * np.pi)


def radial_self_cell(g_radial, h, moment=None):
    """\\int over the cube of side h centred at 0 of g(|x|), for g integrable at 0.

    Six pyramids over the faces: 6 (h/2) int int_face M(rho) / rho^3 du dv with
    M(rho) = int_0^rho g(s) s^2 ds (``moment``, by quadrature when not given).
    The face integrand is smooth, so a tensor Gauss-Legendre rule is used.
    """
    half = 0.5 * h
    if moment is None:

        def moment(rho):
            rho = np.atleast_1d(rho)
            return np.array([
                integrate.quad(lambda s: g_radial(s) * s * s, 0.0, p, epsabs=1e-14, limit=200)[0] for p in rho
            ])

    x, w = np.polynomial.legendre.leggauss(24)
    u = half * x
    U, Vv = np.meshgrid(u, u, indexing="ij")
    rho = np.sqrt(half * half + U**2 + Vv**2)
    # eightfold face symmetry is not exploited; the rule is cheap
    vals = np.asarray(moment(rho.ravel())).reshape(rho.shape) / rho**3
    face = half * half * np.einsum("i,j,ij->", w, w, vals)
    return 6.0 * half * face


def gaussian_density(r, sigma):
    r = np.asarray(r, dtype=float)
    return np.exp(-0.5 * (r / sigma) ** 2) / (2.0 * np.pi * sigma * sigma) ** 1.5


def gaussian_moment(a, b, sigma):
    """\\int_a^b t * gaussian_density(t) dt."""
    c = sigma * sigma
    return c * (gaussian_density(a, sigma) - gaussian_density(b, sigma))


def mollified_yukawa(r, nu, sigma):
    """(Y_nu * g_sigma)(r) with g_sigma the unit-mass Gaussian of width sigma."""
    r = np.asarray(r, dtype=float)
    s2 = math.sqrt(2.0) * sigma
    if nu == 0.0:
        return np.where(r > 0, _erf_over_r(r, s2), 2.0 / (s2 * math.sqrt(np.pi))) / (4.0 * np.pi)
    a_minus = (nu * sigma * sigma - r) / s2
    a_plus = (nu * sigma * sigma + r) / s2
    pref = np.exp(0.5 * (nu * sigma) ** 2) / (8.0 * np.pi)
    # e^{nu r} erfc(a_+) = erfcx(a_+) e^{nu r - a_+^2}; keeps large r finite
    u = np.exp(-nu * r) * erfc(a_minus) - erfcx(a_plus) * np.exp(nu * r - a_plus**2)
    return pref * u / r


def _erf_over_r(r, s2):
    return (1.0 - erfc(r / s2)) / np.where(r > 0, r, 1.0)


def mollified_yukawa_derivative(r, nu, sigma):
    """d/dr of mollified_yukawa, closed form."""
    r = np.asarray(r, dtype=float)
    s2 = math.sqrt(2.0) * sigma
    a_minus = (nu * sigma * sigma - r) / s2
    a_plus = (nu * sigma * sigma + r) / s2
    pref = np.exp(0.5 * (nu * sigma) ** 2) / (8.0 * np.pi)
    em = np.exp(-nu * r) * erfc(a_minus)
    ep = erfcx(a_plus) * np.exp(nu * r - a_plus**2)
    u = em - ep
    du = -nu * (em + ep) + (4.0 / (math.sqrt(np.pi) * s2)) * np.exp(-nu * r - a_minus**2)
    return pref * (du / r - u / r**2)
