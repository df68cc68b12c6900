"""Chiral ensemble at nonzero chemical potential (complex eigenvalues).

Orientation: the eigenvalue variable is z = -2 * eig(X1 X2), so that at
mu -> 0 it reduces to twice a chGUE (Wishart) eigenvalue.  In this variable
the weight is |z|^nu K_nu(a|z|) exp(+b Re z) prod_f (z + m_f^2) and the
bi-orthogonal polynomials are L_j^nu(c z).
"""
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .chgue_finite import CONFLUENCE_TOL, SignedLog, _close
from .specfun import DomainError, bessel_j, bessel_k, ln_gamma

# Overall constant of the microscopic complex density.  Derived analytically
# from the finite-N kernel (the limit carries no extra factor); reported with
# results and checked against the rescaled finite-N density.
MICRO_CALIBRATION = 1.0

_INNER_NODES = 96
_gl_t, _gl_w = np.polynomial.legendre.leggauss(_INNER_NODES)
_GL_T = 0.5 * (_gl_t + 1.0)
_GL_W = 0.5 * _gl_w


@dataclass(frozen=True)
class MuParams:
    N: int
    nu: int = 0
    mu: float = 0.5
    masses: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if self.N < 0 or self.nu < 0:
            raise ValueError("N and nu must be non-negative")
        if not 0.0 < self.mu <= 1.0:
            raise DomainError("mu must lie in (0, 1]")
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))

    @property
    def a(self):
        return (1.0 + self.mu ** 2) / (4.0 * self.mu ** 2)

    @property
    def b(self):
        return (1.0 - self.mu ** 2) / (4.0 * self.mu ** 2)

    @property
    def c(self):
        if self.b == 0:
            raise DomainError("c is singular at mu = 1")
        return (self.a ** 2 - self.b ** 2) / (2.0 * self.b)

    @property
    def Nf(self):
        return len(self.masses)

    @property
    def mu_hat(self):
        """Weak-limit parameter, mu_hat^2 = 2 N mu^2."""
        return np.sqrt(2.0 * self.N) * self.mu

    @classmethod
    def weak(cls, N, nu, mu_hat, masses=()):
        return cls(N, nu, mu_hat / np.sqrt(2.0 * N), masses)


@dataclass(frozen=True)
class ComplexGrid:
    """Rectangular lattice of complex points, endpoints included."""
    xmin: float
    xmax: float
    nx: int
    ymin: float
    ymax: float
    ny: int

    @classmethod
    def parse(cls, text):
        xs, ys = text.split(",")
        x0, x1, nx = xs.split(":")
        y0, y1, ny = ys.split(":")
        return cls(float(x0), float(x1), int(nx), float(y0), float(y1), int(ny))

    @property
    def spacings(self):
        dx = (self.xmax - self.xmin) / (self.nx - 1) if self.nx > 1 else 0.0
        dy = (self.ymax - self.ymin) / (self.ny - 1) if self.ny > 1 else 0.0
        return dx, dy

    def points(self):
        x = np.linspace(self.xmin, self.xmax, self.nx)
        y = np.linspace(self.ymin, self.ymax, self.ny)
        return x[None, :] + 1j * y[:, None]


def _require_finite_c(p):
    if p.mu >= 1.0:
        raise NotImplementedError("the bi-orthogonal norms are singular at mu = 1")


# ---------------------------------------------------------------------------
# weight and norms

def weight_mu(z, p):
    """|z|^nu K_nu(a|z|) e^{b Re z} prod_f (z + m_f^2)."""
    z = np.asarray(z, dtype=complex)
    r = np.abs(z)
    if np.any(r == 0):
        raise DomainError("the weight is singular at z = 0")
    # K scaled by e^{a r}: the exponent -a r + b Re z is never positive
    w = r ** p.nu * bessel_k(p.nu, p.a * r, scaled=True) * np.exp(-p.a * r + p.b * z.real)
    if not p.masses:
        out = w.astype(float)
    else:
        out = w.astype(complex)
        for m in p.masses:
            out = out * (z + m * m)
    return out[()] if out.ndim == 0 else out


def log_norm_h(j, p):
    """log h_j for the Laguerre polynomials L_j^nu(c z).

    h_j = pi (j+nu)!/(j! a) (a/b)^{2j} (a/(b c))^{nu+1}.
    """
    _require_finite_c(p)
    j = np.asarray(j, dtype=float)
    nu = p.nu
    return (np.log(np.pi) + ln_gamma(j + nu + 1.0) - ln_gamma(j + 1.0) - np.log(p.a)
            + 2.0 * j * np.log(p.a / p.b) + (nu + 1.0) * np.log(p.a / (p.b * p.c)))


def norm_h(j, p):
    return np.exp(log_norm_h(j, p))


def _log_monic_h(n, p):
    """log of the norm of the monic polynomial (-1/c)^n n! L_n^nu(c z)."""
    return log_norm_h(n, p) + 2.0 * (ln_gamma(n + 1.0) - n * np.log(p.c))


def _scaled_table(nmax, alpha, x, logscale):
    """L_i^alpha(x) e^{-logscale[i]}, i = 0..nmax, by a rescaled three-term recurrence."""
    x = np.asarray(x, dtype=complex)
    out = np.zeros((nmax + 1,) + x.shape, dtype=complex)
    if nmax < 0:
        return out
    out[0] = np.exp(-logscale[0])
    if nmax >= 1:
        out[1] = (1.0 + alpha - x) * np.exp(-logscale[1])
    for i in range(1, nmax):
        out[i + 1] = ((2 * i + alpha + 1 - x) * out[i] * np.exp(logscale[i] - logscale[i + 1])
                      - (i + alpha) * out[i - 1] * np.exp(logscale[i - 1] - logscale[i + 1])) / (i + 1)
    return out


def _normalized_rows(p, nmax, v, deriv=0):
    """(d/dv)^deriv / deriv! of L_j^nu(c v)/sqrt(h_j) for j = 0..nmax."""
    s = 0.5 * log_norm_h(np.arange(nmax + 1), p)
    out = np.zeros((nmax + 1,) + np.shape(v), dtype=complex)
    if deriv > nmax:
        return out
    # d^k/dv^k L_j^nu(c v) = (-c)^k L_{j-k}^{nu+k}(c v)
    tab = _scaled_table(nmax - deriv, p.nu + deriv, p.c * np.asarray(v, dtype=complex), s[deriv:])
    out[deriv:] = tab * ((-p.c) ** deriv * np.exp(-ln_gamma(deriv + 1.0)))
    return out


# ---------------------------------------------------------------------------
# kernel and densities

def kernel_mu(p, z, u):
    """Quenched kernel K_N(z, u*) = sum_{j<N} L_j(c z) L_j(c u*)/h_j."""
    _require_finite_c(p)
    z = np.asarray(z, dtype=complex)
    u = np.asarray(u, dtype=complex)
    zb, ub = np.broadcast_arrays(z, u)
    if p.N == 0:
        out = np.zeros(zb.shape, dtype=complex)
    else:
        pz = _normalized_rows(p, p.N - 1, zb)
        pu = _normalized_rows(p, p.N - 1, ub)
        out = np.sum(pz * np.conj(pu), axis=0)
    return out[()] if out.ndim == 0 else out


def _clusters(points):
    vals, mult = [], []
    for v in points:
        for i, w in enumerate(vals):
            if _close(v, w, CONFLUENCE_TOL):
                mult[i] += 1
                break
        else:
            vals.append(complex(v))
            mult.append(1)
    return vals, mult


def mixed_average(p, v, u):
    """Quenched < prod_l prod_i (v_i - z_l) prod_j (u_j* - z_l*) >_N as a SignedLog-like pair.

    Determinant of kernels K_{N+L}(v_i, u_j*) and normalized monic
    polynomials P_{N+L+m-1}(v_i) over the two Vandermonde determinants,
    with derivative rows for coincident v.  Returns (log scale, complex
    mantissa) so that the average is mantissa * exp(log scale).
    Requires len(v) >= len(u) and distinct u.
    """
    _require_finite_c(p)
    N = p.N
    K, L = len(v), len(u)
    if K < L:
        raise ValueError("need at least as many plain as conjugated factors")
    if K == 0:
        return 0.0, 1.0 + 0j
    vals, mult = _clusters(v)
    uvals, umult = _clusters(u)
    if any(r > 1 for r in umult):
        raise NotImplementedError("coincident conjugated arguments")
    nmax = N + K - 1
    up = [_normalized_rows(p, nmax, uu) for uu in uvals]
    rows = []
    for vv, r in zip(vals, mult):
        for k in range(r):
            pv = _normalized_rows(p, nmax, vv, k)
            row = [np.sum(pv[:N + L] * np.conj(pw[:N + L])) for pw in up]
            # monic P_n / sqrt(monic h_n) = (-1)^n L_n(c v)/sqrt(h_n)
            row += [(-1) ** n * pv[n] for n in range(N + L, N + K)]
            rows.append(row)
    mat = np.array(rows, dtype=complex).reshape(K, K)
    mant = np.linalg.det(mat)
    logs = 0.5 * sum(_log_monic_h(i, p) for i in range(N, N + K))
    logs += 0.5 * sum(_log_monic_h(i, p) for i in range(N, N + L))
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            d = (vals[b] - vals[a]) ** (mult[a] * mult[b])
            mant /= d / abs(d)
            logs -= np.log(abs(d))
    for a in range(len(uvals)):
        for b in range(a + 1, len(uvals)):
            d = np.conj(uvals[b] - uvals[a])
            mant /= d / abs(d)
            logs -= np.log(abs(d))
    return float(logs), complex(mant)


def log_z_quenched(p):
    """log of N! prod_j (monic h_j)."""
    return float(ln_gamma(p.N + 1.0) + sum(_log_monic_h(j, p) for j in range(p.N)))


def z_massive_mu(p):
    """Massive partition function as a SignedLog (real for real masses).

    (-1)^{N N_f} N! prod_j h_j det[P_{N+g-1}(-m_f^2)] / Delta(-m^2), monic
    polynomials P_n = (-1/c)^n n! L_n^nu(c z), derivative rows when masses
    coincide.
    """
    if not p.masses:
        return SignedLog(1.0, log_z_quenched(p))
    logs, mant = mixed_average(p, [-m * m for m in p.masses], [])
    mant *= (-1) ** (p.N * p.Nf)
    ls = logs + log_z_quenched(p) + np.log(abs(mant))
    return SignedLog(float(np.sign(mant.real)), float(ls))


def kernel_massive_mu(p, z, u):
    """Massive kernel K_N^{[N_f]}(z, u*) without the weight.

    (-1)^{N_f} <prod (z - z_l)(u* - z_l*) prod_f (-m_f^2 - z_l)>_{N-1}
    / (h_{N-1} <prod_f (-m_f^2 - z_l)>_N), all averages quenched.
    """
    if not p.masses:
        return kernel_mu(p, z, u)
    if p.N == 0:
        return 0j
    vm = [-m * m for m in p.masses]
    pm = MuParams(p.N - 1, p.nu, p.mu, p.masses)
    ln, mn = mixed_average(pm, [complex(z)] + vm, [complex(u)])
    ld, md = mixed_average(p, vm, [])
    return (-1) ** p.Nf * mn / md * np.exp(ln - ld - _log_monic_h(p.N - 1, p))


def density_finite_mu(p, z):
    """R_1(z) = w(z) K_N(z, z*); complex in general when masses are present."""
    z = np.asarray(z, dtype=complex)
    w = weight_mu(z, p)
    if not p.masses:
        out = np.asarray(w * np.real(kernel_mu(p, z, z)), dtype=float)
    else:
        flat = np.atleast_1d(z).ravel()
        k = np.array([kernel_massive_mu(p, v, v) for v in flat]).reshape(np.shape(z))
        out = np.asarray(w * k)
    return out[()] if out.ndim == 0 else out


def density_finite_mu_dirac(p, zt):
    """Finite-N density in Dirac units on Re z~ >= 0, z = z~^2/(2N).

    R_1(z~^2/2N) |z~|^2 / N^2 (the Jacobian |dz/dz~|^2).
    """
    zt = np.asarray(zt, dtype=complex)
    return density_finite_mu(p, zt * zt / (2.0 * p.N)) * np.abs(zt) ** 2 / p.N ** 2


def density_micro_mu(nu, mu_hat, zt):
    """Weakly non-Hermitian microscopic density in Dirac units.

    (|z|^2/(2 pi mu^2)) K_nu(|z|^2/4mu^2) exp(Re z^2/4mu^2)
    * int_0^1 dt t e^{-2 t^2 mu^2} |J_nu(z t)|^2, times MICRO_CALIBRATION.
    The inner integral uses a fixed Gauss-Legendre rule.
    """
    if not mu_hat > 0:
        raise DomainError("mu_hat must be positive")
    zt = np.asarray(zt, dtype=complex)
    if np.any(zt == 0):
        raise DomainError("the density is singular at z = 0")
    flat = np.atleast_1d(zt).ravel()
    r2 = np.abs(flat) ** 2
    arg = r2 / (4.0 * mu_hat ** 2)
    # K scaled by e^{arg}; arg - Re z^2/4mu^2 = Im(z)^2/(2 mu^2) >= 0
    pref = (r2 / (2.0 * np.pi * mu_hat ** 2) * bessel_k(nu, arg, scaled=True)
            * np.exp(-flat.imag ** 2 / (2.0 * mu_hat ** 2)))
    jt = bessel_j(nu, flat[:, None] * _GL_T[None, :])
    inner = (np.abs(jt) ** 2 * (_GL_T * np.exp(-2.0 * _GL_T ** 2 * mu_hat ** 2))[None, :]) @ _GL_W
    out = (MICRO_CALIBRATION * pref * inner).reshape(zt.shape)
    return out[()] if out.ndim == 0 else out


def w2_product_weight(z):
    """Distribution of the product of two complex Gaussians, 2 pi K_0(2|z|)."""
    r = np.abs(np.asarray(z, dtype=complex))
    if np.any(r == 0):
        raise DomainError("the product weight is singular at z = 0")
    out = np.asarray(2.0 * np.pi * bessel_k(0, 2.0 * r))
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# plane quadrature (oracle)

def plane_integral(f, radial_scale=1.0, rel_tol=1e-10, abs_tol=1e-300, theta_min=64):
    """int d^2 z f(z) in polar form: adaptive in r, periodic trapezoid in theta.

    f must accept a complex array.  The theta resolution is doubled until the
    angular average is stable, so integrands with e^{b r cos theta} are
    resolved at every radius.
    """
    from . import numerics

    def angular(r):
        r = np.atleast_1d(r)
        n = theta_min
        prev = None
        while True:
            th = 2.0 * np.pi * (np.arange(n) + 0.5) / n
            val = np.mean(f(r[:, None] * np.exp(1j * th)[None, :]), axis=1) * 2.0 * np.pi * r
            if prev is not None and np.all(np.abs(val - prev) <= 1e-13 * np.maximum(np.abs(val), 1e-300)):
                return val
            if n >= 1 << 14:
                return val
            prev = val
            n *= 2

    val, _ = numerics.integrate_1d(angular, (0.0, np.inf), abs_tol=abs_tol, rel_tol=rel_tol,
                                   breakpoints=(radial_scale,))
    return val
