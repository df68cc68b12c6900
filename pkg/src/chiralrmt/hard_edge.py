"""Microscopic (hard-edge) limits in Dirac-eigenvalue units.

Dirac eigenvalues x~ = 2 sqrt(N) y with y = sqrt(x) the square root of a
Wishart eigenvalue; masses are rescaled the same way.  Zero modes are never
mixed into the continuous densities.
"""
from dataclasses import dataclass, field
from math import comb
from typing import Sequence

import numpy as np

from . import chgue_finite
from .chgue_finite import CONFLUENCE_TOL, SignedLog, _close
from .specfun import bessel_i, bessel_j, ln_gamma


@dataclass(frozen=True)
class MicroArgs:
    nu: int
    masses: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))


# ---------------------------------------------------------------------------
# quenched Bessel kernel

def bessel_kernel(nu, x, y, form=1):
    """Bessel kernel in either of its two equivalent forms (x != y).

    Without the sqrt(x y) Jacobian; see kernel_micro for the Dirac-unit kernel.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    jx, jy = bessel_j(nu, x), bessel_j(nu, y)
    if form == 1:
        num = -(jx * y * bessel_j(nu + 1, y) - jy * x * bessel_j(nu + 1, x))
    else:
        num = jx * y * bessel_j(nu - 1, y) - jy * x * bessel_j(nu - 1, x)
    return num / (x * x - y * y)


def density_quenched(nu, x):
    """(x/2) (J_nu^2 - J_{nu-1} J_{nu+1})."""
    x = np.asarray(x, dtype=float)
    out = 0.5 * x * (bessel_j(nu, x) ** 2 - bessel_j(nu - 1, x) * bessel_j(nu + 1, x))
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# mass rows as functions of u = m^2

def _s_fun(n, u, shift=0.0):
    """e^{-shift} S_n(u), S_n(u) = sum_k (u/4)^k / (k! (k+n)!) = (2/sqrt u)^n I_n(sqrt u)."""
    u = float(u)
    if u <= 1.0:
        term = np.exp(-ln_gamma(n + 1.0))
        total = term
        for k in range(1, 100):
            term *= u / 4.0 / (k * (k + n))
            total += term
            if term < 1e-18 * total:
                break
        return total * np.exp(-shift)
    r = np.sqrt(u)
    return bessel_i(n, r, scaled=True) * np.exp(n * np.log(2.0 / r) + r - shift)


def _mass_row(nu, u, ncols, deriv, shift=0.0):
    """d^deriv/du^deriv / deriv! of u^j 2^{-(nu+j)} S_{nu+j}(u), j < ncols, times e^{-shift}.

    With the common factor u^{nu/2} removed, these are the entries
    m^j I_{nu+j}(m), analytic in u so confluent masses are exact.
    """
    row = np.zeros(ncols)
    for j in range(ncols):
        total = 0.0
        for i in range(min(deriv, j) + 1):
            ff = np.exp(ln_gamma(j + 1.0) - ln_gamma(j - i + 1.0))
            upow = u ** (j - i) if j - i > 0 else 1.0
            total += (comb(deriv, i) * ff * upow * 4.0 ** -(deriv - i)
                      * _s_fun(nu + j + deriv - i, u, shift))
        row[j] = total * 2.0 ** -(nu + j) * np.exp(-ln_gamma(deriv + 1.0))
    return row


def _mass_clusters(masses):
    vals, mult, sums = [], [], []
    for m in masses:
        u = m * m
        for i, v in enumerate(vals):
            if _close(u, v, CONFLUENCE_TOL):
                mult[i] += 1
                sums[i] += u
                vals[i] = sums[i] / mult[i]
                break
        else:
            vals.append(u)
            mult.append(1)
            sums.append(u)
    return vals, mult


def _mass_block(nu, masses, ncols):
    """Mass rows, each cluster scaled by e^{-m} so that heavy masses do not overflow.

    Returns (rows, cluster values u, multiplicities, log of the removed scale).
    """
    vals, mult = _mass_clusters(masses)
    rows = []
    log_scale = 0.0
    for u, r in zip(vals, mult):
        shift = np.sqrt(u)
        log_scale += r * shift
        for k in range(r):
            rows.append(_mass_row(nu, u, ncols, k, shift))
    return np.array(rows).reshape(len(rows), ncols), vals, mult, log_scale


# ---------------------------------------------------------------------------
# partition functions

def z_micro(nu, masses):
    """Limiting partition function with N_f masses, as a SignedLog.

    2^{N_f(N_f-1)/2} prod_j j! det[m_f^{g-1} I_{nu+g-1}(m_f)] / Delta(m^2);
    coincident masses use derivative rows in m^2.
    """
    nf = len(masses)
    if nf == 0:
        return SignedLog(1.0, 0.0)
    block, vals, mult, log_scale = _mass_block(nu, masses, nf)
    sgn, logd = np.linalg.slogdet(block)
    if sgn == 0:
        return SignedLog(0.0, -np.inf)
    logd += log_scale
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            d = vals[b] - vals[a]
            logd -= mult[a] * mult[b] * np.log(abs(d))
            sgn *= np.sign(d) ** (mult[a] * mult[b])
    # common factor prod_f m_f^nu
    for m in masses:
        if nu:
            if m == 0:
                return SignedLog(0.0, -np.inf)
            logd += nu * np.log(m)
    logd += 0.5 * nf * (nf - 1) * np.log(2.0) + sum(ln_gamma(j + 1.0) for j in range(nf))
    return SignedLog(float(sgn), float(logd))


def z_micro_degenerate(nu, nf, m):
    """Toeplitz form det[I_{nu+g-f}(m)] for N_f degenerate masses."""
    mat = np.empty((nf, nf))
    for f in range(nf):
        for g in range(nf):
            mat[f, g] = bessel_i(nu + g - f, m)
    return float(np.linalg.det(mat)) if nf else 1.0


# ---------------------------------------------------------------------------
# kernels and densities

def _dirac_row(nu, y, ncols):
    return np.array([(-y) ** j * bessel_j(nu + j, y) for j in range(ncols)])


def _dirac_row_deriv(nu, y, ncols):
    out = np.empty(ncols)
    for j in range(ncols):
        n = nu + j
        dj = 0.5 * (bessel_j(n - 1, y) - bessel_j(n + 1, y))
        val = y ** j * dj
        if j:
            val += j * y ** (j - 1) * bessel_j(n, y)
        out[j] = (-1) ** j * val
    return out


def _kernel_micro_scalar(nu, masses, x, y):
    nf = len(masses)
    ncols = nf + 2
    # the per-cluster scale factors cancel between the two determinants
    block = _mass_block(nu, masses, ncols)[0]
    den = np.linalg.det(_mass_block(nu, masses, nf)[0]) if nf else 1.0
    weight = 1.0
    for m in masses:
        weight *= np.sqrt((x * x + m * m) * (y * y + m * m))
    # sqrt(x y) is the Jacobian to Dirac variables, so that K(x, x) is the density
    if _close(x, y, CONFLUENCE_TOL):
        rows = np.vstack([block, _dirac_row(nu, x, ncols), _dirac_row_deriv(nu, x, ncols)])
        return -np.linalg.det(rows) / (2.0 * weight * den)
    rows = np.vstack([block, _dirac_row(nu, x, ncols), _dirac_row(nu, y, ncols)])
    return np.sqrt(x * y) * np.linalg.det(rows) / ((x * x - y * y) * weight * den)


def kernel_micro(args, x, y):
    """Microscopic kernel with the weight included, K_s(x~, y~).

    sqrt(x~ y~) times the (N_f+2)-determinant of I- and J-Bessel rows over
    the mass determinant.  At N_f = 0 this is sqrt(x~ y~) times the Bessel
    kernel, and K_s(x~, x~) is the density in Dirac units.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    xb, yb = np.broadcast_arrays(x, y)
    out = np.empty(xb.shape)
    for idx in np.ndindex(xb.shape):
        out[idx] = _kernel_micro_scalar(args.nu, args.masses, float(xb[idx]), float(yb[idx]))
    return out[()] if out.ndim == 0 else out


def density_micro(args, x):
    """Microscopic spectral density on x~ >= 0 (zero modes excluded)."""
    x = np.asarray(x, dtype=float)
    if not args.masses:
        return density_quenched(args.nu, x)
    flat = np.atleast_1d(x).ravel()
    out = np.array([0.0 if v == 0 else _kernel_micro_scalar(args.nu, args.masses, v, v)
                    for v in flat]).reshape(np.shape(x))
    return out[()] if out.ndim == 0 else out


def density_finite_rescaled(N, nu, masses, x):
    """Finite-N density in Dirac units: R_1(x~^2/4N) x~/(2N), masses m~/(2 sqrt N)."""
    x = np.asarray(x, dtype=float)
    spec = chgue_finite.EnsembleSpec(N, nu, tuple(m / (2.0 * np.sqrt(N)) for m in masses))
    return chgue_finite.density(spec, x * x / (4.0 * N)) * x / (2.0 * N)


# ---------------------------------------------------------------------------
# gap probability and smallest eigenvalue

def _idet(nu, x, shift):
    if nu == 0:
        return 1.0
    mat = np.empty((nu, nu))
    for i in range(nu):
        for j in range(nu):
            mat[i, j] = bessel_i(i - j + shift, x)
    return np.linalg.det(mat)


def e0_micro(nu, x):
    """Quenched gap probability e^{-x^2/4} det[I_{i-j}(x)]."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("x must be >= 0")
    out = np.array([np.exp(-v * v / 4.0) * _idet(nu, v, 0) for v in xs.ravel()]).reshape(xs.shape)
    return float(out[0]) if np.ndim(x) == 0 else out


def p1_micro(nu, x):
    """Smallest-eigenvalue density (x/2) e^{-x^2/4} det[I_{i-j+2}(x)]."""
    xs = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(xs < 0):
        raise ValueError("x must be >= 0")
    out = np.array([0.5 * v * np.exp(-v * v / 4.0) * _idet(nu, v, 2) for v in xs.ravel()]).reshape(xs.shape)
    return float(out[0]) if np.ndim(x) == 0 else out


def e0_micro_massive(nu, masses, x, N=1000):
    """Massive gap probability from the finite-N formula at large N."""
    x = np.asarray(x, dtype=float)
    spec = chgue_finite.EnsembleSpec(N, nu, tuple(m / (2.0 * np.sqrt(N)) for m in masses))
    return chgue_finite.gap_e0(spec, x * x / (4.0 * N))


def p1_micro_massive(nu, masses, x, N=1000):
    """Massive smallest-eigenvalue density, -d/dx~ of e0_micro_massive."""
    x = np.asarray(x, dtype=float)
    spec = chgue_finite.EnsembleSpec(N, nu, tuple(m / (2.0 * np.sqrt(N)) for m in masses))
    return chgue_finite.p1(spec, x * x / (4.0 * N)) * x / (2.0 * N)


# ---------------------------------------------------------------------------
# D5 at zero lattice spacing

def density_d5_a0(nu, m, x):
    """Continuous density of gamma5 (D + m) and the zero-mode weight at -m.

    Returns (continuous part, nu).  The nu eigenvalues at -m are reported as
    an integer weight and never added to the continuous part.
    """
    x = np.asarray(x, dtype=float)
    ax = np.abs(x)
    inside = ax > m
    r = np.sqrt(np.where(inside, ax * ax - m * m, 0.0))
    val = 0.5 * ax * (bessel_j(nu, r) ** 2 - bessel_j(nu - 1, r) * bessel_j(nu + 1, r))
    cont = np.where(inside, val, 0.0)
    return (cont[()] if cont.ndim == 0 else cont), int(nu)
