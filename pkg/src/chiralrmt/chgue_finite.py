"""Finite-N chiral GUE with mass insertions.

Eigenvalues x_i >= 0 of W W^dagger, joint density proportional to
prod_i x_i^nu e^{-x_i} prod_f (x_i + m_f^2) times the squared Vandermonde.
Every characteristic-polynomial average is reduced to determinants of
Laguerre polynomials; coincident arguments are handled by derivative rows.
"""
import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from . import numerics
from .specfun import DomainError, laguerre, laguerre_table, ln_gamma

CONFLUENCE_TOL = 1e-6


@dataclass(frozen=True)
class EnsembleSpec:
    N: int
    nu: int = 0
    masses: Sequence[float] = field(default_factory=tuple)

    def __post_init__(self):
        if self.N < 1:
            raise ValueError("N must be >= 1")
        if self.nu < 0:
            raise ValueError("nu must be >= 0")
        object.__setattr__(self, "masses", tuple(float(m) for m in self.masses))
        if any(not np.isfinite(m) or m < 0 for m in self.masses):
            raise ValueError("masses must be finite and >= 0")

    @property
    def Nf(self):
        return len(self.masses)


@dataclass(frozen=True)
class MassSet:
    """Distinct values with multiplicities."""
    values: tuple
    multiplicities: tuple

    @classmethod
    def from_points(cls, points, tol=CONFLUENCE_TOL):
        vals, mult = [], []
        for p in points:
            for i, v in enumerate(vals):
                if _close(p, v, tol):
                    mult[i] += 1
                    break
            else:
                vals.append(p)
                mult.append(1)
        return cls(tuple(vals), tuple(mult))

    @property
    def size(self):
        return sum(self.multiplicities)


@dataclass(frozen=True)
class SignedLog:
    """A number stored as sign * exp(log)."""
    sign: complex
    log: float

    @property
    def value(self):
        v = self.sign * np.exp(self.log)
        return v.real if np.isrealobj(v) or np.imag(v) == 0 else v

    def __float__(self):
        return float(np.real(self.value))

    def __truediv__(self, other):
        return SignedLog(self.sign / other.sign, self.log - other.log)

    def __mul__(self, other):
        return SignedLog(self.sign * other.sign, self.log + other.log)


def _close(p, q, tol):
    return abs(p - q) <= tol * max(1.0, abs(p), abs(q))


# ---------------------------------------------------------------------------
# quenched ingredients

def monic_p(n, nu, x):
    """Monic Laguerre polynomial P_n(x) = (-1)^n n! L_n^nu(x)."""
    fact = float(math.factorial(n)) if n <= 170 else np.exp(ln_gamma(n + 1.0))
    return (-1) ** n * fact * laguerre(n, nu, x)


def log_norm_h(n, nu):
    return ln_gamma(n + 1.0) + ln_gamma(n + nu + 1.0)


def norm_h(n, nu):
    """Squared norm h_n = n! Gamma(n + nu + 1)."""
    return float(np.exp(log_norm_h(n, nu)))


@dataclass(frozen=True)
class NormTable:
    nu: int
    h: tuple

    @classmethod
    def build(cls, N, nu):
        return cls(nu, tuple(norm_h(k, nu) for k in range(N)))


def log_z_quenched(N, nu):
    """log of N! prod_{l<N} h_l."""
    return ln_gamma(N + 1.0) + sum(log_norm_h(l, nu) for l in range(N))


def _laguerre_pair(N, nu, x):
    """L_{N-1}^nu(x), L_N^nu(x)."""
    tab = laguerre_table(N, nu, x)
    return tab[N - 1], tab[N]


def kernel_quenched(N, nu, x, y, method="cd"):
    """K_N(x, y) = sum_{l<N} P_l(x) P_l(y) / h_l.

    method "cd" uses the Christoffel-Darboux form (derivative form on the
    diagonal), "sum" the explicit sum.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    if method == "sum":
        tx = laguerre_table(N - 1, nu, x)
        ty = laguerre_table(N - 1, nu, y)
        k = np.arange(N)
        c = np.exp(ln_gamma(k + 1.0) - ln_gamma(k + nu + 1.0))
        c = c.reshape((N,) + (1,) * np.broadcast(x, y).ndim)
        out = np.sum(c * tx * ty, axis=0)
        return out[()] if out.ndim == 0 else out
    x, y = np.broadcast_arrays(x, y)
    pref = np.exp(ln_gamma(N + 1.0) - ln_gamma(N + nu + 0.0))
    lx1, lx = _laguerre_pair(N, nu, x)
    ly1, ly = _laguerre_pair(N, nu, y)
    diff = x - y
    diag = np.abs(diff) <= CONFLUENCE_TOL * np.maximum(1.0, np.abs(x))
    safe = np.where(diag, 1.0, diff)
    off = pref * (lx1 * ly - lx * ly1) / safe
    # derivative form: -(L_{N-1} L_N' - L_N L_{N-1}') with L_n' = -L_{n-1}^{nu+1}
    d1 = -laguerre(N - 1, nu + 1, x)
    d0 = -laguerre(N - 2, nu + 1, x) if N >= 2 else np.zeros_like(x)
    on = -pref * (lx1 * d1 - lx * d0)
    out = np.where(diag, on, off)
    return out[()] if out.ndim == 0 else out


# ---------------------------------------------------------------------------
# generic characteristic-polynomial averages


def _cluster_rows(n0, count, nu, y, mult):
    """Rows L^{(k)}_{n0..n0+count-1}(y)/k! for k < mult; shape y.shape + (mult, count)."""
    y = np.asarray(y)
    rows = []
    kfact = 1.0
    for k in range(mult):
        if k:
            kfact *= k
        nmax = n0 + count - 1 - k
        row = np.zeros(y.shape + (count,), dtype=np.result_type(y, float))
        if nmax >= 0:
            tab = laguerre_table(nmax, nu + k, y)  # L_j^{nu+k}, j = 0..nmax
            for c in range(count):
                j = n0 + c - k
                if j >= 0:
                    row[..., c] = (-1) ** k * tab[j] / kfact
        rows.append(row)
    return np.stack(rows, axis=-2)


def _avg_clusters(n, nu, clusters):
    """<prod_i prod_points (y - x_i)>_n for clusters [(y_array, mult), ...].

    The cluster values broadcast against each other; returns (sign, log).
    Clusters must be pairwise distinct.
    """
    K = sum(m for _, m in clusters)
    if K == 0:
        shape = np.broadcast(*[np.asarray(c[0]) for c in clusters]).shape if clusters else ()
        return np.ones(shape), np.zeros(shape)
    vals = np.broadcast_arrays(*[np.asarray(c[0]) for c in clusters])
    blocks = [_cluster_rows(n, K, nu, v, m) for v, (_, m) in zip(vals, clusters)]
    mat = np.concatenate(blocks, axis=-2)
    sgn, logd = np.linalg.slogdet(mat)
    # confluent Vandermonde prod_{a<b} (y_b - y_a)^{r_a r_b}
    for a in range(len(clusters)):
        for b in range(a + 1, len(clusters)):
            p = clusters[a][1] * clusters[b][1]
            d = vals[b] - vals[a]
            logd = logd - p * np.log(np.abs(d))
            sgn = sgn / (d / np.abs(d)) ** p
    # column factors (-1)^j j! for j = n..n+K-1
    js = np.arange(n, n + K)
    logd = logd + float(np.sum(ln_gamma(js + 1.0)))
    sgn = sgn * (-1.0) ** int(np.sum(js))
    return sgn, logd


def _merge(points_mult, tol=CONFLUENCE_TOL):
    # merged clusters sit at the mean of their members: the average is
    # symmetric in the points, so the merging error is second order
    vals, mult, sums = [], [], []
    for v, m in points_mult:
        for i, u in enumerate(vals):
            if _close(v, u, tol):
                mult[i] += m
                sums[i] = sums[i] + m * v
                vals[i] = sums[i] / mult[i]
                break
        else:
            vals.append(v)
            mult.append(m)
            sums.append(m * v)
    return list(zip(vals, mult))


def _avg_points(n, nu, points_mult):
    """Batched average with automatic confluence handling.

    points_mult: list of (array_or_scalar, multiplicity).  Elements where
    two groups coincide are recomputed with the groups merged.
    """
    vals = np.broadcast_arrays(*[np.asarray(p[0]) for p in points_mult])
    shape = vals[0].shape if vals else ()
    mults = [p[1] for p in points_mult]
    bad = np.zeros(shape, dtype=bool)
    for a in range(len(vals)):
        for b in range(a + 1, len(vals)):
            bad |= np.abs(vals[a] - vals[b]) <= CONFLUENCE_TOL * np.maximum(
                1.0, np.maximum(np.abs(vals[a]), np.abs(vals[b])))
    # keep the Vandermonde finite on colliding entries; they are overwritten
    safe = [np.where(bad, i + 1.0, v) for i, v in enumerate(vals)]
    sgn, logd = _avg_clusters(n, nu, [(v, m) for v, m in zip(safe, mults)])
    sgn = np.array(sgn, dtype=complex if np.iscomplexobj(sgn) else float)
    logd = np.array(logd, dtype=float)
    for idx in zip(*np.nonzero(bad)) if bad.ndim else ([()] if bad else []):
        merged = _merge([(v[idx], m) for v, m in zip(vals, mults)])
        s1, l1 = _avg_clusters(n, nu, merged)
        sgn[idx] = s1
        logd[idx] = l1
    return sgn, logd


def avg_char_poly(spec, points):
    """<prod_i prod_j (y_j - x_i)>_N for the quenched ensemble.

    points is a sequence of arguments (coincident ones are treated
    confluently) or a MassSet.  Returns a SignedLog.
    """
    if spec.masses:
        raise ValueError("avg_char_poly works with the quenched average")
    if isinstance(points, MassSet):
        clusters = list(zip(points.values, points.multiplicities))
    else:
        clusters = _merge([(p, 1) for p in points])
    s, l = _avg_clusters(spec.N, spec.nu, clusters)
    return SignedLog(s[()] if np.ndim(s) == 0 else s, float(l))


def three_point(N, nu, v1, v2, u):
    """<prod (v1-x)(v2-x)(u-x)>_N through K_{N+1} and P_{N+1}."""
    k1 = kernel_quenched(N + 1, nu, v1, u)
    k2 = kernel_quenched(N + 1, nu, v2, u)
    p1 = monic_p(N + 1, nu, v1)
    p2 = monic_p(N + 1, nu, v2)
    return norm_h(N, nu) / (v2 - v1) * (k1 * p2 - k2 * p1)


# ---------------------------------------------------------------------------
# massive quantities

def _mass_points(masses):
    return [(-m * m, 1) for m in masses]


def z_massive(spec):
    """Partition function with N_f mass insertions, as a SignedLog.

    Z = N! prod h_l * <prod_i prod_f (x_i + m_f^2)>.
    """
    N, Nf = spec.N, spec.Nf
    lz = log_z_quenched(N, spec.nu)
    if Nf == 0:
        return SignedLog(1.0, lz)
    s, l = _avg_points(N, spec.nu, _merge(_mass_points(spec.masses)))
    return SignedLog(float(np.real(s)) * (-1.0) ** (N * Nf), float(l) + lz)


def massive_op(n, spec, x):
    """Monic orthogonal polynomial of degree n for the mass-deformed weight.

    Christoffel's formula, written as a ratio of characteristic-polynomial
    averages so that x = -m_f^2 needs no special treatment.
    """
    if n == 0:
        return np.ones_like(np.asarray(x, dtype=float))[()]
    if spec.Nf == 0:
        return monic_p(n, spec.nu, x)
    mp = _merge(_mass_points(spec.masses))
    s1, l1 = _avg_points(n, spec.nu, [(np.asarray(x, dtype=float), 1)] + mp)
    s0, l0 = _avg_points(n, spec.nu, mp)
    out = np.real(s1 / s0) * np.exp(l1 - l0)
    return out[()] if np.ndim(out) == 0 else out


def kernel_massive(spec, x, y):
    """Kernel K_N^{[N_f]}(x, y) of the mass-deformed weight (no weight factors).

    Ratio of the (N-1)-average of characteristic polynomials at x, y and
    -m_f^2 to h_{N-1} times the N-average at -m_f^2.
    """
    N, Nf, nu = spec.N, spec.Nf, spec.nu
    if Nf == 0:
        return kernel_quenched(N, nu, x, y)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    mp = _merge(_mass_points(spec.masses))
    s1, l1 = _avg_points(N - 1, nu, [(x, 1), (y, 1)] + mp)
    s0, l0 = _avg_points(N, nu, mp)
    sign = (-1.0) ** ((N - 1) * Nf - N * Nf)
    out = sign * np.real(s1 / s0) * np.exp(l1 - l0 - log_norm_h(N - 1, nu))
    return out[()] if np.ndim(out) == 0 else out


def weight(spec, x):
    """x^nu e^{-x} prod_f (x + m_f^2)."""
    x = np.asarray(x, dtype=float)
    w = x ** spec.nu * np.exp(-x)
    for m in spec.masses:
        w = w * (x + m * m)
    return w


def density(spec, x):
    """Spectral density R_1(x) = w(x) K_N^{[N_f]}(x, x)."""
    x = np.asarray(x, dtype=float)
    if np.any(x < 0):
        raise DomainError("density is defined for x >= 0")
    out = weight(spec, x) * kernel_massive(spec, x, x)
    return out[()] if np.ndim(out) == 0 else out


def weighted_kernel(spec):
    """sqrt(w(x) w(y)) K_N^{[N_f]}(x, y) as a broadcasting callable."""
    def k(x, y):
        return np.sqrt(weight(spec, x) * weight(spec, y)) * kernel_massive(spec, x, y)
    return k


# ---------------------------------------------------------------------------
# gap probability and smallest eigenvalue

def _gap_g(spec, s):
    """log|G(s)| and sign, G(s) = <prod_i (s+y_i)^nu prod_f (m_f^2+s+y_i)> at nu=0."""
    s = np.asarray(s, dtype=float)
    offsets = [(0.0, spec.nu)] if spec.nu else []
    offsets += [(m * m, 1) for m in spec.masses]
    offsets = _merge(offsets)
    if not offsets:
        return np.ones_like(s), np.zeros_like(s)
    clusters = [(-s - d, r) for d, r in offsets]
    return _avg_clusters(spec.N, 0, clusters)


def gap_e0(spec, s):
    """Probability E_0(s) that no eigenvalue lies in [0, s].

    Shifting x -> x + s turns the weight into e^{-Ns} times an average of
    characteristic polynomials at nu = 0, normalized at s = 0.
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("gap_e0 needs s >= 0")
    sg, lg = _gap_g(spec, s)
    s0, l0 = _gap_g(spec, np.zeros(1))
    out = np.real(sg / s0[0]) * np.exp(lg - l0[0] - spec.N * s)
    return out[()] if np.ndim(out) == 0 else out


def _gap_any(spec, s):
    # the shifted formula is analytic in s, so it may be evaluated for s < 0
    s = np.asarray(s, dtype=float)
    sg, lg = _gap_g(spec, s)
    s0, l0 = _gap_g(spec, np.zeros(1))
    return np.real(sg / s0[0]) * np.exp(lg - l0[0] - spec.N * s)


def p1(spec, s, h=None):
    """Smallest-eigenvalue density p_1(s) = -dE_0/ds.

    Central differences with two Richardson steps; the default step is a
    fixed fraction of the hard-edge length scale 1/(N + nu + N_f).
    """
    s = np.asarray(s, dtype=float)
    if np.any(s < 0):
        raise DomainError("p1 needs s >= 0")
    if h is None:
        h = 0.02 / (spec.N + spec.nu + spec.Nf)

    def d(hh):
        return (_gap_any(spec, s - hh) - _gap_any(spec, s + hh)) / (2.0 * hh)

    d1, d2, d4 = d(h), d(h / 2.0), d(h / 4.0)
    r1, r2 = (4.0 * d2 - d1) / 3.0, (4.0 * d4 - d2) / 3.0
    out = (16.0 * r2 - r1) / 15.0
    return out[()] if np.ndim(out) == 0 else out


# ---------------------------------------------------------------------------
# Cauchy transform and brute-force oracle

def cauchy_transform(k, nu, y):
    """C_k(y) = (1/2 pi i) int_0^inf P_k(t) t^nu e^{-t} / (t - y) dt."""
    y = complex(y)
    if y.imag == 0:
        raise DomainError("Cauchy transform needs Im y != 0")

    def f(t):
        return monic_p(k, nu, t) * t ** nu * np.exp(-t) / (t - y)

    bp = (y.real,) if y.real > 0 else ()
    val, _ = numerics.integrate_1d(f, (0.0, np.inf), abs_tol=1e-300, rel_tol=1e-12,
                                   breakpoints=bp)
    return val / (2j * np.pi)


def brute_force_avg(N, nu, observable, masses=(), tol=1e-12):
    """Normalized N-fold integral of observable(x) against the joint density.

    observable takes an (npts, N) array.  Uses integrate_nd with
    Gauss-Laguerre nodes (the weight carries e^{-x}).
    """
    if N > 4:
        raise numerics.UnsupportedDimension("brute_force_avg supports N <= 4")

    def jpdf(x):
        w = np.prod(x ** nu * np.exp(-x), axis=1)
        for m in masses:
            w = w * np.prod(x + m * m, axis=1)
        v = np.ones(len(x))
        for i in range(N):
            for j in range(i + 1, N):
                v = v * (x[:, j] - x[:, i])
        return w * v * v

    doms = [(0.0, np.inf, "exp")] * N
    norm, _ = numerics.integrate_nd(jpdf, doms, tol=tol)
    val, _ = numerics.integrate_nd(lambda x: jpdf(x) * observable(x), doms, tol=tol)
    return val / norm


def brute_force_z(N, nu, masses=(), tol=1e-12):
    """Unnormalized partition integral by integrate_nd (oracle)."""
    def jpdf(x):
        w = np.prod(x ** nu * np.exp(-x), axis=1)
        for m in masses:
            w = w * np.prod(x + m * m, axis=1)
        v = np.ones(len(x))
        for i in range(N):
            for j in range(i + 1, N):
                v = v * (x[:, j] - x[:, i])
        return w * v * v
    return numerics.integrate_nd(jpdf, [(0.0, np.inf, "exp")] * N, tol=tol)[0]
