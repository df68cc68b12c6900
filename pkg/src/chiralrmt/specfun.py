"""Special functions used throughout the package.

Log-gamma, integer-order Bessel functions J, I, K and generalized Laguerre
polynomials.  Everything is vectorized over the argument with numpy.
"""
import enum
import math

import numpy as np


class DomainError(ValueError):
    """Argument outside the domain of a function."""


class BesselKind(enum.Enum):
    J = "J"
    I = "I"
    K = "K"


# Lanczos approximation, g = 7, n = 9
_LANCZOS_G = 7.0
_LANCZOS = np.array([
    0.99999999999980993,
    676.5203681218851,
    -1259.1392167224028,
    771.32342877765313,
    -176.61502916214059,
    12.507343278686905,
    -0.13857109526572012,
    9.9843695780195716e-6,
    1.5056327351493116e-7,
])
_HALF_LOG_2PI = 0.5 * np.log(2.0 * np.pi)


def _lngamma_lanczos(x):
    # valid for x >= 0.5
    z = x - 1.0
    s = np.full_like(z, _LANCZOS[0])
    for k in range(1, 9):
        s = s + _LANCZOS[k] / (z + k)
    t = z + _LANCZOS_G + 0.5
    return _HALF_LOG_2PI + (z + 0.5) * np.log(t) - t + np.log(s)


def ln_gamma(x):
    """Natural log of the gamma function for x > 0.

    Lanczos rational approximation, with the reflection formula below 1/2.
    """
    arr = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(arr > 0)):
        raise DomainError("ln_gamma requires x > 0")
    out = np.empty_like(arr)
    lo = arr < 0.5
    out[~lo] = _lngamma_lanczos(arr[~lo])
    if np.any(lo):
        xl = arr[lo]
        out[lo] = np.log(np.pi / np.sin(np.pi * xl)) - _lngamma_lanczos(1.0 - xl)
    return float(out[0]) if np.ndim(x) == 0 else out


# ---------------------------------------------------------------------------
# Bessel functions of integer order

_SERIES_RADIUS = 1.0


def _bessel_series(n, z, sign):
    """Power series sum_k (sign z^2/4)^k / (k! (k+n)!) * (z/2)^n."""
    z = np.asarray(z)
    q = sign * z * z / 4.0
    fact = float(math.factorial(n)) if n <= 170 else np.exp(ln_gamma(n + 1.0))
    term = (z / 2.0) ** n / fact
    total = term.copy()
    for k in range(1, 200):
        term = term * q / (k * (k + n))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return total


def _miller_start(n, zmax):
    m = max(n, int(zmax)) + 20 + int(np.sqrt(40.0 * max(n, zmax, 1.0)))
    return m + (m % 2)


def _bessel_j_miller(n, z):
    """J_n(z) by downward recurrence normalized with J_0 + 2 sum J_2k = 1."""
    m = _miller_start(n, np.max(np.abs(z)))
    two_over_z = 2.0 / z
    jp = np.zeros_like(z)
    j = np.ones_like(z) * 1e-30
    result = np.zeros_like(z)
    norm = np.zeros_like(z)
    for k in range(m, 0, -1):
        jm = k * two_over_z * j - jp
        jp, j = j, jm
        # j now holds J_{k-1}
        if k - 1 == n:
            result = j.copy()
        if (k - 1) % 2 == 0 and k - 1 > 0:
            norm = norm + 2.0 * j
        big = np.abs(j) > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            j, jp, result, norm = j * scale, jp * scale, result * scale, norm * scale
    norm = norm + j  # J_0
    return result / norm


def bessel_j(n, x):
    """J_n(x) for integer n and real or complex x."""
    n = int(n)
    if n < 0:
        return (-1) ** n * bessel_j(-n, x)
    scalar = np.ndim(x) == 0
    z = np.atleast_1d(np.asarray(x))
    cplx = np.iscomplexobj(z)
    z = z.astype(complex if cplx else float)
    out = np.zeros_like(z)
    small = np.abs(z) <= _SERIES_RADIUS
    if np.any(small):
        out[small] = _bessel_series(n, z[small], -1.0)
    if np.any(~small):
        out[~small] = _bessel_j_miller(n, z[~small])
    return out[0] if scalar else out


def _bessel_i_miller(n, x, scaled=False):
    """I_n(x), x > 0, downward recurrence normalized with e^x = I_0 + 2 sum I_k."""
    m = _miller_start(n, np.max(x))
    two_over_x = 2.0 / x
    ip = np.zeros_like(x)
    i = np.ones_like(x) * 1e-30
    result = np.zeros_like(x)
    norm = np.zeros_like(x)
    for k in range(m, 0, -1):
        im = k * two_over_x * i + ip
        ip, i = i, im
        if k - 1 == n:
            result = i.copy()
        if k - 1 > 0:
            norm = norm + 2.0 * i
        big = i > 1e200
        if np.any(big):
            scale = np.where(big, 1e-200, 1.0)
            i, ip, result, norm = i * scale, ip * scale, result * scale, norm * scale
    norm = norm + i
    # I_n(x) = result / norm * e^x
    return result / norm if scaled else result / norm * np.exp(x)


def bessel_i(n, x, scaled=False):
    """Modified Bessel I_n(x) for integer n and real x; e^{-|x|} I_n(x) if scaled."""
    n = abs(int(n))
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    sgn = np.where(xa < 0, (-1.0) ** n, 1.0)
    ax = np.abs(xa)
    out = np.zeros_like(ax)
    small = ax <= _SERIES_RADIUS
    if np.any(small):
        out[small] = _bessel_series(n, ax[small], 1.0)
        if scaled:
            out[small] *= np.exp(-ax[small])
    if np.any(~small):
        out[~small] = _bessel_i_miller(n, ax[~small], scaled)
    out = out * sgn
    return float(out[0]) if scalar else out


def _k_trapezoid(n, x, scaled):
    """K_n(x) = int_0^inf exp(-x cosh t) cosh(n t) dt by step-halving trapezoid.

    This is the t^(-n-1) exp(-t - x^2/4t) representation after t -> (x/2) e^u.
    """
    out = np.empty_like(x)
    for idx, xv in np.ndenumerate(x):
        # integrand in logs: -x cosh t + n t (cosh(n t) ~ e^{nt}/2)
        tmax = 1.0
        peak = np.arcsinh(n / xv) if n > 0 else 0.0
        gpeak = -xv * np.cosh(peak) + n * peak
        tmax = max(peak + 1.0, 1.0)
        while -xv * np.cosh(tmax) + n * tmax > gpeak - 45.0:
            tmax *= 1.3
        shift = xv if scaled else 0.0
        h = 0.5
        prev = None
        for _ in range(12):
            t = np.arange(0.0, tmax + h, h)
            f = np.exp(-xv * np.cosh(t) + shift) * np.cosh(n * t)
            val = h * (f.sum() - 0.5 * f[0])
            if prev is not None and abs(val - prev) <= 1e-15 * abs(val):
                break
            prev = val
            h *= 0.5
        out[idx] = val
    return out


def _k_steed(x):
    """Scaled e^x K_0(x) and e^x K_1(x) by Steed's continued fraction, x >= 2."""
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
    for i in range(1, 500):
        a -= 2 * i
        c = -a * c / (i + 1.0)
        qnew = (q1 - b * q2) / a
        q1, q2 = q2, qnew
        q = q + c * qnew
        b = b + 2.0
        d = 1.0 / (b + a * d)
        delh = (b * d - 1.0) * delh
        h = h + delh
        dels = q * delh
        s = s + dels
        if np.all(np.abs(dels) < 1e-17 * np.abs(s)):
            break
    k0 = np.sqrt(np.pi / (2.0 * x)) / s
    k1 = k0 * (x + 0.5 - a1 * h) / x
    return k0, k1


def bessel_k(n, x, scaled=False):
    """Modified Bessel K_n(x) for integer n and x > 0.

    With scaled=True returns e^x K_n(x) (used internally for weights that
    combine K with a growing exponential).
    """
    n = abs(int(n))
    scalar = np.ndim(x) == 0
    xa = np.atleast_1d(np.asarray(x, dtype=float))
    if np.any(~(xa > 0)):
        raise DomainError("K_n requires x > 0")
    out = np.empty_like(xa)
    lo = xa < 2.0
    if np.any(lo):
        out[lo] = _k_trapezoid(n, xa[lo], scaled)
    if np.any(~lo):
        xh = xa[~lo]
        k0, k1 = _k_steed(xh)
        if n == 0:
            kn = k0
        else:
            km, kn = k0, k1
            for j in range(1, n):
                km, kn = kn, km + (2.0 * j / xh) * kn
        out[~lo] = kn if scaled else kn * np.exp(-xh)
    return float(out[0]) if scalar else out


def bessel(kind, nu, x):
    """Dispatch to J, I or K of integer order nu."""
    kind = BesselKind(kind) if not isinstance(kind, BesselKind) else kind
    if int(nu) != nu:
        raise DomainError("only integer orders are supported")
    if kind is BesselKind.J:
        return bessel_j(nu, x)
    if kind is BesselKind.I:
        return bessel_i(nu, x)
    return bessel_k(nu, x)


# ---------------------------------------------------------------------------
# Laguerre polynomials

def laguerre(n, nu, x, deriv=0):
    """Generalized Laguerre L_n^nu(x), or its deriv-th derivative.

    Uses (k+1) L_{k+1} = (2k+nu+1-x) L_k - (k+nu) L_{k-1} and
    d/dx L_n^nu = -L_{n-1}^{nu+1}.
    """
    if nu <= -1:
        raise DomainError("Laguerre index must exceed -1")
    if deriv > 0:
        if deriv > n:
            return np.zeros_like(np.asarray(x) * 1.0) if np.ndim(x) else 0.0 * x
        return (-1) ** deriv * laguerre(n - deriv, nu + deriv, x)
    x = np.asarray(x)
    lm = np.zeros_like(x * 1.0)
    lk = np.ones_like(x * 1.0)
    for k in range(n):
        lm, lk = lk, ((2 * k + nu + 1 - x) * lk - (k + nu) * lm) / (k + 1)
    return lk[()] if lk.ndim == 0 else lk


def laguerre_table(nmax, nu, x):
    """All L_k^nu(x) for k = 0..nmax, stacked along axis 0."""
    x = np.asarray(x)
    out = np.empty((nmax + 1,) + x.shape, dtype=np.result_type(x, float))
    out[0] = 1.0
    if nmax >= 1:
        out[1] = 1.0 + nu - x
    for k in range(1, nmax):
        out[k + 1] = ((2 * k + nu + 1 - x) * out[k] - (k + nu) * out[k - 1]) / (k + 1)
    return out
