"""Wilson chiral ensembles at finite lattice spacing.

The antisymmetric weight F, the Pfaffian joint density of the Hermitian
Wilson operator D5 (quenched), and the epsilon-regime partition functions
with the W8 term only.
"""
from dataclasses import dataclass

import numpy as np
from scipy.special import erfc, erfcx

from . import numerics
from .specfun import DomainError, bessel_i


@dataclass(frozen=True)
class WilsonParams:
    n: int = 1
    nu: int = 0
    a: float = 0.2
    m: float = 0.0
    m_hat: float = 0.0
    a8: float = 0.0

    @property
    def dim(self):
        return 2 * self.n + self.nu

    def a8_of_a(self):
        """Rescaled spacing from the model coupling, a8^2 = a^2 n / 4."""
        return self.a * np.sqrt(self.n / 4.0)


def _check_a(a):
    if not 0.0 < a < 1.0:
        raise DomainError("the weight F needs 0 < a < 1")


def _shifted_tail(m, sigma, shift):
    """e^{shift^2/(2 sigma^2)} int_m^inf exp(-(u - shift)^2/(2 sigma^2)) du / (sigma sqrt(pi/2)).

    Equals e^{A} erfc(z) with A = shift^2/(2 sigma^2) and z = (m - shift)/(sqrt2 sigma),
    evaluated through erfcx where the two factors would over/underflow.
    """
    z = (m - shift) / (np.sqrt(2.0) * sigma)
    big_a = shift * shift / (2.0 * sigma * sigma)
    pos = z > 0
    zp = np.where(pos, z, 0.0)
    with np.errstate(over="ignore"):
        out_pos = np.exp(big_a - zp * zp) * erfcx(zp)
        out_neg = np.exp(big_a) * erfc(np.where(pos, 0.0, z))
    return np.where(pos, out_pos, out_neg)


def f_weight(x, p, method="closed"):
    """Antisymmetric weight F(x).

    F(x) = 4/sqrt(2 pi s2) int_m^inf du exp(-u^2/(2 s2)) sinh(x u/(2 a^2)),
    s2 = a^2 (1 - a^2).  Writing sinh as two exponentials turns each piece
    into a shifted Gaussian tail, giving e^{s2 k^2/2} [erfc(z-) - erfc(z+)]
    with k = x/(2 a^2).  method="quad" integrates the shifted Gaussians
    numerically instead.
    """
    _check_a(p.a)
    x = np.asarray(x, dtype=float)
    s2 = p.a * p.a * (1.0 - p.a * p.a)
    sigma = np.sqrt(s2)
    shift = s2 * x / (2.0 * p.a * p.a)
    if method == "closed":
        # odd in x: evaluate at |x| and restore the sign (avoids cancellation)
        sh = np.abs(shift)
        out = np.sign(x) * (_shifted_tail(p.m, sigma, sh) - _shifted_tail(p.m, sigma, -sh))
        return out[()] if out.ndim == 0 else out
    flat = np.atleast_1d(x).ravel()
    vals = []
    norm = 4.0 / np.sqrt(2.0 * np.pi * s2)
    for xv, sv in zip(flat, np.atleast_1d(shift).ravel()):
        lg = sv * sv / (2.0 * s2)

        def g(u, sv=sv, lg=lg):
            with np.errstate(over="ignore"):
                return 0.5 * (np.exp(-(u - sv) ** 2 / (2 * s2) + lg)
                              - np.exp(-(u + sv) ** 2 / (2 * s2) + lg))

        bp = tuple(b for b in (abs(sv),) if b > p.m)
        val, _ = numerics.integrate_1d(g, (p.m, np.inf), abs_tol=1e-300, rel_tol=1e-13,
                                       breakpoints=bp)
        vals.append(norm * val)
    out = np.array(vals).reshape(np.shape(x))
    return out[()] if out.ndim == 0 else out


def log_f_weight(x, p):
    """(log|F(x)|, sign F(x)), finite where F itself would overflow."""
    _check_a(p.a)
    x = np.asarray(x, dtype=float)
    s2 = p.a * p.a * (1.0 - p.a * p.a)
    sigma = np.sqrt(s2)
    sh = np.abs(s2 * x / (2.0 * p.a * p.a))
    big_a = sh * sh / (2.0 * s2)
    zm = (p.m - sh) / (np.sqrt(2.0) * sigma)
    zp = (p.m + sh) / (np.sqrt(2.0) * sigma)
    with np.errstate(divide="ignore", over="ignore", under="ignore"):
        # erfc(zm) - erfc(zp) without cancellation or underflow
        pos = zm > 0
        zmp = np.where(pos, zm, 0.0)
        lpos = -zmp * zmp + np.log(erfcx(zmp) - np.exp(zmp * zmp - zp * zp) * erfcx(zp))
        lneg = np.log(erfc(np.where(pos, 0.0, zm)) - erfc(np.where(pos, 1.0, zp)))
        out = big_a + np.where(pos, lpos, lneg)
    out = np.where(x == 0, -np.inf, out)
    return (out[()] if out.ndim == 0 else out), np.sign(x)


def pfaffian_matrix(d, p):
    """Antisymmetric (2n+2nu)-matrix of the D5 joint density."""
    d = np.asarray(d, dtype=float)
    k = len(d)
    nu = p.nu
    mat = np.zeros((k + nu, k + nu))
    diff = d[None, :] - d[:, None]  # d_j - d_i
    mat[:k, :k] = f_weight(diff, p)
    for q in range(nu):
        col = d ** q * np.exp(-d * p.m / (2.0 * p.a * p.a))
        mat[:k, k + q] = col
        mat[k + q, :k] = -col
    return mat


def jpdf_d5(d, p, log_prefactor=True):
    """Unnormalized quenched joint density of the 2n+nu eigenvalues of D5."""
    d = np.asarray(d, dtype=float)
    if len(d) != p.dim:
        raise ValueError("expected %d eigenvalues" % p.dim)
    _check_a(p.a)
    pref = p.n * p.m * p.m / (2.0 * p.a * p.a * (1.0 - p.a * p.a)) if log_prefactor else 0.0
    gauss = np.exp(pref - np.sum(d * d) / (4.0 * p.a * p.a))
    return gauss * numerics.vandermonde(d) * numerics.pfaffian(pfaffian_matrix(d, p))


def jpdf_d5_n1(d1, d2, p):
    """Vectorized n = 1, nu = 0 density: Gaussian factors times (d2 - d1) F(d2 - d1)."""
    if p.n != 1 or p.nu != 0:
        raise ValueError("jpdf_d5_n1 is the n=1, nu=0 case")
    d1 = np.asarray(d1, dtype=float)
    d2 = np.asarray(d2, dtype=float)
    pref = p.m * p.m / (2.0 * p.a * p.a * (1.0 - p.a * p.a))
    lf, sf = log_f_weight(d2 - d1, p)
    with np.errstate(divide="ignore"):
        logv = pref - (d1 * d1 + d2 * d2) / (4.0 * p.a * p.a) + np.log(np.abs(d2 - d1)) + lf
    # (d2 - d1) F(d2 - d1) >= 0 since F is odd and increasing through 0
    return np.where(d1 == d2, 0.0, np.exp(logv) * sf * np.sign(d2 - d1))


# ---------------------------------------------------------------------------
# partition functions

def _theta_integral(n, m_hat, a8, tol=1e-13):
    """e^{2a8^2} int dtheta/2pi cos(n theta) exp(m cos - 4 a8^2 cos^2), periodic trapezoid."""
    pts = 512
    prev = None
    while True:
        th = 2.0 * np.pi * np.arange(pts) / pts
        c = np.cos(th)
        val = np.mean(np.cos(n * th) * np.exp(m_hat * c - 4.0 * a8 * a8 * c * c + 2.0 * a8 * a8))
        if prev is not None and abs(val - prev) <= tol * max(abs(val), 1e-300):
            return val
        if pts > 1 << 16:
            raise numerics.ConvergenceError("theta integral did not stabilize", val, abs(val - prev))
        prev = val
        pts *= 2


def z_wechpt(nf, nu, m_hat, a8):
    """Degenerate-mass partition function with the W8 term.

    det_{j,k} of the one-flavour theta integrals with index nu + k - j.
    """
    if nf == 0:
        return 1.0
    mat = np.empty((nf, nf))
    for j in range(nf):
        for k in range(nf):
            mat[j, k] = _theta_integral(nu + k - j, m_hat, a8)
    return float(np.linalg.det(mat))


def z_wechpt_nf1_gaussian(nu, m_hat, a8, nodes=200, prefactor_sign=-1):
    """One-flavour partition function as a Gaussian average over shifted masses.

    e^{-2 a8^2} int dx/sqrt(pi) e^{-x^2} ((m - 4ix a8)/(m + 4ix a8))^{-nu/2}
    I_nu(sqrt(m^2 + 16 x^2 a8^2)), by Gauss-Hermite quadrature.  The leading
    exponent must be -2 a8^2 for this to equal the theta integral;
    prefactor_sign=+1 evaluates the variant with e^{+2 a8^2}.
    """
    x, w = np.polynomial.hermite.hermgauss(nodes)
    phi = np.arctan2(4.0 * x * a8, m_hat)   # arg(m + 4 i x a8)
    # ratio^{-nu/2} = e^{i nu phi}; the imaginary part is odd in x
    vals = np.cos(nu * phi) * bessel_i(nu, np.sqrt(m_hat * m_hat + 16.0 * x * x * a8 * a8))
    return float(np.exp(prefactor_sign * 2.0 * a8 * a8) * np.dot(w, vals) / np.sqrt(np.pi))
