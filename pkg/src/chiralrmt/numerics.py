"""Quadrature, determinants, Pfaffians and Fredholm determinants."""
import heapq
from dataclasses import dataclass

import numpy as np


class ConvergenceError(RuntimeError):
    """Raised when a numerical procedure fails to reach its tolerance.

    The best available estimate is kept in ``estimate`` and its error
    estimate in ``error``.
    """

    def __init__(self, message, estimate=None, error=None):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


class UnsupportedDimension(ValueError):
    pass


@dataclass(frozen=True)
class QuadratureRule:
    nodes: np.ndarray
    weights: np.ndarray
    domain: tuple

    def __post_init__(self):
        if len(self.nodes) < 2 or len(self.nodes) != len(self.weights):
            raise ValueError("need at least two nodes and matching weights")
        if np.any(self.weights <= 0) or np.any(np.diff(self.nodes) <= 0):
            raise ValueError("weights must be positive and nodes increasing")

    def __call__(self, f):
        return float(np.dot(self.weights, f(self.nodes)))


def gauss_legendre(n, a=-1.0, b=1.0):
    """n-point Gauss-Legendre rule mapped to [a, b]."""
    x, w = np.polynomial.legendre.leggauss(n)
    half = 0.5 * (b - a)
    return QuadratureRule(half * x + 0.5 * (a + b), half * w, (a, b))


def gauss_laguerre(n, a=0.0):
    """n-point rule for int_a^inf g(x) dx assuming g decays like e^{-x}.

    Nodes and weights of the e^{-x} Gauss rule with the weight folded back
    into the integrand, so the rule applies to g directly.
    """
    x, w = np.polynomial.laguerre.laggauss(n)
    # w e^{x} overflows for large n; combine in logs
    with np.errstate(divide="ignore"):
        weights = np.exp(np.log(w) + x)
    keep = weights > 0
    x, weights = x[keep], weights[keep]
    return QuadratureRule(x + a, weights, (a, np.inf))


# Gauss-Kronrod 7-15 nodes on [-1, 1]
_XK = np.array([
    -0.991455371120812639206854697526329, -0.949107912342758524526189684047851,
    -0.864864423359769072789712788640926, -0.741531185599394439863864773280788,
    -0.586087235467691130294144845693013, -0.405845151377397166906606412076961,
    -0.207784955007898467600689403773245, 0.0,
    0.207784955007898467600689403773245, 0.405845151377397166906606412076961,
    0.586087235467691130294144845693013, 0.741531185599394439863864773280788,
    0.864864423359769072789712788640926, 0.949107912342758524526189684047851,
    0.991455371120812639206854697526329])
_WK = np.array([
    0.022935322010529224963732008058970, 0.063092092629978553290700663189204,
    0.104790010322250183839876322541518, 0.140653259715525918745189590510238,
    0.169004726639267902826583426598550, 0.190350578064785409913256402421014,
    0.204432940075298892414161999234649, 0.209482141084727828012999174891714,
    0.204432940075298892414161999234649, 0.190350578064785409913256402421014,
    0.169004726639267902826583426598550, 0.140653259715525918745189590510238,
    0.104790010322250183839876322541518, 0.063092092629978553290700663189204,
    0.022935322010529224963732008058970])
_WG = np.array([
    0.129484966168869693270611432679082, 0.279705391489276667901467771423780,
    0.381830050505118944950369775488975, 0.417959183673469387755102040816327,
    0.381830050505118944950369775488975, 0.279705391489276667901467771423780,
    0.129484966168869693270611432679082])


def _gk_panel(f, a, b):
    half = 0.5 * (b - a)
    x = 0.5 * (a + b) + half * _XK
    fx = f(x)
    k = half * np.dot(_WK, fx)
    g = half * np.dot(_WG, fx[1::2])
    return k, abs(k - g)


def _half_line(f, a):
    # x = a - ln(1 - t), dx = dt / (1 - t)
    def g(t):
        t = np.minimum(t, 1.0 - 1e-16)
        x = a - np.log1p(-t)
        return f(x) / (1.0 - t)
    return g


def integrate_1d(f, domain, abs_tol=1e-12, rel_tol=1e-10, max_panels=2000,
                 breakpoints=()):
    """Adaptive Gauss-Kronrod (7-15) integration of a vectorized f.

    domain is (a, b) with b possibly np.inf.  A half-line is split into
    dyadic panels up to a probed cutoff L, beyond which the exponential
    substitution x = a + L - ln(1 - t) maps the tail to [0, 1).
    Returns (value, error_estimate).
    Complex-valued integrands are accepted.
    """
    a, b = float(domain[0]), float(domain[1])
    if np.isinf(b):
        # finite part [a, a + L] on dyadic panels, tail mapped by x = a + L - ln(1 - t)
        probe = a + 2.0 ** np.arange(0, 12)
        fp = np.abs(np.asarray(f(probe)))
        big = np.nonzero(fp > 1e-20 * max(fp.max(), 1e-300))[0]
        L = 2.0 ** (big[-1] + 1 if big.size else 1)
        segs = [(a, a + 0.5), (a + 0.5, a + 1.0)]
        segs += [(a + 2.0 ** (k - 1), a + 2.0 ** k) for k in range(1, int(np.log2(L)) + 1)]
        edges = [(p, q, f) for p, q in segs]
        tail = _half_line(f, a + L)
        edges.append((0.0, 1.0, tail))
        for p in breakpoints:
            for i, (lo_, hi_, fn) in enumerate(edges):
                if fn is f and lo_ < p < hi_:
                    edges[i:i + 1] = [(lo_, p, f), (p, hi_, f)]
                    break
    else:
        edges = [(a, b, f)]
        for p in sorted(breakpoints):
            if a < p < b:
                lo_, hi_, fn = edges[-1]
                edges[-1:] = [(lo_, p, f), (p, hi_, f)]
    heap = []
    total = 0.0
    err = 0.0
    counter = 0
    for p, q, fn in edges:
        v, e = _gk_panel(fn, p, q)
        total += v
        err += e
        heapq.heappush(heap, (-e, counter, p, q, v, fn))
        counter += 1
    while err > max(abs_tol, rel_tol * abs(total)):
        if len(heap) >= max_panels:
            raise ConvergenceError("integrate_1d did not converge", total, err)
        ne, _, p, q, v, fn = heapq.heappop(heap)
        m = 0.5 * (p + q)
        v1, e1 = _gk_panel(fn, p, m)
        v2, e2 = _gk_panel(fn, m, q)
        total += v1 + v2 - v
        err += e1 + e2 + ne
        heapq.heappush(heap, (-e1, counter, p, m, v1, fn))
        heapq.heappush(heap, (-e2, counter + 1, m, q, v2, fn))
        counter += 2
    # re-sum in a fixed order so the result does not depend on refinement history
    order = {id(fn): i for i, (_, _, fn) in enumerate(edges)}
    panels = sorted(heap, key=lambda t: (order[id(t[5])], t[2]))
    total = sum(t[4] for t in panels)
    err = sum(-t[0] for t in panels)
    return total, err


def _rule_1d(dom, n):
    """dom is (a, b), or (a, inf, 'exp') for an e^{-x} decay hint."""
    a, b = dom[0], dom[1]
    hint = dom[2] if len(dom) > 2 else None
    if np.isinf(b):
        if hint == "exp":
            r = gauss_laguerre(n, a)
            return r.nodes, r.weights
        return _exp_map_rule(n, a)
    r = gauss_legendre(n, a, b)
    return r.nodes, r.weights


def _exp_map_rule(n, a, panels=100):
    # x = a - ln(1 - t) with dyadic Gauss-Legendre panels in t towards t = 1,
    # i.e. panels of length ln 2 in x; the log singularity at t = 1 is avoided
    q = max(3, n // 4)
    x0, w0 = np.polynomial.legendre.leggauss(q)
    nodes, weights = [], []
    # on panel k, 1 - t = 2^-k (1 - u) with u in [0, 1/2]
    u = 0.25 + 0.25 * x0
    xloc = -np.log1p(-u)
    wloc = 0.25 * w0 / (1.0 - u)
    for k in range(panels):
        nodes.append(a + k * np.log(2.0) + xloc)
        weights.append(wloc)
    return np.concatenate(nodes), np.concatenate(weights)


def _tensor_integrate(f, domains, n, chunk=200000):
    rules = [_rule_1d(d, n) for d in domains]
    shape = tuple(len(r[0]) for r in rules)
    size = int(np.prod(shape))
    total = 0.0
    for s in range(0, size, chunk):
        idx = np.unravel_index(np.arange(s, min(s + chunk, size)), shape)
        pts = np.stack([r[0][i] for r, i in zip(rules, idx)], axis=1)
        w = np.prod(np.stack([r[1][i] for r, i in zip(rules, idx)], axis=1), axis=1)
        total = total + np.dot(w, f(pts))
    return total


def integrate_nd(f, domains, tol=1e-10, n0=12, max_nodes=None):
    """Tensorized Gauss quadrature in d <= 4 dimensions.

    f takes an array of shape (npts, d) and returns npts values.  Each
    domain is (a, b), or (a, np.inf, 'exp') when the integrand decays like
    e^{-x} (Gauss-Laguerre nodes).  The node count per dimension is doubled
    until successive results agree to tol (relative); the last difference
    is returned as the error estimate.
    """
    d = len(domains)
    if d > 4:
        raise UnsupportedDimension("integrate_nd supports d <= 4")
    if max_nodes is None:
        max_nodes = {1: 512, 2: 96, 3: 96, 4: 48}[max(d, 1)]
    n = n0
    prev = _tensor_integrate(f, domains, n)
    while True:
        n2 = min(2 * n, max_nodes) if n < max_nodes else None
        if n2 is None or n2 == n:
            raise ConvergenceError("integrate_nd did not converge", prev, np.inf)
        cur = _tensor_integrate(f, domains, n2)
        err = abs(cur - prev)
        if err <= tol * abs(cur) or err == 0.0:
            return cur, err
        prev, n = cur, n2


def det(m):
    """Determinant by LU with partial pivoting (LAPACK getrf)."""
    m = np.asarray(m)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise ValueError("det needs a square matrix")
    if m.shape[0] == 0:
        return 1.0
    return np.linalg.det(m)


def slogdet(m):
    """(sign, log|det|) with the sign complex for complex matrices."""
    m = np.asarray(m)
    if m.shape[0] == 0:
        return 1.0, 0.0
    return np.linalg.slogdet(m)


def vandermonde(points):
    """prod_{i<j} (x_j - x_i)."""
    x = np.asarray(points)
    out = 1.0 + 0.0 * x.sum() if x.size else 1.0
    for j in range(1, len(x)):
        out = out * np.prod(x[j] - x[:j])
    return out


def pfaffian(a):
    """Pfaffian of an even-dimensional antisymmetric matrix.

    Householder reduction to skew-tridiagonal form; the Pfaffian is the
    product of the superdiagonal entries at even positions times the
    determinants of the reflections (each -1).
    """
    a = np.asarray(a)
    a = np.array(a, dtype=np.result_type(a.dtype, float), copy=True)
    n = a.shape[0] if a.ndim else 0
    if a.shape != (n, n):
        raise ValueError("pfaffian needs a square matrix")
    if n % 2:
        raise ValueError("pfaffian of odd dimension is undefined")
    if n == 0:
        return 1.0
    cplx = np.iscomplexobj(a)
    pf = 1.0
    for k in range(n - 2):
        x = a[k + 1:, k].copy()
        alpha = np.linalg.norm(x)
        if alpha == 0.0:
            if k % 2 == 0:
                return 0.0 * pf
            continue
        # v maps x to a multiple of e1
        x0 = x[0]
        phase = x0 / abs(x0) if x0 != 0 else 1.0
        v = x.copy()
        v[0] += phase * alpha
        v /= np.linalg.norm(v)
        # apply H = I - 2 v v^H from both sides (congruence P A P^T, P = P^T for real)
        sub = a[k + 1:, :]
        if cplx:
            sub -= 2.0 * np.outer(v, v.conj() @ sub)
            a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v.conj(), v)
        else:
            sub -= 2.0 * np.outer(v, v @ sub)
            a[:, k + 1:] -= 2.0 * np.outer(a[:, k + 1:] @ v, v)
        # each Householder reflection has determinant -1
        pf = -pf
        if k % 2 == 0:
            pf = pf * a[k, k + 1]
    pf = pf * a[n - 2, n - 1]
    return pf


def pfaffian_slow(a):
    """Pfaffian by recursive expansion along the first row (oracle, small n)."""
    a = np.asarray(a)
    n = a.shape[0]
    if n == 0:
        return 1.0
    if n % 2:
        raise ValueError("pfaffian of odd dimension is undefined")
    total = 0.0
    idx = np.arange(n)
    for j in range(1, n):
        keep = idx[(idx != 0) & (idx != j)]
        total += (-1) ** (j + 1) * a[0, j] * pfaffian_slow(a[np.ix_(keep, keep)])
    return total


def fredholm_det(kernel, s, nodes=64, rel_tol=1e-12, max_nodes=1024):
    """det(1 - K) on L^2([0, s]) by Nystrom discretization.

    kernel(x, y) must broadcast over arrays.  The Gauss-Legendre node count
    starts at `nodes` and doubles until two successive values agree to
    rel_tol.
    """
    if s <= 0:
        return 1.0

    def value(n):
        r = gauss_legendre(n, 0.0, s)
        x, w = r.nodes, r.weights
        sw = np.sqrt(w)
        kmat = kernel(x[:, None], x[None, :])
        return np.linalg.det(np.eye(n) - sw[:, None] * kmat * sw[None, :])

    n = nodes
    prev = value(n)
    while n < max_nodes:
        n *= 2
        cur = value(n)
        if abs(cur - prev) <= rel_tol * max(abs(cur), 1e-300):
            return cur
        prev = cur
    raise ConvergenceError("fredholm_det did not stabilize", prev, abs(cur - prev))
