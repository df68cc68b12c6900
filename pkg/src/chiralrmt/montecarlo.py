"""Monte Carlo samplers, group integrals, histograms and observable summaries.

Randomness comes from counter-based Philox substreams keyed by
(master seed, stream index), so results do not depend on how work is split
across threads.  Samplers draw in fixed-size chunks, one substream per chunk.
"""
import os
import struct
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import lru_cache
from typing import Any, Dict, Optional, Tuple

import numpy as np
from scipy.linalg import lu_factor, lu_solve
from scipy.linalg.lapack import dsterf
from scipy.sparse.linalg import ArpackNoConvergence, LinearOperator, eigs

from . import numerics
from .specfun import DomainError

CHUNK = 1000
MODEL_TAGS = ("chgue", "wilson_d5", "mu_product")
_TAG_CODES = {t: i for i, t in enumerate(MODEL_TAGS)}
FRAME_MAGIC = b"CRMT"
FRAME_VERSION = 1
_FRAME_HEADER = struct.Struct("<4sHBIIQ")


def default_threads():
    try:
        return max(1, int(os.environ.get("RMT_THREADS", "1")))
    except ValueError:
        return 1


@dataclass(frozen=True)
class RngStream:
    master_seed: int
    stream_index: int = 0

    def generator(self):
        ss = np.random.SeedSequence([self.master_seed & (2 ** 64 - 1), self.stream_index])
        return np.random.Generator(np.random.Philox(ss))

    def substream(self, index):
        # nested streams keep the parent index in the key
        return RngStream(self.master_seed, self.stream_index * 1_000_003 + index + 1)


@dataclass
class SampleBatch:
    model_tag: str
    params: Dict[str, Any]
    eigenvalues: np.ndarray            # (samples, eigenvalues per sample)
    provenance: np.ndarray = None      # (samples, 2): stream index, draw index
    seed: Optional[int] = None

    def __post_init__(self):
        if self.model_tag not in MODEL_TAGS:
            raise ValueError("unknown model tag %r" % self.model_tag)
        self.eigenvalues = np.atleast_2d(self.eigenvalues)
        if self.provenance is None:
            s = self.eigenvalues.shape[0]
            self.provenance = np.stack([np.zeros(s, int), np.arange(s)], axis=1)

    @property
    def samples(self):
        return self.eigenvalues.shape[0]

    @property
    def N(self):
        return int(self.params.get("N", self.params.get("n", 0)))

    @property
    def nu(self):
        return int(self.params.get("nu", 0))

    def to_csv(self, path):
        """One row per sample: stream, draw, then the eigenvalues."""
        k = self.eigenvalues.shape[1]
        lines = [",".join(["stream", "draw"] + ["ev%d" % i for i in range(k)])]
        for prov, row in zip(self.provenance, self.eigenvalues):
            vals = [repr(complex(v)) if np.iscomplexobj(row) else repr(float(v)) for v in row]
            lines.append(",".join([str(int(prov[0])), str(int(prov[1]))] + vals))
        _atomic_write(path, ("\n".join(lines) + "\n").encode())

    @classmethod
    def from_csv(cls, path, model_tag, params):
        with open(path) as fh:
            rows = fh.read().strip().split("\n")[1:]
        prov, ev = [], []
        cplx = model_tag == "mu_product"
        for r in rows:
            parts = r.split(",")
            prov.append((int(parts[0]), int(parts[1])))
            ev.append([complex(v) if cplx else float(v) for v in parts[2:]])
        return cls(model_tag, dict(params), np.array(ev), np.array(prov))

    def to_bytes(self):
        ev = self.eigenvalues
        header = _FRAME_HEADER.pack(FRAME_MAGIC, FRAME_VERSION, _TAG_CODES[self.model_tag],
                                    self.N, self.nu, self.samples)
        if np.iscomplexobj(ev):
            payload = np.ascontiguousarray(ev.astype("<c16")).view("<f8")
        else:
            payload = np.ascontiguousarray(ev, dtype="<f8")
        return header + payload.tobytes()

    def to_binary(self, path):
        _atomic_write(path, self.to_bytes())

    @classmethod
    def from_bytes(cls, data, params=None):
        magic, version, tag, n, nu, count = _FRAME_HEADER.unpack_from(data)
        if magic != FRAME_MAGIC:
            raise ValueError("not a CRMT frame")
        if version != FRAME_VERSION:
            raise ValueError("unsupported frame version %d" % version)
        model_tag = MODEL_TAGS[tag]
        payload = np.frombuffer(data, dtype="<f8", offset=_FRAME_HEADER.size)
        if model_tag == "mu_product":
            ev = payload.view("<c16").reshape(count, -1)
        else:
            ev = payload.reshape(count, -1)
        key = "n" if model_tag == "wilson_d5" else "N"
        p = {key: n, "nu": nu}
        p.update(params or {})
        return cls(model_tag, p, ev.copy())

    @classmethod
    def from_binary(cls, path, params=None):
        with open(path, "rb") as fh:
            return cls.from_bytes(fh.read(), params)


def _atomic_write(path, data):
    tmp = "%s.tmp.%d" % (path, os.getpid())
    with open(tmp, "wb") as fh:
        fh.write(data)
    os.replace(tmp, path)


# ---------------------------------------------------------------------------
# chunked, threaded driver

def _run_chunks(draw, samples, seed, threads=None, chunk=CHUNK):
    """Call draw(gen, count) per chunk and stack in chunk order.

    Chunk c uses RngStream(seed, c); the split into chunks does not depend on
    the number of threads, so the output is bit-identical for any threads.
    """
    threads = threads or default_threads()
    nchunks = -(-samples // chunk)

    def one(c):
        cnt = min(chunk, samples - c * chunk)
        return draw(RngStream(seed, c).generator(), cnt)

    if threads == 1 or nchunks == 1:
        parts = [one(c) for c in range(nchunks)]
    else:
        with ThreadPoolExecutor(max_workers=threads) as ex:
            parts = list(ex.map(one, range(nchunks)))
    prov = np.concatenate([np.stack([np.full(len(p), c), np.arange(len(p))], axis=1)
                           for c, p in enumerate(parts)])
    return np.concatenate(parts), prov


def _ginibre(gen, shape, var=1.0):
    """Complex Gaussian entries with E|w|^2 = var."""
    s = np.sqrt(var / 2.0)
    return s * gen.standard_normal(shape) + 1j * s * gen.standard_normal(shape)


# ---------------------------------------------------------------------------
# chGUE

def _chgue_draw(N, nu, gen, count):
    # bidiagonal form of an N x (N+nu) complex Ginibre matrix: diagonal
    # chi variables with |d_i|^2 ~ Gamma(N+nu-i), superdiagonal Gamma(N-1-i)
    d2 = gen.gamma(np.broadcast_to(np.arange(N + nu, nu, -1, dtype=float), (count, N)))
    e2 = gen.gamma(np.broadcast_to(np.arange(N - 1, 0, -1, dtype=float), (count, N - 1)))
    diag = d2.copy()
    diag[:, :-1] += e2
    off = np.sqrt(e2 * d2[:, 1:])
    if N == 1:
        return diag
    out = np.empty((count, N))
    for i in range(count):
        # tridiagonal B B^T; root-free QR keeps the small eigenvalues accurate
        ev, info = dsterf(diag[i], off[i])[:2]
        if info:
            raise numerics.ConvergenceError("tridiagonal eigensolver failed", None, info)
        out[i] = ev
    return out


def _chgue_dense(N, nu, gen, count):
    w = _ginibre(gen, (count, N, N + nu))
    sv = np.linalg.svd(w, compute_uv=False)
    return np.sort(sv * sv, axis=1)


def sample_chgue(N, nu, rng, samples=1, threads=None, method="bidiagonal"):
    """Eigenvalues of W W^dagger, W of size N x (N+nu) with weight e^{-Tr W W^dagger}.

    The default works with the bidiagonal reduction (independent chi
    variables): only the tridiagonal B B^T is formed and solved, never the
    dense W W^dagger; method="dense" takes SVDs of full Ginibre matrices.
    """
    seed = rng.master_seed if isinstance(rng, RngStream) else int(rng)
    draw = _chgue_draw if method == "bidiagonal" else _chgue_dense
    ev, prov = _run_chunks(lambda g, c: draw(N, nu, g, c), samples, seed, threads)
    return SampleBatch("chgue", {"N": N, "nu": nu}, ev, prov, seed)


# ---------------------------------------------------------------------------
# Wilson D5

def _marginal_variance(log_density):
    """Variance of a centred 1-d density given up to normalization."""
    f0 = lambda t: np.exp(log_density(t))
    f2 = lambda t: t * t * np.exp(log_density(t))
    z, _ = numerics.integrate_1d(f0, (0.0, np.inf))
    m2, _ = numerics.integrate_1d(f2, (0.0, np.inf))
    return m2 / z


@lru_cache(maxsize=None)
def wilson_entry_variances(a):
    """Per-component variances implied by the trace weights.

    exp(-Tr W W^dagger/(2(1-a^2))): each of Re w, Im w has weight
    exp(-t^2/(2(1-a^2))).  exp(-Tr H^2/(4a^2)): a diagonal entry enters
    once, exp(-t^2/(4a^2)); an off-diagonal pair enters twice,
    exp(-2t^2/(4a^2)) per real component.  Returned as a dict of variances
    obtained by 1-d moment quadrature.
    """
    if a == 0:
        return {"w_component": 1.0, "h_diagonal": 0.0, "h_offdiag_component": 0.0}
    return {
        "w_component": _marginal_variance(lambda t: -t * t / (2.0 * (1.0 - a * a))),
        "h_diagonal": _marginal_variance(lambda t: -t * t / (4.0 * a * a)),
        "h_offdiag_component": _marginal_variance(lambda t: -2.0 * t * t / (4.0 * a * a)),
    }


def check_wilson_variances(a, rel_tol=1e-9):
    """Compare the sampler's closed-form variances with the quadrature values."""
    expected = {"w_component": 1.0 - a * a, "h_diagonal": 2.0 * a * a,
                "h_offdiag_component": a * a}
    got = wilson_entry_variances(a)
    return all(abs(got[k] - v) <= rel_tol * max(v, 1e-300) for k, v in expected.items()), got


def _hermitian(gen, count, n, a):
    diag = np.sqrt(2.0) * a * gen.standard_normal((count, n))
    off = a * (gen.standard_normal((count, n, n)) + 1j * gen.standard_normal((count, n, n)))
    h = np.triu(off, 1)
    h = h + np.conj(np.swapaxes(h, 1, 2))
    idx = np.arange(n)
    h[:, idx, idx] = diag
    return h


def wilson_d5_matrix(p, gen, count):
    """Stack of D5 = [[m + A, iW + Omega], [-iW^dag + Omega^dag, -m + B]]."""
    n, nu, a = p.n, p.nu, p.a
    k = 2 * n + nu
    w = np.sqrt(1.0 - a * a) * (gen.standard_normal((count, n, n + nu))
                                + 1j * gen.standard_normal((count, n, n + nu)))
    h = _hermitian(gen, count, k, a)
    d5 = h.copy()
    blk = 1j * w
    d5[:, :n, n:] += blk
    d5[:, n:, :n] += np.conj(np.swapaxes(blk, 1, 2))
    idx = np.arange(k)
    d5[:, idx, idx] += np.where(idx < n, p.m, -p.m)
    return d5


def sample_wilson_d5(p, rng, samples=1, threads=None):
    """Real eigenvalues of the Hermitian Wilson operator D5."""
    if not 0.0 <= p.a < 1.0:
        raise DomainError("a must lie in [0, 1)")
    ok, _ = check_wilson_variances(p.a)
    if not ok:
        raise RuntimeError("entry variances disagree with the trace weights")
    seed = rng.master_seed if isinstance(rng, RngStream) else int(rng)
    draw = lambda g, c: np.linalg.eigvalsh(wilson_d5_matrix(p, g, c))
    ev, prov = _run_chunks(draw, samples, seed, threads)
    params = {"n": p.n, "nu": p.nu, "a": p.a, "m": p.m}
    return SampleBatch("wilson_d5", params, ev, prov, seed)


# ---------------------------------------------------------------------------
# chemical potential

def mu_product_matrices(p, gen, count, order="X1X2"):
    N, nu, mu = p.N, p.nu, p.mu
    w1 = _ginibre(gen, (count, N, N + nu))
    w2 = _ginibre(gen, (count, N, N + nu))
    x1 = 1j * w1 + mu * w2
    x2 = 1j * np.conj(np.swapaxes(w1, 1, 2)) + mu * np.conj(np.swapaxes(w2, 1, 2))
    return x1 @ x2 if order == "X1X2" else x2 @ x1


def _smallest_eigs(y, k, gen):
    """k eigenvalues of smallest modulus by shift-invert Arnoldi about 0.

    Falls back to the dense solver if ARPACK does not converge.
    """
    n = y.shape[0]
    if k >= n - 1:
        ev = np.linalg.eigvals(y)
        return ev[np.argsort(np.abs(ev))][:k]
    lu = lu_factor(y)
    op = LinearOperator(y.shape, matvec=lambda v: lu_solve(lu, v), dtype=complex)
    v0 = gen.standard_normal(n) + 1j * gen.standard_normal(n)
    try:
        w = eigs(op, k=k, ncv=min(n, max(2 * k + 4, 20)), which="LM",
                 return_eigenvectors=False, tol=1e-12, v0=v0)
        ev = 1.0 / w
    except ArpackNoConvergence:
        ev = np.linalg.eigvals(y)
    return ev[np.argsort(np.abs(ev))][:k]


def sample_mu_product(p, rng, samples=1, threads=None, smallest=None):
    """Complex eigenvalues of Y = X1 X2, X1 = iW1 + mu W2, X2 = iW1^dag + mu W2^dag.

    By default all N eigenvalues from the dense nonsymmetric solver (LAPACK
    geev, balanced).  With smallest=k only the k eigenvalues of smallest
    modulus are kept (shift-invert Arnoldi), which is all the hard-edge
    comparisons need; params["coverage"] records the smallest modulus
    radius up to which every sample is complete.
    """
    seed = rng.master_seed if isinstance(rng, RngStream) else int(rng)
    if smallest is None:
        draw = lambda g, c: np.linalg.eigvals(mu_product_matrices(p, g, c))
    else:
        def draw(g, c):
            ys = mu_product_matrices(p, g, c)
            return np.array([_smallest_eigs(y, smallest, g) for y in ys])
    ev, prov = _run_chunks(draw, samples, seed, threads)
    params = {"N": p.N, "nu": p.nu, "mu": p.mu}
    if smallest is not None:
        params["smallest"] = smallest
        params["coverage"] = float(np.min(np.max(np.abs(ev), axis=1)))
    return SampleBatch("mu_product", params, ev, prov, seed)


# ---------------------------------------------------------------------------
# Haar unitaries and group integrals

def sample_haar_unitary(n, rng, count=None):
    """Haar unitary(s) by QR of a Ginibre matrix with phase-fixed R diagonal."""
    gen = rng.generator() if isinstance(rng, RngStream) else rng
    shape = (1 if count is None else count, n, n)
    z = _ginibre(gen, shape)
    q, r = np.linalg.qr(z)
    d = np.diagonal(r, axis1=1, axis2=2)
    q = q * (d / np.abs(d))[:, None, :]
    return q[0] if count is None else q


def _group_integrand(u, nu, m_hat, a8):
    tr = np.trace(u, axis1=1, axis2=2)
    tr2 = np.trace(u @ u, axis1=1, axis2=2)
    det = np.linalg.det(u)
    return det ** nu * np.exp(m_hat * tr.real - 2.0 * a8 * a8 * tr2.real)


def mc_group_integral(nf, nu, m_hat, a8, samples, rng, batches=50, chunk=20000):
    """Haar average of det(U)^nu exp[(m/2) Tr(U + U^dag) - a8^2 Tr(U^2 + U^dag^2)].

    Returns (complex estimate, standard error from batch means).
    """
    seed = rng.master_seed if isinstance(rng, RngStream) else int(rng)
    vals = []
    done = 0
    c = 0
    while done < samples:
        cnt = min(chunk, samples - done)
        u = sample_haar_unitary(nf, RngStream(seed, c).generator(), cnt)
        vals.append(_group_integrand(u, nu, m_hat, a8))
        done += cnt
        c += 1
    vals = np.concatenate(vals)
    nb = min(batches, len(vals))
    means = np.array([b.mean() for b in np.array_split(vals, nb)])
    err = np.std(means.real, ddof=1) / np.sqrt(nb) + 1j * np.std(means.imag, ddof=1) / np.sqrt(nb)
    return complex(vals.mean()), err


# ---------------------------------------------------------------------------
# rescaling and density estimation

def rescale_hard_edge(batch, kind):
    """Map a batch to microscopic Dirac units (2 sqrt(N) scale).

    wishart_to_dirac: 2 sqrt(N x); dirac: 2 sqrt(N) y; complex_dirac: the
    eigenvalues lambda of X1 X2 become 2 sqrt(N) sqrt(-lambda) on Re >= 0,
    and both members of each +- pair are returned (twice as many values).
    """
    n = batch.N
    ev = batch.eigenvalues
    s = 2.0 * np.sqrt(n)
    if kind == "wishart_to_dirac":
        return s * np.sqrt(np.maximum(ev, 0.0))
    if kind == "dirac":
        return s * ev
    if kind == "complex_dirac":
        root = np.sqrt(-ev.astype(complex))   # principal branch, Re >= 0
        return np.concatenate([s * root, -s * root], axis=1)
    raise ValueError("unknown rescaling %r" % kind)


@dataclass
class Histogram:
    edges: Tuple[np.ndarray, ...]
    counts: np.ndarray
    total: int                 # values that fell into the range
    samples: int               # number of matrices (normalization unit)

    @property
    def areas(self):
        widths = [np.diff(e) for e in self.edges]
        if len(widths) == 1:
            return widths[0]
        return widths[0][:, None] * widths[1][None, :]

    @property
    def density(self):
        return self.counts / (self.samples * self.areas)

    @property
    def error(self):
        return np.sqrt(self.counts) / (self.samples * self.areas)

    @property
    def centers(self):
        return tuple(0.5 * (e[1:] + e[:-1]) for e in self.edges)

    def merge(self, other):
        if any(not np.array_equal(a, b) for a, b in zip(self.edges, other.edges)):
            raise ValueError("cannot merge histograms with different bins")
        return Histogram(self.edges, self.counts + other.counts, self.total + other.total,
                         self.samples + other.samples)

    __add__ = merge


def estimate_density(values, bins, samples=None):
    """Histogram density per matrix.

    values: (samples, k) array, or flat with explicit samples; complex values
    (or a bins pair) give a 2-d histogram in (Re, Im).  Density is
    count/(samples * bin area) with Poisson error sqrt(count)/(samples * area).
    """
    values = np.asarray(values)
    if values.size == 0:
        raise ValueError("no values to histogram")
    if samples is None:
        samples = values.shape[0] if values.ndim > 1 else values.size
    flat = values.ravel()
    if np.iscomplexobj(flat) or (isinstance(bins, (tuple, list)) and len(bins) == 2
                                 and np.ndim(bins[0]) == 1):
        if not np.iscomplexobj(flat):
            raise ValueError("2-d bins need complex values")
        counts, ex, ey = np.histogram2d(flat.real, flat.imag, bins=bins)
        edges = (ex, ey)
    else:
        counts, e = np.histogram(flat, bins=bins)
        edges = (e,)
    return Histogram(edges, counts.astype(float), int(counts.sum()), int(samples))


def observable_summary(batches, s_grid=None, kmax=3, bins=60):
    """Smallest-eigenvalue statistics in microscopic Dirac units.

    E_k(s) is the fraction of samples with exactly k eigenvalues in [0, s]
    (k <= kmax); the k-th smallest eigenvalue is histogrammed, and the
    counting identity P(x_k > s) = sum_{l<k} E_l(s) is checked against the
    empirical k-th smallest distribution.
    """
    if not batches:
        raise ValueError("no batches")
    tags = {b.model_tag for b in batches}
    if len(tags) != 1:
        raise ValueError("batches mix model tags %s" % sorted(tags))
    tag = tags.pop()
    if tag == "mu_product":
        raise ValueError("smallest-eigenvalue summary needs a real spectrum")
    vals = []
    for b in batches:
        if tag == "chgue":
            vals.append(rescale_hard_edge(b, "wishart_to_dirac"))
        else:
            vals.append(np.sort(np.abs(rescale_hard_edge(b, "dirac")), axis=1))
    x = np.sort(np.concatenate(vals), axis=1)
    n = x.shape[0]
    if s_grid is None:
        s_grid = np.linspace(0.0, max(float(np.quantile(x[:, 0], 0.999)), 1e-12), 41)
    s_grid = np.asarray(s_grid, dtype=float)
    inside = (x[:, :, None] <= s_grid[None, None, :]).sum(axis=1)   # (samples, len(s))
    ek = {k: (inside == k).mean(axis=0) for k in range(kmax + 1)}
    kth = {k: x[:, k - 1] for k in range(1, min(kmax, x.shape[1]) + 1)}
    hist = {k: estimate_density(v, bins) for k, v in kth.items()}
    dev = 0.0
    for k, v in kth.items():
        surv = (v[:, None] > s_grid[None, :]).mean(axis=0)
        dev = max(dev, float(np.max(np.abs(surv - sum(ek[l] for l in range(k))))))
    small = x[:, 0]
    return {
        "model_tag": tag,
        "samples": n,
        "smallest_mean": float(small.mean()),
        "smallest_sigma": float(small.std(ddof=1) / np.sqrt(n)),
        "s": s_grid,
        "E": ek,
        "kth_hist": hist,
        "counting_identity_dev": dev,
    }
