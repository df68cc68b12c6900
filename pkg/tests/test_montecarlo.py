import struct

import numpy as np
import pytest
from scipy import special, stats

from chiralrmt import hard_edge, montecarlo as mc, wilson
from chiralrmt.chempot import MuParams
from chiralrmt.specfun import DomainError
from chiralrmt.wilson import WilsonParams


def _bin_mean(f, edges, nodes=16):
    t, w = np.polynomial.legendre.leggauss(nodes)
    lo, hi = edges[:-1], edges[1:]
    pts = 0.5 * (hi - lo)[:, None] * t + 0.5 * (hi + lo)[:, None]
    return 0.5 * f(pts.ravel()).reshape(pts.shape) @ w


# ---------------------------------------------------------------------------
# streams and batches

def test_stream_reproducible_and_distinct():
    a = mc.RngStream(5, 2).generator().standard_normal(4)
    b = mc.RngStream(5, 2).generator().standard_normal(4)
    c = mc.RngStream(5, 3).generator().standard_normal(4)
    assert np.array_equal(a, b)
    assert not np.allclose(a, c)
    s = mc.RngStream(5, 2)
    assert s.substream(0) != s.substream(1) and s.substream(0).master_seed == 5


@pytest.mark.parametrize("sampler", ["chgue", "wilson", "mu"])
def test_thread_count_does_not_change_output(sampler):
    if sampler == "chgue":
        run = lambda t: mc.sample_chgue(6, 1, mc.RngStream(3), samples=2500, threads=t)
    elif sampler == "wilson":
        run = lambda t: mc.sample_wilson_d5(WilsonParams(n=2, nu=1, a=0.3), mc.RngStream(3), samples=2500, threads=t)
    else:
        run = lambda t: mc.sample_mu_product(MuParams(4, 1, 0.4), mc.RngStream(3), samples=2500, threads=t)
    b1, b4 = run(1), run(4)
    assert b1.eigenvalues.tobytes() == b4.eigenvalues.tobytes()
    assert np.array_equal(b1.provenance, b4.provenance)


def test_batch_tag_checked():
    with pytest.raises(ValueError):
        mc.SampleBatch("gue", {}, np.zeros((1, 2)))


def test_binary_frame_layout_and_roundtrip(tmp_path):
    b = mc.sample_mu_product(MuParams(3, 1, 0.5), mc.RngStream(1), samples=7)
    data = b.to_bytes()
    magic, version, tag, n, nu, count = struct.unpack_from("<4sHBIIQ", data)
    assert (magic, version, tag, n, nu, count) == (b"CRMT", 1, 2, 3, 1, 7)
    assert len(data) == struct.calcsize("<4sHBIIQ") + 7 * 3 * 16
    path = tmp_path / "b.crmt"
    b.to_binary(str(path))
    back = mc.SampleBatch.from_binary(str(path))
    assert back.model_tag == "mu_product" and np.array_equal(back.eigenvalues, b.eigenvalues)
    with pytest.raises(ValueError):
        mc.SampleBatch.from_bytes(b"XXXX" + data[4:])
    with pytest.raises(ValueError):
        mc.SampleBatch.from_bytes(data[:4] + struct.pack("<H", 9) + data[6:])


def test_csv_roundtrip(tmp_path):
    b = mc.sample_chgue(4, 0, mc.RngStream(2), samples=5)
    path = tmp_path / "b.csv"
    b.to_csv(str(path))
    back = mc.SampleBatch.from_csv(str(path), "chgue", b.params)
    assert np.array_equal(back.eigenvalues, b.eigenvalues)
    assert np.array_equal(back.provenance, b.provenance)
    c = mc.sample_mu_product(MuParams(2, 0, 0.5), mc.RngStream(2), samples=3)
    c.to_csv(str(path))
    assert np.array_equal(mc.SampleBatch.from_csv(str(path), "mu_product", c.params).eigenvalues, c.eigenvalues)


# ---------------------------------------------------------------------------
# chGUE

def test_chgue_shape_sign_order():
    b = mc.sample_chgue(7, 2, mc.RngStream(0), samples=50)
    ev = b.eigenvalues
    assert ev.shape == (50, 7)
    assert np.all(ev >= 0) and np.all(np.diff(ev, axis=1) >= 0)


def test_chgue_trace_mean():
    N, nu, n = 5, 1, 10_000
    tr = mc.sample_chgue(N, nu, mc.RngStream(1), samples=n).eigenvalues.sum(axis=1)
    assert abs(tr.mean() - N * (N + nu)) < 3 * tr.std(ddof=1) / np.sqrt(n)


@pytest.mark.parametrize("nu", [0, 2])
def test_chgue_n1_is_gamma(nu):
    x = mc.sample_chgue(1, nu, mc.RngStream(7), samples=100_000).eigenvalues[:, 0]
    assert stats.kstest(x, stats.gamma(nu + 1).cdf).pvalue > 0.01


def test_bidiagonal_matches_dense():
    a = mc.sample_chgue(8, 1, mc.RngStream(4), samples=20_000).eigenvalues[:, 0]
    b = mc.sample_chgue(8, 1, mc.RngStream(5), samples=20_000, method="dense").eigenvalues[:, 0]
    assert stats.ks_2samp(a, b).pvalue > 0.01


@pytest.mark.parametrize("nu", [0, 1])
def test_chgue_micro_density(nu):
    b = mc.sample_chgue(100, nu, mc.RngStream(10 + nu), samples=20_000)
    xt = mc.rescale_hard_edge(b, "wishart_to_dirac")
    edges = np.linspace(0.25, 9.75, 39)
    h = mc.estimate_density(xt, edges)
    ref = _bin_mean(lambda x: hard_edge.density_micro(hard_edge.MicroArgs(nu), x), edges)
    sig = np.sqrt(ref * h.samples * h.areas) / (h.samples * h.areas)
    assert np.mean(np.abs(h.density - ref) <= 3 * sig) >= 0.95


def test_smallest_mean_sqrt_pi():
    b = mc.sample_chgue(100, 0, mc.RngStream(12), samples=10_000)
    s = mc.observable_summary([b])
    assert s["smallest_mean"] == pytest.approx(np.sqrt(np.pi), rel=2e-2)


# ---------------------------------------------------------------------------
# Wilson D5

def test_wilson_variances_from_trace_weights():
    for a in (0.1, 0.5, 0.9):
        ok, got = mc.check_wilson_variances(a)
        assert ok, got


def test_wilson_hermitian_block_moments():
    p = WilsonParams(n=3, nu=1, a=0.4)
    h = mc._hermitian(mc.RngStream(3).generator(), 20_000, 7, p.a)
    assert np.allclose(h, np.conj(np.swapaxes(h, 1, 2)))
    diag = h[:, 0, 0].real
    off = h[:, 0, 1].real
    assert np.var(diag) == pytest.approx(2 * p.a ** 2, rel=0.05)
    assert np.var(off) == pytest.approx(p.a ** 2, rel=0.05)


def test_wilson_a0_chiral_spectrum():
    p = WilsonParams(n=3, nu=2, a=0.0, m=0.0)
    d5 = mc.wilson_d5_matrix(p, mc.RngStream(1).generator(), 1)[0]
    assert np.allclose(d5, d5.conj().T)
    w = d5[:3, 3:] / 1j
    sv = np.linalg.svd(w, compute_uv=False)
    ev = np.linalg.eigvalsh(d5)
    ref = np.sort(np.concatenate([sv, -sv, np.zeros(2)]))
    assert np.max(np.abs(ev - ref)) < 1e-12


def test_wilson_a0_massive_spectrum():
    p = WilsonParams(n=3, nu=2, a=0.0, m=0.4)
    d5 = mc.wilson_d5_matrix(p, mc.RngStream(2).generator(), 1)[0]
    sv = np.linalg.svd(d5[:3, 3:] / 1j, compute_uv=False)
    root = np.sqrt(sv ** 2 + p.m ** 2)
    ref = np.sort(np.concatenate([root, -root, [-p.m, -p.m]]))
    assert np.max(np.abs(np.linalg.eigvalsh(d5) - ref)) < 1e-12


def test_wilson_sampler_shape_and_domain():
    b = mc.sample_wilson_d5(WilsonParams(n=2, nu=1, a=0.3, m=0.1), mc.RngStream(0), samples=10)
    assert b.eigenvalues.shape == (10, 5) and np.isrealobj(b.eigenvalues)
    with pytest.raises(DomainError):
        mc.sample_wilson_d5(WilsonParams(a=1.0), mc.RngStream(0))


def test_wilson_n1_trace_moment():
    # E Tr D5^2 = 2 m^2 + Tr H^2 + 2 Tr W W^dag at n = 1, nu = 0
    p = WilsonParams(n=1, nu=0, a=0.3, m=0.2)
    ev = mc.sample_wilson_d5(p, mc.RngStream(4), samples=40_000).eigenvalues
    t = (ev ** 2).sum(axis=1)
    expect = 2 * p.m ** 2 + (2 * 2 * p.a ** 2 + 2 * 2 * p.a ** 2) + 2 * 2 * (1 - p.a ** 2)
    assert abs(t.mean() - expect) < 3 * t.std(ddof=1) / np.sqrt(len(t))


# ---------------------------------------------------------------------------
# chemical potential

def test_mu_product_hermitian_limit():
    b = mc.sample_mu_product(MuParams(5, 1, 1e-12), mc.RngStream(8), samples=20)
    ev = b.eigenvalues
    assert ev.shape == (20, 5)
    assert np.max(ev.real) < 1e-9 and np.max(np.abs(ev.imag)) < 1e-9


def test_mu_product_zero_modes_of_reversed_product():
    p = MuParams(3, 1, 0.5)
    y = mc.mu_product_matrices(p, mc.RngStream(9).generator(), 10, order="X2X1")
    for m in y:
        ev = np.linalg.eigvals(m)
        scale = np.max(np.abs(ev))
        assert np.sum(np.abs(ev) < 1e-10 * scale) >= p.nu


def test_mu_product_smallest_matches_dense():
    p = MuParams(30, 1, 0.3)
    dense = mc.sample_mu_product(p, mc.RngStream(6), samples=12).eigenvalues
    part = mc.sample_mu_product(p, mc.RngStream(6), samples=12, smallest=5)
    for full, small in zip(dense, part.eigenvalues):
        ref = full[np.argsort(np.abs(full))][:5]
        assert np.allclose(np.sort_complex(small), np.sort_complex(ref), rtol=1e-9, atol=1e-12)
    assert part.params["coverage"] > 0 and part.params["smallest"] == 5


# ---------------------------------------------------------------------------
# Haar unitaries and group integrals

def test_haar_unitary():
    u = mc.sample_haar_unitary(4, mc.RngStream(0))
    assert np.allclose(u.conj().T @ u, np.eye(4), atol=1e-12)


def test_haar_moments():
    n, count = 3, 100_000
    u = mc.sample_haar_unitary(n, mc.RngStream(1), count)
    a = np.abs(u[:, 0, 0]) ** 2
    assert abs(a.mean() - 1.0 / n) < 3 * a.std() / np.sqrt(count)
    tr = np.trace(u, axis1=1, axis2=2)
    assert abs(tr.real.mean()) < 3 * tr.real.std() / np.sqrt(count)
    assert abs(tr.imag.mean()) < 3 * tr.imag.std() / np.sqrt(count)


@pytest.mark.parametrize("nu,m", [(0, 1.0), (1, 2.0)])
def test_group_integral_nf1(nu, m):
    est, err = mc.mc_group_integral(1, nu, m, 0.0, 200_000, mc.RngStream(2))
    assert abs(est.real - special.iv(nu, m)) < 3 * err.real
    assert abs(est.imag) < 3 * err.imag + 1e-12


def test_group_integral_nf2_degenerate():
    nu, m = 1, 1.5
    est, err = mc.mc_group_integral(2, nu, m, 0.0, 200_000, mc.RngStream(3))
    assert abs(est.real - hard_edge.z_micro_degenerate(nu, 2, m)) < 3 * err.real


def test_group_integral_trivial():
    est, err = mc.mc_group_integral(2, 0, 0.0, 0.0, 1000, mc.RngStream(4))
    assert est == pytest.approx(1.0, abs=1e-12)


def test_group_integral_with_a8():
    nu, m, a8 = 1, 1.0, 0.4
    est, err = mc.mc_group_integral(1, nu, m, a8, 200_000, mc.RngStream(5))
    assert abs(est.real - wilson.z_wechpt(1, nu, m, a8)) < 3 * err.real


# ---------------------------------------------------------------------------
# rescaling and histograms

def test_rescale():
    b = mc.SampleBatch("chgue", {"N": 1, "nu": 0}, np.array([[1.0]]))
    assert mc.rescale_hard_edge(b, "wishart_to_dirac")[0, 0] == pytest.approx(2.0)
    b = mc.SampleBatch("chgue", {"N": 4, "nu": 0}, np.array([[0.1, 0.5, 2.0, 3.0]]))
    assert np.all(np.diff(mc.rescale_hard_edge(b, "wishart_to_dirac")) > 0)
    assert mc.rescale_hard_edge(b, "dirac")[0, 1] == pytest.approx(2.0)
    c = mc.SampleBatch("mu_product", {"N": 2, "nu": 0}, np.array([[-1.0 + 0.1j, -4.0 - 0.2j]]))
    z = mc.rescale_hard_edge(c, "complex_dirac")
    assert z.shape == (1, 4)
    assert np.all(z[:, :2].real >= 0) and np.allclose(z[:, 2:], -z[:, :2])
    assert np.allclose((z[:, :2] / (2 * np.sqrt(2))) ** 2, -c.eigenvalues)
    with pytest.raises(ValueError):
        mc.rescale_hard_edge(b, "bulk")


def test_histogram_single_and_empty():
    h = mc.estimate_density(np.array([[0.3]]), np.linspace(0, 1, 11))
    assert np.count_nonzero(h.counts) == 1 and h.total == 1
    with pytest.raises(ValueError):
        mc.estimate_density(np.array([]), 5)


def test_histogram_uniform_flat():
    rng = np.random.default_rng(0)
    x = rng.uniform(0, 1, size=(20_000, 3))
    h = mc.estimate_density(x, np.linspace(0, 1, 21))
    assert np.all(np.abs(h.density - 3.0) < 3.5 * h.error)
    assert np.sum(h.density * h.areas) == pytest.approx(3.0)


def test_histogram_2d_and_merge():
    rng = np.random.default_rng(1)
    z = rng.normal(size=(500, 2)) + 1j * rng.normal(size=(500, 2))
    bins = (np.linspace(-4, 4, 9), np.linspace(-4, 4, 9))
    h = mc.estimate_density(z, bins)
    assert h.counts.shape == (8, 8)
    assert np.sum(h.density * h.areas) == pytest.approx(2.0 * h.total / 1000)
    m = h + h
    assert m.samples == 1000 and np.allclose(m.density, h.density)
    with pytest.raises(ValueError):
        h.merge(mc.estimate_density(z, (np.linspace(-3, 3, 9), np.linspace(-4, 4, 9))))


def test_observable_summary_identities():
    b = mc.sample_chgue(3, 0, mc.RngStream(3), samples=3000)
    s = mc.observable_summary([b], s_grid=np.linspace(0, 8, 17))
    assert s["E"][0][0] == 1.0
    total = sum(s["E"][k] for k in range(4))
    assert np.allclose(total, 1.0)
    assert s["counting_identity_dev"] < 1e-12
    assert set(s["kth_hist"]) == {1, 2, 3}


def test_observable_summary_mixed_tags():
    a = mc.sample_chgue(3, 0, mc.RngStream(1), samples=5)
    b = mc.sample_wilson_d5(WilsonParams(n=1, a=0.2), mc.RngStream(1), samples=5)
    with pytest.raises(ValueError):
        mc.observable_summary([a, b])
    with pytest.raises(ValueError):
        mc.observable_summary([])
