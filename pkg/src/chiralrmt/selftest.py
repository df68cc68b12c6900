"""Oracle suite at reduced sizes.

Every check returns (metric, tolerance) and passes when metric <= tolerance.
Checks carry tags so a filter can select, e.g., only the Heine identities.
"""
import math
import time

import numpy as np

from . import chempot, chgue_finite as cf, hard_edge, montecarlo as mc, numerics, specfun, wilson

CHECKS = []


def check(name, *tags):
    def deco(fn):
        CHECKS.append((name, set(tags) | {name.split(".")[0]}, fn))
        return fn
    return deco


def _rel(a, b):
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b)) / np.maximum(np.abs(np.asarray(b)), 1e-300)))


# ---------------------------------------------------------------------------
# specfun

@check("specfun.ln_gamma", "gamma")
def _():
    x = np.linspace(0.05, 60.0, 97)
    return _rel(specfun.ln_gamma(x), [math.lgamma(v) for v in x]), 1e-12


@check("specfun.bessel_j_recurrence", "bessel")
def _():
    x = np.linspace(0.3, 40.0, 50)
    err = 0.0
    for n in range(1, 6):
        lhs = specfun.bessel_j(n - 1, x) + specfun.bessel_j(n + 1, x)
        err = max(err, float(np.max(np.abs(lhs - 2 * n / x * specfun.bessel_j(n, x)))))
    return err, 1e-13


@check("specfun.bessel_ik_wronskian", "bessel")
def _():
    x = np.linspace(0.1, 30.0, 40)
    err = 0.0
    for n in range(4):
        w = (specfun.bessel_i(n, x) * specfun.bessel_k(n + 1, x)
             + specfun.bessel_i(n + 1, x) * specfun.bessel_k(n, x))
        err = max(err, _rel(w, 1.0 / x))
    return err, 1e-12


@check("specfun.laguerre_orthogonality", "laguerre")
def _():
    r = numerics.gauss_laguerre(40)
    w = r.weights * r.nodes * np.exp(-r.nodes)
    g = np.array([[np.sum(w * specfun.laguerre(j, 1, r.nodes) * specfun.laguerre(k, 1, r.nodes))
                   for k in range(6)] for j in range(6)])
    ref = np.diag([math.gamma(j + 2) / math.factorial(j) for j in range(6)])
    return float(np.max(np.abs(g - ref))), 1e-10


# ---------------------------------------------------------------------------
# numerics

@check("numerics.pfaffian_squared", "pfaffian")
def _():
    rng = np.random.default_rng(1)
    err = 0.0
    for n in range(2, 11, 2):
        a = rng.standard_normal((n, n))
        a = a - a.T
        err = max(err, abs(numerics.pfaffian(a) ** 2 / np.linalg.det(a) - 1.0))
    return err, 1e-9


@check("numerics.pfaffian_expansion", "pfaffian")
def _():
    rng = np.random.default_rng(2)
    a = rng.standard_normal((6, 6))
    a = a - a.T
    return abs(numerics.pfaffian(a) - numerics.pfaffian_slow(a)) / abs(numerics.pfaffian_slow(a)), 1e-11


@check("numerics.integrate_1d", "quadrature")
def _():
    v, _ = numerics.integrate_1d(lambda x: x ** 3 * np.exp(-x), (0.0, np.inf))
    return abs(v - 6.0) / 6.0, 1e-10


@check("numerics.integrate_nd", "quadrature")
def _():
    v, _ = numerics.integrate_nd(lambda x: np.exp(-np.sum(x * x, axis=1)), [(-6.0, 6.0)] * 3)
    return abs(v - np.pi ** 1.5) / np.pi ** 1.5, 1e-9


@check("numerics.fredholm_rank_one", "fredholm")
def _():
    # K(x,y) = lam e^{-x-y} on [0, s]: det(1 - K) = 1 - lam (1 - e^{-2s})/2
    lam, s = 0.7, 1.3
    d = numerics.fredholm_det(lambda x, y: lam * np.exp(-x - y), s)
    return abs(d - (1 - lam * (1 - np.exp(-2 * s)) / 2)), 1e-12


# ---------------------------------------------------------------------------
# finite-N chGUE

@check("chgue.heine", "heine")
def _():
    spec = cf.EnsembleSpec(2, 1)
    err = 0.0
    for y in (0.7, 3.1):
        bf = cf.brute_force_avg(2, 1, lambda x: np.prod(y - x, axis=1))
        err = max(err, abs(cf.avg_char_poly(spec, [y]).value / bf - 1))
        err = max(err, abs(cf.monic_p(2, 1, y) / bf - 1))
    return err, 1e-9


@check("chgue.kernel_identity", "kernel")
def _():
    x, y = 0.9, 2.4
    bf = cf.brute_force_avg(2, 0, lambda t: np.prod((x - t) * (y - t), axis=1))
    return abs(cf.kernel_quenched(3, 0, x, y) * cf.norm_h(2, 0) / bf - 1), 1e-9


@check("chgue.three_point", "kernel")
def _():
    v1, v2, u = 0.4, 1.7, 3.0
    bf = cf.brute_force_avg(2, 1, lambda t: np.prod((v1 - t) * (v2 - t) * (u - t), axis=1))
    return abs(cf.three_point(2, 1, v1, v2, u) / bf - 1), 1e-9


@check("chgue.z_massive", "partition")
def _():
    spec = cf.EnsembleSpec(2, 1, (0.6, 1.4))
    return abs(cf.z_massive(spec).value / cf.brute_force_z(2, 1, (0.6, 1.4)) - 1), 1e-9


@check("chgue.kernel_cd_vs_sum", "kernel")
def _():
    x, y = np.array([0.3, 2.0, 7.5]), np.array([1.1, 4.0, 7.6])
    return _rel(cf.kernel_quenched(12, 2, x, y, "cd"), cf.kernel_quenched(12, 2, x, y, "sum")), 1e-10


@check("chgue.density_normalization", "density")
def _():
    spec = cf.EnsembleSpec(5, 1, (0.8,))
    v, _ = numerics.integrate_1d(lambda x: cf.density(spec, x), (0.0, np.inf))
    return abs(v - 5.0) / 5.0, 1e-9


@check("chgue.gap_vs_fredholm", "gap", "fredholm")
def _():
    spec = cf.EnsembleSpec(8, 1)
    k = cf.weighted_kernel(spec)
    err = 0.0
    for s in (0.05, 0.2):
        err = max(err, abs(cf.gap_e0(spec, s) / numerics.fredholm_det(k, s) - 1))
    return err, 1e-8


@check("chgue.p1_derivative", "gap")
def _():
    spec = cf.EnsembleSpec(6, 0, (0.5,))
    # p_1 integrates to E_0(0) - E_0(s)
    v, _ = numerics.integrate_1d(lambda t: cf.p1(spec, t), (0.0, 0.5))
    return abs(v - (1.0 - cf.gap_e0(spec, 0.5))), 1e-8


@check("chgue.cauchy_large_y_rate", "cauchy")
def _():
    # y^{k+1} C_k(y) tends to -h_k/(2 pi i); the next correction is O(1/y)
    k, nu = 2, 0
    vals = [abs(complex(1j * y) ** (k + 1) * cf.cauchy_transform(k, nu, 1j * y) * 2j * np.pi
                + cf.norm_h(k, nu)) / cf.norm_h(k, nu) for y in (100.0, 1000.0)]
    return abs(vals[1] / vals[0] - 0.1), 0.02


# ---------------------------------------------------------------------------
# hard edge

@check("hard_edge.bessel_kernel_forms", "bessel", "kernel")
def _():
    x, y = np.array([0.5, 2.0, 7.0]), np.array([1.5, 3.3, 9.1])
    return _rel(hard_edge.bessel_kernel(1, x, y, 1), hard_edge.bessel_kernel(1, x, y, 2)), 1e-12


@check("hard_edge.laguerre_limit", "laguerre", "asymptotics")
def _():
    N, err = 2000, 0.0
    x = np.linspace(0.5, 25.0, 12)
    for nu in (0, 2):
        lhs = specfun.laguerre(N, nu, x * x / (4 * N)) / N ** nu
        rhs = (2.0 / x) ** nu * specfun.bessel_j(nu, x)
        err = max(err, float(np.max(np.abs(lhs - rhs) / np.max(np.abs(rhs)))))
    return err, 1e-2


@check("hard_edge.density_limit", "density", "asymptotics")
def _():
    x = np.array([0.8, 2.5, 6.0])
    fin = hard_edge.density_finite_rescaled(800, 1, (), x)
    return _rel(fin, hard_edge.density_quenched(1, x)), 1e-2


@check("hard_edge.massive_density_limit", "density", "asymptotics")
def _():
    x = np.array([1.0, 4.0])
    args = hard_edge.MicroArgs(0, (1.5,))
    return _rel(hard_edge.density_finite_rescaled(800, 0, (1.5,), x), hard_edge.density_micro(args, x)), 2e-2


@check("hard_edge.z_confluent", "partition")
def _():
    return abs(hard_edge.z_micro(1, (0.8, 0.8, 0.8)).value / hard_edge.z_micro_degenerate(1, 3, 0.8) - 1), 1e-10


@check("hard_edge.flavour_topology", "partition", "duality")
def _():
    m = (0.7, 1.9)
    lhs = hard_edge.z_micro(0, (0.0,) + m).value / hard_edge.z_micro(1, m).value
    rhs = 2.0 ** 2 * 2.0 / (m[0] * m[1])
    return abs(lhs / rhs - 1), 1e-10


@check("hard_edge.e0_p1", "gap")
def _():
    x = np.array([0.5, 1.5, 3.0])
    h = 1e-4
    d = -(hard_edge.e0_micro(1, x + h) - hard_edge.e0_micro(1, x - h)) / (2 * h)
    return _rel(d, hard_edge.p1_micro(1, x)), 1e-7


# ---------------------------------------------------------------------------
# Wilson

@check("wilson.f_closed_vs_quad", "wilson")
def _():
    p = wilson.WilsonParams(a=0.3, m=0.4)
    x = np.array([-2.0, 0.3, 1.0, 3.0])
    return _rel(wilson.f_weight(x, p), wilson.f_weight(x, p, method="quad")), 1e-9


@check("wilson.f_odd", "wilson")
def _():
    p = wilson.WilsonParams(a=0.5, m=0.2)
    x = np.random.default_rng(3).uniform(-4, 4, 20)
    return _rel(wilson.f_weight(-x, p), -wilson.f_weight(x, p)), 1e-12


@check("wilson.jpdf_permutation", "wilson", "pfaffian")
def _():
    p = wilson.WilsonParams(n=2, nu=1, a=0.4, m=0.2)
    d = np.array([0.3, -0.8, 1.1, 0.5, -0.2])
    return abs(wilson.jpdf_d5(d[[3, 1, 4, 0, 2]], p) / wilson.jpdf_d5(d, p) - 1), 1e-10


@check("wilson.jpdf_n1", "wilson", "pfaffian")
def _():
    p = wilson.WilsonParams(n=1, nu=0, a=0.3, m=0.1)
    return abs(wilson.jpdf_d5([-0.4, 0.9], p) / wilson.jpdf_d5_n1(-0.4, 0.9, p) - 1), 1e-12


@check("wilson.z_theta_vs_gaussian", "wilson", "partition")
def _():
    err = 0.0
    for nu in (0, 1, 2):
        for m in (0.5, 2.0):
            for a8 in (0.3, 0.8):
                err = max(err, abs(wilson.z_wechpt_nf1_gaussian(nu, m, a8) / wilson.z_wechpt(1, nu, m, a8) - 1))
    return err, 1e-8


@check("wilson.z_a8_zero", "wilson", "partition")
def _():
    return max(abs(wilson.z_wechpt(1, nu, 1.3, 0.0) / specfun.bessel_i(nu, 1.3) - 1) for nu in range(3)), 1e-12


@check("wilson.variances", "wilson", "montecarlo")
def _():
    ok, got = mc.check_wilson_variances(0.35)
    ref = {"w_component": 1 - 0.35 ** 2, "h_diagonal": 2 * 0.35 ** 2, "h_offdiag_component": 0.35 ** 2}
    return max(abs(got[k] / ref[k] - 1) for k in ref), 1e-9


# ---------------------------------------------------------------------------
# chemical potential

@check("chempot.biorthogonality", "biorthogonal")
def _():
    p = chempot.MuParams(3, 1, 0.5)
    err = 0.0
    for j in range(3):
        for k in range(j, 3):
            hj, hk = chempot.norm_h(j, p), chempot.norm_h(k, p)
            g = chempot.plane_integral(
                lambda z: chempot.weight_mu(z, p) * specfun.laguerre(j, 1, p.c * z)
                * np.conj(specfun.laguerre(k, 1, p.c * z)), abs_tol=1e-9 * np.sqrt(hj * hk))
            err = max(err, abs(g / hj - 1) if j == k else abs(g) / np.sqrt(hj * hk))
    return err, 1e-6


@check("chempot.density_normalization", "density")
def _():
    p = chempot.MuParams(2, 0, 0.5)
    v = chempot.plane_integral(lambda z: chempot.density_finite_mu(p, z))
    return abs(v - 2.0) / 2.0, 1e-6


@check("chempot.heine", "heine")
def _():
    p = chempot.MuParams(1, 1, 0.5)
    z0 = chempot.plane_integral(lambda z: chempot.weight_mu(z, p))
    v = 0.4 - 0.7j
    avg = chempot.plane_integral(lambda z: chempot.weight_mu(z, p) * (v - z)) / z0
    return abs(avg / (v - (1.0 + p.nu) / p.c) - 1), 1e-6


@check("chempot.kernel_identity", "kernel")
def _():
    p = chempot.MuParams(1, 0, 0.5)
    z0 = chempot.plane_integral(lambda z: chempot.weight_mu(z, p))
    v, u = 0.4 + 0.3j, -0.6 + 0.2j
    avg = chempot.plane_integral(lambda z: chempot.weight_mu(z, p) * (v - z) * np.conj(u - z)) / z0
    h1 = np.exp(chempot._log_monic_h(1, p))
    return abs(h1 * chempot.kernel_mu(chempot.MuParams(2, 0, 0.5), v, u) / avg - 1), 1e-6


@check("chempot.mixed_products", "kernel")
def _():
    p = chempot.MuParams(1, 1, 0.5)
    z0 = chempot.plane_integral(lambda z: chempot.weight_mu(z, p))
    v1, v2, u = 0.3 + 0.2j, -0.7 + 0.1j, 0.5 - 0.4j
    avg = chempot.plane_integral(lambda z: chempot.weight_mu(z, p) * (v1 - z) * (v2 - z) * np.conj(u - z)) / z0
    l, m = chempot.mixed_average(p, [v1, v2], [u])
    return abs(m * np.exp(l) / avg - 1), 1e-6


@check("chempot.z_massive_ratio", "partition")
def _():
    p2, p1 = chempot.MuParams(1, 0, 0.5, (2.0,)), chempot.MuParams(1, 0, 0.5, (1.0,))
    r = np.exp(chempot.z_massive_mu(p2).log - chempot.z_massive_mu(p1).log)
    return abs(r / ((1 + 4 * p1.c) / (1 + p1.c)) - 1), 1e-12


@check("chempot.weak_limit", "asymptotics", "density")
def _():
    p = chempot.MuParams.weak(200, 0, 0.3)
    z = np.array([1.5 + 0.05j, 3.0 + 0.1j, 5.0])
    return _rel(chempot.density_finite_mu_dirac(p, z), chempot.density_micro_mu(0, 0.3, z)), 5e-2


@check("chempot.product_weight", "quadrature")
def _():
    v, _ = numerics.integrate_1d(lambda r: 2 * np.pi * r * chempot.w2_product_weight(r), (0.0, np.inf))
    return abs(v - np.pi ** 2) / np.pi ** 2, 1e-9


# ---------------------------------------------------------------------------
# Monte Carlo

@check("montecarlo.chgue_trace", "montecarlo")
def _():
    b = mc.sample_chgue(6, 2, mc.RngStream(1), samples=20000)
    tr = b.eigenvalues.sum(axis=1)
    return abs(tr.mean() - 48.0) / (tr.std() / np.sqrt(len(tr))), 3.0


@check("montecarlo.chgue_gap_law", "montecarlo", "gap")
def _():
    b = mc.sample_chgue(40, 0, mc.RngStream(2), samples=20000)
    x = mc.rescale_hard_edge(b, "wishart_to_dirac")[:, 0]
    e = cf.gap_e0(cf.EnsembleSpec(40, 0), 1.0 / 160.0)
    f = (x > 1.0).mean()
    return abs(f - e) / np.sqrt(e * (1 - e) / len(x)), 3.0


@check("montecarlo.haar_unitary", "montecarlo", "haar")
def _():
    u = mc.sample_haar_unitary(4, mc.RngStream(3), count=200)
    eye = np.eye(4)
    return float(np.max(np.abs(np.conj(np.swapaxes(u, 1, 2)) @ u - eye))), 1e-12


@check("montecarlo.group_integral", "montecarlo", "haar", "partition")
def _():
    est, err = mc.mc_group_integral(1, 1, 1.2, 0.0, 100000, mc.RngStream(4))
    return abs(est.real - specfun.bessel_i(1, 1.2)) / err.real, 4.0


@check("montecarlo.determinism", "montecarlo")
def _():
    a = mc.sample_chgue(10, 1, mc.RngStream(5), samples=3000, threads=1)
    b = mc.sample_chgue(10, 1, mc.RngStream(5), samples=3000, threads=3)
    return float(not np.array_equal(a.eigenvalues, b.eigenvalues)), 0.0


@check("montecarlo.binary_roundtrip", "montecarlo", "io")
def _():
    b = mc.sample_mu_product(chempot.MuParams(4, 1, 0.4), mc.RngStream(6), samples=5)
    c = mc.SampleBatch.from_bytes(b.to_bytes())
    return float(not np.array_equal(b.eigenvalues, c.eigenvalues)), 0.0


@check("montecarlo.wilson_chiral_limit", "montecarlo", "wilson")
def _():
    p = wilson.WilsonParams(n=3, nu=1, a=0.0, m=0.5)
    d5 = mc.wilson_d5_matrix(p, mc.RngStream(7).generator(), 1)[0]
    ev = np.linalg.eigvalsh(d5)
    w = d5[:3, 3:] / 1j
    sv = np.linalg.svd(w, compute_uv=False)
    ref = np.sort(np.concatenate([np.sqrt(sv ** 2 + 0.25), -np.sqrt(sv ** 2 + 0.25), [-0.5]]))
    return float(np.max(np.abs(ev - ref))), 1e-12


@check("montecarlo.mu_zero_limit", "montecarlo")
def _():
    p = chempot.MuParams(5, 1, 1e-12)
    ev = mc.sample_mu_product(p, mc.RngStream(8), samples=20).eigenvalues
    return float(max(np.max(ev.real), np.max(np.abs(ev.imag)))), 1e-9


@check("montecarlo.counting_identity", "montecarlo", "gap")
def _():
    b = mc.sample_chgue(20, 1, mc.RngStream(9), samples=4000)
    s = mc.observable_summary([b], s_grid=np.linspace(0, 6, 25))
    total = sum(s["E"][k] for k in range(4))
    return s["counting_identity_dev"] + float(np.max(total[:5]) > 1.0 + 1e-12), 1e-12


def run(filter_tag=None):
    """Run all checks (or those whose name or tags contain filter_tag)."""
    report = []
    for name, tags, fn in CHECKS:
        if filter_tag and not (filter_tag in name or any(filter_tag in t for t in tags)):
            continue
        t0 = time.time()
        try:
            metric, tol = fn()
            status = "pass" if metric <= tol else "fail"
        except Exception as exc:  # a crashing check is a failure, reported with its message
            metric, tol, status = float("nan"), float("nan"), "error: %s" % exc
        report.append({"name": name, "status": status, "metric": float(metric),
                       "tolerance": float(tol), "seconds": round(time.time() - t0, 3)})
    return report
