import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from chiralrmt import numerics
from chiralrmt.numerics import ConvergenceError, UnsupportedDimension


def test_integrate_1d_examples():
    v, _ = numerics.integrate_1d(lambda x: x * x, (0.0, 1.0))
    assert v == pytest.approx(1.0 / 3.0, rel=1e-12)
    v, _ = numerics.integrate_1d(lambda x: x * np.exp(-x), (0.0, np.inf))
    assert v == pytest.approx(1.0, rel=1e-10)
    v, _ = numerics.integrate_1d(lambda x: x ** 2.5 * np.exp(-x), (0.0, np.inf))
    assert v == pytest.approx(math.gamma(3.5), rel=1e-9)
    assert math.gamma(3.5) == pytest.approx(3.32335097, abs=1e-8)


def test_integrate_1d_breakpoint_kink():
    v, _ = numerics.integrate_1d(lambda x: np.abs(x - 0.3), (0.0, 1.0), breakpoints=(0.3,))
    assert v == pytest.approx(0.5 * (0.3 ** 2 + 0.7 ** 2), rel=1e-12)


def test_integrate_1d_convergence_error_carries_estimate():
    with pytest.raises(ConvergenceError) as exc:
        numerics.integrate_1d(lambda x: np.sin(1.0 / x) / x, (1e-6, 1.0), max_panels=20, rel_tol=1e-14)
    assert exc.value.estimate is not None


def test_integrate_nd_examples():
    f = lambda x: np.exp(-x[:, 0] - x[:, 1]) * (x[:, 1] - x[:, 0]) ** 2
    v, _ = numerics.integrate_nd(f, [(0.0, np.inf, "exp")] * 2)
    assert v == pytest.approx(2.0, rel=1e-10)
    v, _ = numerics.integrate_nd(lambda x: np.ones(len(x)), [(0.0, 1.0)] * 2)
    assert v == pytest.approx(1.0, rel=1e-13)
    # N=2, nu=1 partition integral: 2! h_0 h_1 with h_0 = 1, h_1 = 1! Gamma(3) = 2
    g = lambda x: x[:, 0] * x[:, 1] * np.exp(-x[:, 0] - x[:, 1]) * (x[:, 1] - x[:, 0]) ** 2
    v, _ = numerics.integrate_nd(g, [(0.0, np.inf, "exp")] * 2)
    assert v == pytest.approx(4.0, rel=1e-10)


def test_integrate_nd_dimension_cap():
    with pytest.raises(UnsupportedDimension):
        numerics.integrate_nd(lambda x: np.ones(len(x)), [(0.0, 1.0)] * 9)


def test_quadrature_rules():
    r = numerics.gauss_legendre(10, 0.0, 2.0)
    assert r(lambda x: x ** 5) == pytest.approx(2.0 ** 6 / 6, rel=1e-13)
    lag = numerics.gauss_laguerre(30)
    assert lag(lambda x: x ** 3 * np.exp(-x)) == pytest.approx(6.0, rel=1e-12)
    with pytest.raises(ValueError):
        numerics.QuadratureRule(np.array([0.0]), np.array([1.0]), (0, 1))


def test_det_examples():
    assert numerics.det(np.eye(5)) == pytest.approx(1.0)
    assert numerics.det([[1.0, 2.0], [3.0, 4.0]]) == pytest.approx(-2.0)
    vm = np.vander([1.0, 2.0, 3.0], increasing=True)
    assert numerics.det(vm) == pytest.approx(2.0)
    assert numerics.det(np.zeros((0, 0))) == 1.0
    with pytest.raises(ValueError):
        numerics.det(np.ones((2, 3)))


def test_slogdet_sign():
    s, l = numerics.slogdet([[0.0, 1.0], [1.0, 0.0]])
    assert s == -1 and l == pytest.approx(0.0)


def test_vandermonde_examples():
    assert numerics.vandermonde([4.2]) == 1.0
    assert numerics.vandermonde([1.0, 2.0, 3.0]) == pytest.approx(2.0)
    assert numerics.vandermonde([0.5, 0.5, 2.0]) == 0.0


def test_pfaffian_examples():
    a = 1.7
    assert numerics.pfaffian([[0.0, a], [-a, 0.0]]) == pytest.approx(a)
    m = np.zeros((4, 4))
    m[0, 1], m[2, 3] = 2.0, -3.0
    m = m - m.T
    assert numerics.pfaffian(m) == pytest.approx(-6.0)
    rng = np.random.default_rng(11)
    b = rng.standard_normal((6, 6))
    b = b - b.T
    assert numerics.pfaffian(b) ** 2 == pytest.approx(np.linalg.det(b), rel=1e-10)


def test_pfaffian_odd_dimension():
    with pytest.raises(ValueError):
        numerics.pfaffian(np.zeros((3, 3)))


@settings(max_examples=40, deadline=None)
@given(st.integers(1, 5), st.integers(0, 2 ** 32 - 1))
def test_pfaffian_matches_expansion(half, seed):
    rng = np.random.default_rng(seed)
    b = rng.standard_normal((2 * half, 2 * half))
    b = b - b.T
    assert numerics.pfaffian(b) == pytest.approx(numerics.pfaffian_slow(b), rel=1e-9, abs=1e-12)


def test_pfaffian_complex():
    rng = np.random.default_rng(5)
    b = rng.standard_normal((6, 6)) + 1j * rng.standard_normal((6, 6))
    b = b - b.T
    assert numerics.pfaffian(b) == pytest.approx(numerics.pfaffian_slow(b), rel=1e-11)


def test_fredholm_examples():
    assert numerics.fredholm_det(lambda x, y: 0.0 * x * y, 2.0) == pytest.approx(1.0)
    phi = lambda x: np.cos(x)
    s = 1.1
    ref, _ = numerics.integrate_1d(lambda x: phi(x) ** 2, (0.0, s))
    assert numerics.fredholm_det(lambda x, y: phi(x) * phi(y), s) == pytest.approx(1.0 - ref, rel=1e-12)


def test_fredholm_chgue_nu0():
    from chiralrmt import chgue_finite as cf
    spec = cf.EnsembleSpec(20, 0)
    d = numerics.fredholm_det(cf.weighted_kernel(spec), 0.01)
    assert d == pytest.approx(np.exp(-20 * 0.01), rel=1e-6)
