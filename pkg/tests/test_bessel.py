import math

import mpmath as mp
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from gpmisspec.bessel import _bessel_k_scalar, bessel_k, bessel_k_array

# K_10(3) from the series + recurrence oracle in tests/oracles/bessel_oracle.py
K10_AT_3 = 2459.6204220569467


def k_half_integer(nu, x):
    """Closed form of K_{p+1/2}(x)."""
    p = int(nu - 0.5)
    s = sum(math.factorial(p + k) / (math.factorial(k) * math.factorial(p - k)) / (2 * x) ** k for k in range(p + 1))
    return math.sqrt(math.pi / (2 * x)) * math.exp(-x) * s


def test_k_half_at_one():
    assert bessel_k(0.5, 1.0) == pytest.approx(math.sqrt(math.pi / 2) * math.exp(-1), rel=1e-14)
    assert bessel_k(0.5, 1.0) == pytest.approx(0.4610685044, abs=1e-10)


def test_k_three_halves_at_two():
    expected = math.sqrt(math.pi / 4) * math.exp(-2) * 1.5
    assert bessel_k(1.5, 2.0) == pytest.approx(expected, rel=1e-14)
    assert bessel_k(1.5, 2.0) == pytest.approx(0.1799066579, abs=1e-10)


def test_k10_matches_series_oracle():
    assert bessel_k(10, 3.0) == pytest.approx(K10_AT_3, rel=1e-12)


@pytest.mark.parametrize("nu", [0.5, 1.5, 2.5, 3.5, 10.5, 20.5])
@pytest.mark.parametrize("x", [1e-8, 1e-3, 0.3, 1.0, 1.999, 2.0, 5.0, 40.0, 300.0, 690.0])
def test_half_integer_closed_forms(nu, x):
    assert bessel_k(nu, x) == pytest.approx(k_half_integer(nu, x), rel=1e-10)


def test_against_mpmath_random():
    rng = np.random.default_rng(7)
    nus = rng.uniform(0.0, 20.5, 150)
    xs = np.exp(rng.uniform(np.log(1e-8), np.log(700.0), 150))
    for nu, x in zip(nus, xs):
        ref = float(mp.besselk(nu, x))
        assert bessel_k(nu, x) == pytest.approx(ref, rel=1e-10)


@settings(max_examples=200, deadline=None)
@given(st.floats(1.0, 19.5), st.floats(1e-3, 600.0))
def test_recurrence_residual(nu, x):
    km, k, kp = bessel_k(nu - 1, x), bessel_k(nu, x), bessel_k(nu + 1, x)
    assert abs(kp - km - 2 * nu / x * k) <= 1e-9 * abs(kp)


def test_underflow_returns_zero():
    assert bessel_k(10.0, 800.0) == 0.0
    assert np.all(bessel_k_array(2.0, np.array([750.0, 1e4])) == 0.0)


@pytest.mark.parametrize("nu,x", [(-0.1, 1.0), (1.0, 0.0), (1.0, -2.0), (float("nan"), 1.0)])
def test_domain_errors(nu, x):
    with pytest.raises(ValueError):
        bessel_k(nu, x)


@pytest.mark.parametrize("nu", [0.0, 0.3, 0.5, 1.0, 4.7, 10.0, 20.5])
def test_array_path_matches_scalar_kernel(nu):
    x = np.geomspace(1e-8, 700, 400)
    ref = np.array([_bessel_k_scalar(nu, v) for v in x])
    np.testing.assert_allclose(bessel_k_array(nu, x), ref, rtol=1e-13)


def test_array_keeps_shape():
    x = np.linspace(0.5, 3.0, 6).reshape(2, 3)
    assert bessel_k_array(1.0, x).shape == (2, 3)
