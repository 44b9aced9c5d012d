import math

import numpy as np
import pytest

from oracles import bessel_k_scaled_reference, gaussian_second_moment_mc, spherical_i2_reference
from qrcsl.numerics import (
    AccuracyError,
    DomainError,
    QuadratureSpec,
    bessel_k_scaled,
    bessel_k_scaled_asymptotic,
    mc_integrate_gaussian,
    quad_adaptive,
    scaled_bessel_difference,
    spherical_in_small,
    spherical_jn_small,
    worker_count,
)


@pytest.mark.parametrize("nu", [0, 1])
@pytest.mark.parametrize("z", [1e-3, 0.1, 0.5, 1.9, 2.5, 7.0, 30.0, 49.0, 51.0, 400.0, 1e6, 1e17])
def test_bessel_against_reference(nu, z):
    assert bessel_k_scaled(nu, z) == pytest.approx(bessel_k_scaled_reference(nu, z), rel=1e-12)


def test_bessel_known_values():
    # K_0(1) e, K_1(1) e from tables
    assert bessel_k_scaled(0, 1.0) == pytest.approx(0.42102443824070834 * math.e, rel=1e-14)
    assert bessel_k_scaled(1, 1.0) == pytest.approx(0.6019072301972346 * math.e, rel=1e-14)


def test_bessel_array_and_errors():
    out = bessel_k_scaled(1, np.array([1.0, 2.0]))
    assert isinstance(out, np.ndarray) and out.shape == (2,)
    assert isinstance(bessel_k_scaled(0, 3.0), float)
    with pytest.raises(DomainError):
        bessel_k_scaled(0, 0.0)
    with pytest.raises(DomainError):
        bessel_k_scaled(2, 1.0)
    with pytest.raises(DomainError):
        bessel_k_scaled(1, np.array([1.0, -1.0]))


def test_asymptotic_two_term_forms():
    z = 1e4
    pref = math.sqrt(math.pi / (2 * z))
    assert bessel_k_scaled_asymptotic(0, z, terms=1) == pytest.approx(pref * (1 - 1 / (8 * z)), rel=1e-15)
    assert bessel_k_scaled_asymptotic(1, z, terms=1) == pytest.approx(pref * (1 + 3 / (8 * z)), rel=1e-15)
    assert bessel_k_scaled_asymptotic(1, 80.0) == pytest.approx(bessel_k_scaled(1, 80.0), rel=1e-13)


@pytest.mark.parametrize("z", [1.0, 20.0, 60.0, 2e4, 2e10])
def test_scaled_difference_matches_direct(z):
    eps = 2.0 / z
    import mpmath
    with mpmath.workdps(60):
        zz = mpmath.mpf(z)
        exact = float(mpmath.exp(zz) * (mpmath.besselk(0, zz) - (1 - mpmath.mpf(eps)) * mpmath.besselk(1, zz)))
    assert scaled_bessel_difference(z, eps) == pytest.approx(exact, rel=1e-12)


@pytest.mark.parametrize("x", [1e-6, 0.01, 0.3, 1.5, 1.99, 2.01, 5.0, 20.0])
def test_spherical_i2(x):
    assert float(spherical_in_small(2, x)) == pytest.approx(spherical_i2_reference(x), rel=1e-13)


def test_spherical_j2_small_argument():
    x = np.array([1e-4, 0.05, 1.0, 3.0])
    from scipy.special import spherical_jn
    got = spherical_jn_small(2, x)
    assert got[0] == pytest.approx(x[0] ** 2 / 15, rel=1e-8)
    assert np.allclose(got[1:], spherical_jn(2, x[1:]), rtol=1e-12)


def test_quad_adaptive_basic_and_breakpoints():
    spec = QuadratureSpec(0.0, math.inf, breakpoints=(1.0, 5.0))
    assert quad_adaptive(lambda x: math.exp(-x), spec) == pytest.approx(1.0, rel=1e-12)
    # oscillatory weight on a semi-infinite range
    spec = QuadratureSpec(0.0, math.inf, weight="sin", wvar=2.0, absolute_tolerance=1e-14)
    assert quad_adaptive(lambda x: math.exp(-x), spec) == pytest.approx(2.0 / 5.0, rel=1e-10)


def test_quad_adaptive_reports_failure():
    spec = QuadratureSpec(0.0, 1.0, relative_tolerance=1e-12, max_subdivisions=3)
    with pytest.raises(AccuracyError) as info:
        quad_adaptive(lambda x: math.sin(1.0 / x) / math.sqrt(x) if x > 0 else 0.0, spec)
    assert math.isfinite(info.value.estimate)


def test_quadrature_spec_validation():
    with pytest.raises(ValueError):
        QuadratureSpec(1.0, 0.0)
    with pytest.raises(ValueError):
        QuadratureSpec(relative_tolerance=0.0)


def test_mc_second_moment_against_brute_force():
    est = mc_integrate_gaussian(3, lambda x: x[:, 0] ** 2, 200_000, seed=5)
    assert abs(est.mean - 1.0) < 4 * est.std_error
    brute = gaussian_second_moment_mc(3, 200_000, 7)
    assert abs(est.mean - brute) < 0.03


def test_mc_bit_identical_across_workers():
    f = lambda x: np.exp(-np.sum(x * x, axis=1) / 3.0)
    a = mc_integrate_gaussian(4, f, 300_000, seed=11, block_size=50_000, workers=1)
    b = mc_integrate_gaussian(4, f, 300_000, seed=11, block_size=50_000, workers=4)
    assert a.mean == b.mean and a.std_error == b.std_error


def test_mc_validation_and_confidence():
    with pytest.raises(ValueError):
        mc_integrate_gaussian(2, lambda x: x[:, 0], 1, seed=0)
    with pytest.raises(ValueError):
        mc_integrate_gaussian(0, lambda x: x[:, 0], 10, seed=0)
    noisy = mc_integrate_gaussian(1, lambda x: x[:, 0], 100, seed=0)
    assert noisy.low_confidence


def test_worker_cap(monkeypatch):
    monkeypatch.setenv("QRCSL_WORKERS", "1")
    assert worker_count(8) == 1
    monkeypatch.delenv("QRCSL_WORKERS")
    assert worker_count(3) == 3
