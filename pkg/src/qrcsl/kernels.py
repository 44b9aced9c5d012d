"""Momentum- and position-space kernels of the quasirelativistic model.

Units: hbar = c = 1, lengths in units of the collapse length ``a`` and
momenta in ``1/a``, so the mass enters only through ``mu = M a``. Every
closed form has an independent quadrature path.

Three-dimensional momentum integrals with a Gaussian in the invariant
separation are reduced to one dimension by doing the polar angle
analytically. With ``P = |p1|``, ``q = |p2|`` and ``E = sqrt(p^2 + mu^2)``
the invariant square ``(p1 - p2)^2 = 2(E1 E2 - P q u - mu^2)`` gives

    int d^3p2 h(q) exp(-(p1 - p2)^2)
        = 2 pi int_0^inf q^2 h(q) exp(-2X) (1 - exp(-4 P q)) / (2 P q) dq

with ``X = E1 E2 - P q - mu^2 = mu^2 (P - q)^2 / (E1 E2 + P q + mu^2)``,
which is evaluated in that cancellation-free form.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import _accel
from .numerics import (
    AccuracyError,
    DomainError,
    MCEstimate,
    QuadratureSpec,
    bessel_k_scaled,
    mc_moments_gaussian,
    quad_adaptive,
)
from .params import ModelParams

__all__ = [
    "KernelValue",
    "ModelParams",
    "commutator_kernel",
    "delta_normalization",
    "fourier_onshell_kernel",
    "gaussian_nomeasure_integral",
    "gaussian_onshell_integral",
    "onshell_invariant_exponent",
    "smeared_commutator_profile",
    "smeared_commutator_radial",
]

CLOSED_FORM = "closed-form"
QUADRATURE = "quadrature"
MONTE_CARLO = "monte-carlo"


@dataclass(frozen=True)
class KernelValue:
    value: float
    units: str
    method: str

    def __float__(self):
        return float(self.value)


def _check_method(method):
    if method not in (CLOSED_FORM, QUADRATURE):
        raise ValueError(f"method must be {CLOSED_FORM!r} or {QUADRATURE!r}")


def _bessel_k1(x):
    return bessel_k_scaled(1, x) * math.exp(-x)


def commutator_kernel(s, M):
    """Equal-time commutator kernel ``M^2 K_1(M s) / (2 pi^2 s)``.

    ``s`` is the invariant spacelike separation and ``M`` the mass as an
    inverse length, in consistent units.
    """
    if not s > 0:
        raise DomainError("commutator kernel needs a spacelike separation s > 0")
    if not M > 0:
        raise DomainError("mass must be positive")
    x = M * s
    value = M * M * bessel_k_scaled(1, x) * math.exp(-x) / (2.0 * math.pi**2 * s)
    return KernelValue(value, "per-volume", CLOSED_FORM)


def onshell_invariant_exponent(p1, p2, mu):
    """Invariant ``(p1 - p2)^2`` for on-shell 3-momenta, computed without cancellation.

    Returns ``2 (|p1 x p2|^2 + mu^2 |p1 - p2|^2) / (E1 E2 + p1.p2 + mu^2)``,
    which is algebraically ``2 (E1 E2 - p1.p2 - mu^2)`` and never negative.
    """
    p1 = np.asarray(p1, dtype=float)
    p2 = np.asarray(p2, dtype=float)
    e1 = np.sqrt(np.sum(p1 * p1, axis=-1) + mu * mu)
    e2 = np.sqrt(np.sum(p2 * p2, axis=-1) + mu * mu)
    cross = np.cross(p1, p2)
    diff = p1 - p2
    num = np.sum(cross * cross, axis=-1) + mu * mu * np.sum(diff * diff, axis=-1)
    den = e1 * e2 + np.sum(p1 * p2, axis=-1) + mu * mu
    return 2.0 * num / den


def _radial_gaussian_integral(P, mu, weight, rel_tol):
    # 2 pi int q^2 weight(q) e^{-2X} (1 - e^{-4Pq})/(2Pq) dq
    e1 = math.hypot(P, mu)

    def integrand(q):
        e2 = math.hypot(q, mu)
        x = mu * mu * (P - q) ** 2 / (e1 * e2 + P * q + mu * mu)
        pq = P * q
        angular = 2.0 if pq == 0.0 else -math.expm1(-4.0 * pq) / (2.0 * pq)
        return q * q * weight(q, e2) * math.exp(-2.0 * x) * angular

    # the peak sits at q = P with unit width; beyond it the decay can be slow
    # (rate ~ mu^2 / (E1 + P)) when mu is small
    width = max(1.0, (e1 + P) / max(mu * mu, 1e-300))
    spec = QuadratureSpec(
        0.0,
        math.inf,
        relative_tolerance=rel_tol,
        max_subdivisions=500,
        breakpoints=(P, P + 8.0, P + 40.0 * width),
    )
    return 2.0 * math.pi * quad_adaptive(integrand, spec)


def gaussian_onshell_integral(p1_magnitude, mu, method=CLOSED_FORM, rel_tol=1e-11):
    """``int d^3p2/E2 exp(-(p1 - p2)^2)`` with the invariant exponent.

    The closed form is ``2 pi e^{2 mu^2} K_1(2 mu^2)``, independent of
    ``p1`` by Lorentz invariance; the quadrature path keeps ``p1``.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    if p1_magnitude < 0:
        raise DomainError("momentum magnitude must be non-negative")
    _check_method(method)
    if method == CLOSED_FORM:
        value = 2.0 * math.pi * bessel_k_scaled(1, 2.0 * mu * mu)
    else:
        value = _radial_gaussian_integral(float(p1_magnitude), mu, lambda q, e2: 1.0 / e2, rel_tol)
    return KernelValue(value, "per-area", method)


def gaussian_nomeasure_integral(p1_energy, mu, method=CLOSED_FORM, rel_tol=1e-11):
    """``int d^3p2 exp(-(p1 - p2)^2)`` for an on-shell ``p1`` of energy ``E1 = p1_energy * mu``.

    Closed form ``2 pi E1 e^{2 mu^2} [K_0(2 mu^2) + K_1(2 mu^2) / mu^2]``,
    proportional to the energy.
    """
    if not mu > 0:
        raise DomainError("mu must be positive")
    if not p1_energy >= 1.0:
        raise DomainError("on-shell energy must be at least the mass (p1_energy >= 1)")
    _check_method(method)
    e1 = p1_energy * mu
    if method == CLOSED_FORM:
        z = 2.0 * mu * mu
        bracket = bessel_k_scaled(0, z) + bessel_k_scaled(1, z) / (mu * mu)
        value = 2.0 * math.pi * e1 * bracket
    else:
        P = mu * math.sqrt((p1_energy - 1.0) * (p1_energy + 1.0))
        value = _radial_gaussian_integral(P, mu, lambda q, e2: 1.0, rel_tol)
    return KernelValue(value, "per-volume", method)


def fourier_onshell_kernel(r, M, method=CLOSED_FORM):
    """``int d^3p/E exp(i p.r) = 4 pi M K_1(M r) / r``.

    The quadrature path uses ``p/E = 1 - M^2/((p + E) E)`` so that the
    conditionally convergent radial Fourier integral splits into
    ``int sin(p r) dp = 1/r`` plus an absolutely convergent sine transform
    done with an oscillatory-weight rule.
    """
    if not r > 0:
        raise DomainError("separation must be positive")
    if not M > 0:
        raise DomainError("mass must be positive")
    _check_method(method)
    if method == CLOSED_FORM:
        value = 4.0 * math.pi * M * _bessel_k1(M * r) / r
    else:
        m2 = M * M

        def tail(p):
            e = math.sqrt(p * p + m2)
            return m2 / ((p + e) * e)

        # finite part up to a whole number of periods, then the Fourier tail;
        # cutting mid-period upsets the tail's cycle extrapolation
        period = 2.0 * math.pi / r
        cut = period * math.ceil(20.0 * max(M, 1.0 / r) / period)
        head = QuadratureSpec(0.0, cut, relative_tolerance=1e-12, max_subdivisions=2000,
                              weight="sin", wvar=r)
        rest = QuadratureSpec(cut, math.inf, weight="sin", wvar=r, absolute_tolerance=1e-16)
        sine = quad_adaptive(tail, head) + quad_adaptive(tail, rest)
        remainder = 1.0 / r - sine
        value = (4.0 * math.pi / r) * remainder
        # the answer is a difference of O(1/r) terms; at large M r it drowns
        rel_err = 1e-12 / (r * abs(remainder)) if remainder != 0 else math.inf
        if rel_err > 1e-6:
            raise AccuracyError(
                f"sine-transform path loses {rel_err:.1e} relative accuracy at M r = {M * r:g}",
                estimate=value,
                error=abs(value) * rel_err,
            )
    return KernelValue(value, "per-area", method)


def delta_normalization(M, rel_tol=1e-12):
    """``int d^3z K_1(M|z|)/|z|`` by radial quadrature; equals ``2 pi^2 / M^2``."""
    if not M > 0:
        raise DomainError("mass must be positive")

    def integrand(r):
        x = M * r
        if x == 0.0:
            return 1.0 / M
        return r * bessel_k_scaled(1, x) * math.exp(-x)

    spec = QuadratureSpec(0.0, math.inf, relative_tolerance=rel_tol, breakpoints=(1.0 / M, 10.0 / M))
    return 4.0 * math.pi * quad_adaptive(integrand, spec)


# ---------------------------------------------------------------------------
# Quasilocality profile
# ---------------------------------------------------------------------------
#
# The collapse operators at two equal-time points a distance d apart are
# each smeared by independent unit Gaussians in the three space coordinates
# and the (imaginary) time shift. The commutator factor depends only on the
# difference of the two smearing vectors, so the eight-dimensional average
# collapses to a four-dimensional one over W ~ N(0, 2 I_4) of the kernel at
# Euclidean length s = |D + W|.

_SMEAR_SIGMA = math.sqrt(2.0)


def _resolve_mu(params_or_mu):
    if isinstance(params_or_mu, ModelParams):
        return params_or_mu.mu
    mu = float(params_or_mu)
    if not mu > 0:
        raise DomainError("mu must be positive")
    return mu


def _kernel_unit_a(s, mu):
    # commutator kernel in units of a (M = mu)
    return mu * mu * special.k1e(mu * s) * np.exp(-mu * s) / (2.0 * math.pi**2 * s)


def _smeared_unnormalized(d, mu, rel_tol):
    lam = d / _SMEAR_SIGMA

    if lam == 0.0:
        def density(x):
            return 0.5 * x**3 * math.exp(-0.5 * x * x)
    else:
        def density(x):
            # non-central chi density with four degrees of freedom
            return x * x / lam * math.exp(-0.5 * (x - lam) ** 2) * special.ive(1, lam * x)

    def integrand(x):
        if x == 0.0:
            return 0.0
        return density(x) * float(_kernel_unit_a(_SMEAR_SIGMA * x, mu))

    core = 1.0 / (mu * _SMEAR_SIGMA)
    pts = tuple(sorted({core, 10.0 * core, lam, lam + 1.0}))
    upper = lam + 12.0
    spec = QuadratureSpec(0.0, upper, relative_tolerance=rel_tol, max_subdivisions=400, breakpoints=pts)
    return quad_adaptive(integrand, spec)


def smeared_commutator_radial(d, params_or_mu, rel_tol=1e-10):
    """Smeared commutator magnitude at separation ``d`` (units of a) by 1-d quadrature.

    Normalized to 1 at ``d = 0``.
    """
    if d < 0:
        raise DomainError("separation must be non-negative")
    mu = _resolve_mu(params_or_mu)
    if d == 0:
        return 1.0
    return _smeared_unnormalized(d, mu, rel_tol) / _smeared_unnormalized(0.0, mu, rel_tol)


def smeared_commutator_absolute(d, params_or_mu, rel_tol=1e-10):
    """Unnormalized smeared kernel (units ``1/a^3``) by 1-d quadrature."""
    if d < 0:
        raise DomainError("separation must be non-negative")
    return _smeared_unnormalized(float(d), _resolve_mu(params_or_mu), rel_tol)


def smeared_commutator_profile(d, params_or_mu, n_samples=200_000, seed=0, workers=None):
    """Monte Carlo estimate of the normalized smeared commutator at separation ``d``.

    The same samples (same seed) are used for ``d`` and the ``d = 0``
    reference, and the ratio's standard error comes from the delta method.
    ``low_confidence`` on the result flags a standard error above 20%.
    """
    if d < 0:
        raise DomainError("separation must be non-negative")
    mu = _resolve_mu(params_or_mu)
    if d == 0:
        return MCEstimate(1.0, 0.0, int(n_samples), seed)
    beta = 1.5 / mu
    seps = np.array([float(d), 0.0])
    means, cov, n = _mc_vector(
        lambda z: _accel.smear_integrand(z, seps, mu, beta), 8, 2, n_samples, seed, workers
    )
    num, den = means
    ratio = float(num / den)
    # delta method for a ratio of correlated means
    var = (cov[0, 0] - 2.0 * ratio * cov[0, 1] + ratio * ratio * cov[1, 1]) / (den * den) / n
    return MCEstimate(ratio, math.sqrt(max(var, 0.0)), n, seed)


def smeared_profile_scan(separations, params_or_mu, n_samples=200_000, seed=0, workers=None):
    """Normalized profile at several separations from a single shared sample set."""
    mu = _resolve_mu(params_or_mu)
    seps = np.asarray(list(separations) + [0.0], dtype=float)
    if np.any(seps < 0):
        raise DomainError("separations must be non-negative")
    beta = 1.5 / mu
    k = seps.size
    means, cov, n = _mc_vector(
        lambda z: _accel.smear_integrand(z, seps, mu, beta), 8, k, n_samples, seed, workers
    )
    den = means[-1]
    out = []
    for j in range(k - 1):
        if seps[j] == 0:
            out.append(MCEstimate(1.0, 0.0, n, seed))
            continue
        r = float(means[j] / den)
        var = (cov[j, j] - 2.0 * r * cov[j, -1] + r * r * cov[-1, -1]) / (den * den) / n
        out.append(MCEstimate(r, math.sqrt(max(var, 0.0)), n, seed))
    return out


def _mc_vector(integrand, dim, k, n_samples, seed, workers):
    return mc_moments_gaussian(dim, integrand, k, n_samples, seed, workers=workers)
