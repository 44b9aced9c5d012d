"""Collapse rate of a superposed free particle and the energy creation rate.

Lengths are in units of ``a``, momenta in ``1/a``; the mass enters as
``mu = M a``. Rates come back as :class:`~qrcsl.params.RateResult` with the
dimensionless value in units of ``lambda`` (collapse) or ``lambda n M``
(energy) and a physical conversion taken from :class:`ModelParams`.

Collapse rate
-------------
For ``psi = alpha f_L + beta f_R`` with Gaussian packets
``f(z) = (2 pi s^2)^{-3/4} exp(-(z - c)^2 / 4 s^2)`` the position-space
evolution of ``rho(x_L, x_R)`` is

    d rho / dt = -lambda C [ (K psi)(x_L) psi*(x_R) + psi(x_L) (K psi*)(x_R) ]

with ``C = mu^3 e^{2 mu^2} K_1(2 mu^2) / (2 pi^{5/2})`` and
``(K psi)(x) = int d^3z K_1(mu |x - z|) / |x - z| psi(z)``. The effective
decay rate is minus the right side divided by ``rho`` at the packet centers.
Radial reduction gives, for a packet centered at distance ``D`` from ``x``,

    D = 0:  4 pi N int r K_1(mu r) exp(-r^2 / 4 s^2) dr
    D > 0:  (4 pi N s^2 / D) int K_1(mu r) [e^{-(r-D)^2/4s^2} - e^{-(r+D)^2/4s^2}] dr

An independent momentum-space path integrates over ``p2`` first and then
over ``p1`` with the packets' Fourier transforms.
"""
from __future__ import annotations

import math
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import special

from .kernels import gaussian_nomeasure_integral, gaussian_onshell_integral
from .numerics import (
    DomainError,
    QuadratureSpec,
    bessel_k_scaled,
    quad_adaptive,
    scaled_bessel_difference,
)
from .params import ModelParams, RateResult

__all__ = [
    "MomentumDistribution",
    "RegimeWarning",
    "TwoPacketState",
    "collapse_decay_rate",
    "collapse_decay_rate_momentum",
    "cross_term_bound",
    "energy_rate_asymptote",
    "energy_rate_direct",
    "energy_rate_exact",
]


class RegimeWarning(UserWarning):
    """Inputs are outside the regime where a limiting statement applies."""


@dataclass(frozen=True)
class TwoPacketState:
    """Two Gaussian packets of common width a distance ``separation`` apart."""

    separation: float
    width: float
    weight_L: float = 0.5

    def __post_init__(self):
        if not self.separation >= 0:
            raise DomainError("separation must be non-negative")
        if not self.width > 0:
            raise DomainError("width must be positive")
        if not 0.0 <= self.weight_L <= 1.0:
            raise DomainError("weight_L must lie in [0, 1]")

    @property
    def widely_separated(self):
        return self.separation >= 5.0 * (self.width + 1.0)

    @property
    def amplitudes(self):
        return math.sqrt(self.weight_L), math.sqrt(1.0 - self.weight_L)


@dataclass(frozen=True)
class MomentumDistribution:
    """Occupancy of momentum magnitudes; the weights sum to the particle count."""

    momenta: tuple
    weights: tuple

    def __post_init__(self):
        p = np.asarray(self.momenta, dtype=float)
        w = np.asarray(self.weights, dtype=float)
        if p.shape != w.shape or p.ndim != 1 or p.size == 0:
            raise DomainError("momenta and weights must be equal-length 1-d sequences")
        if np.any(p < 0) or np.any(w < 0):
            raise DomainError("momenta and weights must be non-negative")
        if not w.sum() > 0:
            raise DomainError("distribution has zero total weight")
        object.__setattr__(self, "momenta", tuple(float(x) for x in p))
        object.__setattr__(self, "weights", tuple(float(x) for x in w))

    @property
    def n(self):
        return math.fsum(self.weights)


def _resolve(mu, params):
    if params is None:
        params = ModelParams() if mu is None else ModelParams.from_mu(mu)
    if mu is None:
        mu = params.mu
    if not mu > 0:
        raise DomainError("mu must be positive")
    return float(mu), params


def _packet_norm(width):
    return (2.0 * math.pi * width * width) ** -0.75


def _k1(x):
    return bessel_k_scaled(1, x) * math.exp(-x)


def _reach(width, mu):
    # truncation radius: the tail bound exp(-T^2/4s^2 - mu T) stays below 1e-10
    reach = max(8.0 * width, 40.0 / mu)
    while math.exp(-reach * reach / (4.0 * width * width) - mu * reach) > 1e-10:
        reach *= 1.5
    return reach


def _self_term(width, mu, rel_tol):
    n = _packet_norm(width)
    four_s2 = 4.0 * width * width

    def integrand(r):
        x = mu * r
        if x == 0.0:
            return 1.0 / mu
        return r * bessel_k_scaled(1, x) * math.exp(-x - r * r / four_s2)

    reach = _reach(width, mu)
    spec = QuadratureSpec(0.0, reach, relative_tolerance=rel_tol, max_subdivisions=500,
                          breakpoints=(1.0 / mu, 10.0 / mu, 40.0 / mu, width, 4.0 * width))
    return 4.0 * math.pi * n * quad_adaptive(integrand, spec)


def _offset_term(width, mu, dist, rel_tol, abs_tol=0.0):
    n = _packet_norm(width)
    four_s2 = 4.0 * width * width

    def integrand(r):
        if r == 0.0:
            return 0.0
        # e^{-(r-D)^2/4s^2} (1 - e^{-rD/s^2}) keeps both pieces well scaled
        gauss = math.exp(-((r - dist) ** 2) / four_s2) * -math.expm1(-r * dist / (width * width))
        return _k1(mu * r) * gauss

    # start at 0 even when the packet is far away: the kernel peaks at r = 0
    reach = _reach(width, mu)
    scale = 4.0 * math.pi * n * width * width / dist
    spec = QuadratureSpec(0.0, dist + reach, relative_tolerance=rel_tol,
                          absolute_tolerance=max(abs_tol / scale, 1e-300),
                          max_subdivisions=500, breakpoints=(dist, 1.0 / mu, 10.0 / mu, 40.0 / mu))
    return scale * quad_adaptive(integrand, spec)


def _collapse_prefactor(mu):
    return mu**3 * bessel_k_scaled(1, 2.0 * mu * mu) / (2.0 * math.pi**2.5)


def collapse_decay_rate(state: TwoPacketState, mu=None, params: ModelParams | None = None,
                        rel_tol=1e-12):
    """Effective decay rate of the coherence between the two packet centers.

    Returned in units of ``lambda``; ``value_physical`` is in 1/s. Warns
    with :class:`RegimeWarning` when the packets are not widely separated or
    the width is not large against the Compton wavelength.
    """
    mu, params = _resolve(mu, params)
    if not state.widely_separated:
        warnings.warn("packets are not widely separated; the dropped cross term may matter",
                      RegimeWarning, stacklevel=2)
    if state.width <= 2.0 / mu:
        warnings.warn("packet width is not large against 1/mu; the CSL limit does not apply",
                      RegimeWarning, stacklevel=2)
    alpha, beta = state.amplitudes
    sigma, dist = state.width, state.separation
    self_part = _self_term(sigma, mu, rel_tol)
    offset_part = (_offset_term(sigma, mu, dist, rel_tol, rel_tol * self_part)
                   if dist > 0 else self_part)
    n = _packet_norm(sigma)
    far = n * math.exp(-dist * dist / (4.0 * sigma * sigma))
    left = (alpha * self_part + beta * offset_part) / (alpha * n + beta * far)
    right = (beta * self_part + alpha * offset_part) / (beta * n + alpha * far)
    value = _collapse_prefactor(mu) * (left + right)
    return RateResult("QRCSL", value, mu, "1/s", params.lam,
                      details={"method": "position-quadrature"})


def _momentum_packet_integral(width, mu, dist, rel_tol, abs_tol=0.0):
    # (4 pi s^2)^{3/2} N * 4 pi int p^2/E e^{-s^2 p^2} j0(p D) dp
    n = _packet_norm(width)
    s2 = width * width

    def integrand(p):
        e = math.hypot(p, mu)
        j0 = 1.0 if dist == 0 else float(special.spherical_jn(0, p * dist))
        return p * p / e * math.exp(-s2 * p * p) * j0

    reach = math.sqrt(40.0) / width
    scale = n * (4.0 * math.pi * s2) ** 1.5 * 4.0 * math.pi
    spec = QuadratureSpec(0.0, reach, relative_tolerance=rel_tol, absolute_tolerance=abs_tol / scale,
                          max_subdivisions=1000, breakpoints=(1.0 / width, 3.0 / width))
    return scale * quad_adaptive(integrand, spec)


def collapse_decay_rate_momentum(state: TwoPacketState, mu=None, params=None, rel_tol=1e-11):
    """Same rate as :func:`collapse_decay_rate`, computed in momentum space.

    The ``p2`` integral is done by quadrature rather than closed form, so
    this path shares no kernel evaluation with the position-space one.
    """
    mu, params = _resolve(mu, params)
    alpha, beta = state.amplitudes
    sigma, dist = state.width, state.separation
    j17 = gaussian_onshell_integral(0.0, mu, method="quadrature").value
    const = 0.5 * (4.0 * math.pi**3) ** -1.5 * mu * mu * j17
    self_part = _momentum_packet_integral(sigma, mu, 0.0, rel_tol)
    # the offset piece is ~exp(-D^2/4s^2) of the self piece; resolve it absolutely
    offset_part = (_momentum_packet_integral(sigma, mu, dist, rel_tol, rel_tol * self_part)
                   if dist > 0 else self_part)
    n = _packet_norm(sigma)
    far = n * math.exp(-dist * dist / (4.0 * sigma * sigma))
    left = (alpha * self_part + beta * offset_part) / (alpha * n + beta * far)
    right = (beta * self_part + alpha * offset_part) / (beta * n + alpha * far)
    return RateResult("QRCSL", const * (left + right), mu, "1/s", params.lam,
                      details={"method": "momentum-quadrature"})


def cross_term_bound(state: TwoPacketState, mu=None):
    """Size of the dropped ``A rho A`` term relative to the kept terms, at t = 0.

    With ``E1 = E2 = M`` the momentum integral collapses to a Gaussian of
    width ``a`` about each center, and the ratio is the overlap of the left
    and right Gaussians over their self-overlaps, computed by quadrature
    (analytically ``exp(-D^2/4)``). ``mu`` does not enter at t = 0 and is
    accepted only for a uniform call signature.
    """
    dist = state.separation
    xl, xr = -0.5 * dist, 0.5 * dist

    def overlap(x):
        return math.exp(-0.5 * (x - xl) ** 2 - 0.5 * (x - xr) ** 2)

    def self_overlap(x):
        return math.exp(-(x * x))

    pts = (xl, 0.0, xr)
    spec = QuadratureSpec(-math.inf, math.inf, relative_tolerance=1e-12, absolute_tolerance=1e-300,
                          breakpoints=pts)
    cross = quad_adaptive(overlap, spec)
    kept = quad_adaptive(self_overlap, QuadratureSpec(-math.inf, math.inf, relative_tolerance=1e-12,
                                                      breakpoints=(0.0,)))
    return cross / kept


def _energy_conversion(params, n):
    return n * params.lam * params.energy_unit_erg()


def energy_rate_exact(mu=None, n=1, params: ModelParams | None = None):
    """``g(mu) = (2 mu / sqrt(pi)) e^{2mu^2} [K_0 - K_1 (1 - 1/mu^2)](2 mu^2)``.

    Units ``lambda n M``; ``value_physical`` is in erg/s. The bracket is
    formed without cancellation at large ``mu``.
    """
    mu, params = _resolve(mu, params)
    if not n >= 1:
        raise DomainError("particle count must be at least 1")
    z = 2.0 * mu * mu
    bracket = scaled_bessel_difference(z, 1.0 / (mu * mu))
    g = 2.0 * mu / math.sqrt(math.pi) * bracket
    return RateResult("QRCSL", g, mu, "erg/s", _energy_conversion(params, n),
                      details={"n": n})


def energy_rate_asymptote(mu):
    """Large-``mu`` limit ``3 / (4 mu^2)`` in units of ``lambda n M``."""
    return 3.0 / (4.0 * mu * mu)


def energy_rate_direct(dist: MomentumDistribution, mu=None, params=None, method="quadrature"):
    """Energy creation rate summed over an explicit momentum occupancy.

    Each occupied momentum contributes ``I25(E)/E - I17(p)``; the rate is
    ``mu / (pi^{3/2} n) * sum_k w_k [...]`` in units of ``lambda n M``. With
    ``method="quadrature"`` both integrals are done numerically for every
    momentum, so agreement with :func:`energy_rate_exact` is a genuine test
    of distribution independence.
    """
    mu, params = _resolve(mu, params)
    if not isinstance(dist, MomentumDistribution):
        raise DomainError("expected a MomentumDistribution")
    terms = []
    for p, w in zip(dist.momenta, dist.weights):
        if w == 0.0:
            continue
        energy = math.hypot(p, mu) / mu
        with_measure = gaussian_onshell_integral(p, mu, method=method).value
        without = gaussian_nomeasure_integral(energy, mu, method=method).value
        terms.append(w * (without / (energy * mu) - with_measure))
    total_n = dist.n
    g = mu / (math.pi**1.5 * total_n) * math.fsum(terms)
    return RateResult("QRCSL", g, mu, "erg/s", _energy_conversion(params, total_n),
                      details={"n": total_n, "method": method})
