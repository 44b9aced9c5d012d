"""Special functions, deterministic quadrature and seeded Monte Carlo.

The modified Bessel functions are always handled in exponentially scaled
form, ``e^z K_nu(z)``, because the model's arguments reach ``2 (M a)^2``
(around 1e17 for a nucleon at the GRW length), where ``K_nu`` itself
underflows.
"""
from __future__ import annotations

import math
import os
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np
from scipy import integrate, special

__all__ = [
    "AccuracyError",
    "DomainError",
    "MCEstimate",
    "QuadratureSpec",
    "bessel_k_scaled",
    "bessel_k_scaled_asymptotic",
    "scaled_bessel_difference",
    "mc_integrate_gaussian",
    "mc_moments_gaussian",
    "quad_adaptive",
    "spherical_in_small",
    "spherical_jn_small",
    "worker_count",
]


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class AccuracyError(RuntimeError):
    """A numerical method failed to reach its requested tolerance.

    The best available estimate is kept on ``estimate`` with its error
    estimate on ``error``.
    """

    def __init__(self, message, estimate=float("nan"), error=float("inf")):
        super().__init__(message)
        self.estimate = estimate
        self.error = error


def worker_count(requested=None):
    """Number of worker threads, capped by ``QRCSL_WORKERS`` when set."""
    cap = os.environ.get("QRCSL_WORKERS")
    n = requested if requested is not None else (os.cpu_count() or 1)
    if cap:
        n = min(n, max(1, int(cap)))
    return max(1, int(n))


# ---------------------------------------------------------------------------
# Bessel functions
# ---------------------------------------------------------------------------

def bessel_k_scaled(nu, z):
    """Exponentially scaled modified Bessel function ``e^z K_nu(z)``.

    Parameters
    ----------
    nu : {0, 1}
        Order.
    z : float or array_like
        Strictly positive argument. Values up to ~1e300 are fine.

    Returns
    -------
    float or ndarray
    """
    if nu not in (0, 1):
        raise DomainError(f"order must be 0 or 1, got {nu!r}")
    z_arr = np.asarray(z, dtype=float)
    if np.any(~(z_arr > 0)):
        raise DomainError("scaled Bessel K requires z > 0")
    out = special.k0e(z_arr) if nu == 0 else special.k1e(z_arr)
    return float(out) if out.ndim == 0 else out


def bessel_k_scaled_asymptotic(nu, z, terms=None):
    """Large-argument series ``sqrt(pi/2z) sum_k a_k(nu) / z^k``.

    With ``terms=1`` this reproduces the two-term forms
    ``sqrt(pi/2z)(1 - 1/8z)`` and ``sqrt(pi/2z)(1 + 3/8z)``.
    """
    coeffs = _asymptotic_coefficients(nu, terms if terms is not None else 24)
    z = float(z)
    acc = 0.0
    for c in reversed(coeffs):
        acc = acc / z + c
    return math.sqrt(math.pi / (2.0 * z)) * acc


def _asymptotic_coefficients(nu, terms):
    mu4 = 4.0 * nu * nu
    coeffs = [1.0]
    c = 1.0
    for k in range(1, terms + 1):
        c *= (mu4 - (2 * k - 1) ** 2) / (8.0 * k)
        coeffs.append(c)
    return coeffs


def scaled_bessel_difference(z, eps):
    """``e^z [K_0(z) - (1 - eps) K_1(z)]`` without cancellation for large z.

    ``eps`` is passed separately because the two terms agree to leading
    order when it is small; above z = 50 the difference is summed term by
    term in the asymptotic series with ``eps`` carrying the leading term.
    """
    z = float(z)
    if z <= 0:
        raise DomainError("scaled Bessel K requires z > 0")
    if z < 50.0:
        return bessel_k_scaled(0, z) - (1.0 - eps) * bessel_k_scaled(1, z)
    c0 = _asymptotic_coefficients(0, 24)
    c1 = _asymptotic_coefficients(1, 24)
    diff = [eps] + [a - b + eps * b for a, b in zip(c0[1:], c1[1:])]
    acc = 0.0
    for c in reversed(diff):
        acc = acc / z + c
    return math.sqrt(math.pi / (2.0 * z)) * acc


def _series_spherical(l, x, sign):
    # x^l sum_k (sign x^2/2)^k / (k! (2l+2k+1)!!)
    dfact = 1.0
    for j in range(1, 2 * l + 2, 2):
        dfact *= j
    x = np.asarray(x, dtype=float)
    y = sign * x * x / 2.0
    term = np.ones_like(x) / dfact
    total = term.copy()
    for k in range(1, 40):
        term = term * y / (k * (2 * l + 2 * k + 1))
        total = total + term
        if np.all(np.abs(term) <= 1e-17 * np.abs(total)):
            break
    return x**l * total


def spherical_jn_small(l, x):
    """Spherical Bessel ``j_l`` accurate at small argument (series below 2)."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 2.0
    out = np.empty_like(x)
    out[small] = _series_spherical(l, x[small], -1.0)
    out[~small] = special.spherical_jn(l, x[~small])
    return out


def spherical_in_small(l, x):
    """Modified spherical Bessel ``i_l`` accurate at small argument."""
    x = np.asarray(x, dtype=float)
    small = np.abs(x) < 2.0
    out = np.empty_like(x)
    out[small] = _series_spherical(l, x[small], 1.0)
    out[~small] = special.spherical_in(l, x[~small])
    return out


# ---------------------------------------------------------------------------
# Quadrature
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class QuadratureSpec:
    """Domain and tolerance for :func:`quad_adaptive`.

    ``breakpoints`` split the domain into pieces integrated separately,
    which is how integrable endpoint singularities and interior peaks are
    declared. ``weight``/``wvar`` select QUADPACK's oscillatory weights
    (``"sin"`` or ``"cos"`` with frequency ``wvar``).
    """

    lower: float = 0.0
    upper: float = math.inf
    relative_tolerance: float = 1e-10
    absolute_tolerance: float = 0.0
    max_subdivisions: int = 200
    breakpoints: Sequence[float] = field(default_factory=tuple)
    weight: str | None = None
    wvar: float | None = None

    def __post_init__(self):
        if not self.relative_tolerance > 0:
            raise ValueError("relative_tolerance must be positive")
        if self.max_subdivisions < 1:
            raise ValueError("max_subdivisions must be >= 1")
        if not self.lower < self.upper:
            raise ValueError("empty integration domain")

    def pieces(self):
        pts = sorted(p for p in self.breakpoints if self.lower < p < self.upper)
        edges = [self.lower, *pts, self.upper]
        return list(zip(edges[:-1], edges[1:]))


def quad_adaptive(integrand: Callable[[float], float], spec: QuadratureSpec) -> float:
    """Integrate a scalar function to the tolerance in ``spec``.

    Raises :class:`AccuracyError` (carrying the best estimate) when the
    error estimate exceeds the requested tolerance.
    """
    total = 0.0
    err_total = 0.0
    for lo, hi in spec.pieces():
        kwargs = dict(
            epsabs=spec.absolute_tolerance,
            epsrel=spec.relative_tolerance,
            limit=spec.max_subdivisions,
            full_output=1,
        )
        if spec.weight is not None:
            kwargs.update(weight=spec.weight, wvar=spec.wvar)
            if math.isinf(hi):
                # QAWF: Fourier integral, tolerance is absolute only
                kwargs.pop("epsrel")
                kwargs["epsabs"] = max(spec.absolute_tolerance, 1e-14)
                kwargs["limlst"] = 200
        out = integrate.quad(integrand, lo, hi, **kwargs)
        total += out[0]
        err_total += out[1]
    allowed = max(spec.absolute_tolerance, spec.relative_tolerance * abs(total))
    if not math.isfinite(total) or err_total > 10.0 * allowed and err_total > 1e-300:
        raise AccuracyError(
            f"quadrature error estimate {err_total:.3e} exceeds tolerance {allowed:.3e}",
            estimate=total,
            error=err_total,
        )
    return total


# ---------------------------------------------------------------------------
# Monte Carlo
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MCEstimate:
    """Monte Carlo mean with its standard error."""

    mean: float
    std_error: float
    n_samples: int
    seed: int

    @property
    def relative_error(self):
        return abs(self.std_error / self.mean) if self.mean != 0 else math.inf

    @property
    def low_confidence(self):
        """True when the standard error exceeds 20% of the mean."""
        return self.relative_error > 0.2


def block_generator(seed, block):
    """RNG stream for one block of samples, a pure function of (seed, block)."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(block,))))


def _merge(a, b):
    # Chan et al. pairwise update of (count, mean vector, co-moment matrix)
    na, ma, sa = a
    nb, mb, sb = b
    n = na + nb
    delta = mb - ma
    mean = ma + delta * (nb / n)
    comoment = sa + sb + np.outer(delta, delta) * (na * nb / n)
    return n, mean, comoment


def _block_stats(seed, k, m, dim, integrand, width):
    x = block_generator(seed, k).standard_normal((m, dim))
    vals = np.asarray(integrand(x), dtype=float).reshape(m, width)
    mean = vals.mean(axis=0)
    centered = vals - mean
    return m, mean, centered.T @ centered


def mc_moments_gaussian(dim, integrand, width, n_samples, seed, block_size=1 << 16, workers=None):
    """Mean vector and covariance of a vector-valued integrand under N(0, I_dim).

    ``integrand`` maps an ``(m, dim)`` array to ``(m, width)`` values.
    Returns ``(mean, covariance, n_samples)``. Blocks draw from streams
    keyed by ``(seed, block index)`` and are merged in block order, so the
    result does not depend on ``workers``.
    """
    if dim < 1:
        raise ValueError("dim must be >= 1")
    if n_samples < 2:
        raise ValueError("need at least two samples to estimate an error")
    n_blocks = -(-n_samples // block_size)
    sizes = [min(block_size, n_samples - k * block_size) for k in range(n_blocks)]

    def run(k):
        return _block_stats(seed, k, sizes[k], dim, integrand, width)

    nw = worker_count(workers)
    if nw == 1 or n_blocks == 1:
        stats = [run(k) for k in range(n_blocks)]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            stats = list(pool.map(run, range(n_blocks)))
    acc = stats[0]
    for s in stats[1:]:
        acc = _merge(acc, s)
    n, mean, comoment = acc
    return mean, comoment / (n - 1), n


def mc_integrate_gaussian(
    dim: int,
    integrand: Callable[[np.ndarray], np.ndarray],
    n_samples: int,
    seed: int,
    block_size: int = 1 << 16,
    workers: int | None = None,
) -> MCEstimate:
    """Estimate ``E[f(x)]`` for ``x ~ N(0, I_dim)``.

    ``integrand`` receives an ``(m, dim)`` array and returns ``m`` values.
    Samples come in fixed blocks whose streams depend only on
    ``(seed, block index)``; block statistics are merged in block order,
    so the result is bit-identical for any number of workers.
    """
    mean, cov, n = mc_moments_gaussian(dim, integrand, 1, n_samples, seed, block_size, workers)
    std_error = math.sqrt(max(float(cov[0, 0]), 0.0) / n)
    return MCEstimate(mean=float(mean[0]), std_error=std_error, n_samples=n, seed=seed)
