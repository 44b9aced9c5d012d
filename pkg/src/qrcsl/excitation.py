"""Collapse-induced excitation of bound states.

The general first-order rate and its small-size series are checked on a
two-particle isotropic oscillator: the particles sit at ``+r/2`` and
``-r/2`` so the center of mass is exactly zero, the initial state is the
``l = 0`` ground state and the final state the ``n_r = 0, l = 2`` level.
Lengths in the oracle are in units of ``a``; rates come back in units of
``lambda`` unless stated otherwise.

The nuclear predictions use closed forms in CGS units with the transition
data in :class:`NucleusSpec`.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from numpy.polynomial.legendre import leggauss

from .numerics import DomainError, spherical_in_small, spherical_jn_small
from .params import SECONDS_PER_DAY, ModelParams

__all__ = [
    "EXPERIMENTAL_BOUND",
    "GE74",
    "GE74_ALL_ISOTOPES",
    "NucleusSpec",
    "OscillatorOracleConfig",
    "QuadrupoleConsistency",
    "SecondMoments",
    "excitation_rate_exact",
    "excitation_rate_series",
    "exclusion_scan",
    "oscillator_second_moments",
    "quadrupole_consistency",
    "quadrupole_rate_qrcsl",
    "quadrupole_rate_rcsl",
    "rcsl_rate_general",
    "rcsl_wavenumber",
]

# counts/kg-day for 0.596 MeV gammas in germanium
EXPERIMENTAL_BOUND = 3e-2

CONSISTENT = "consistent"
EXCLUDED = "excluded"


@dataclass(frozen=True)
class NucleusSpec:
    """Transition data: photon wavenumber (1/cm), lifetime (s), nuclei per kg."""

    k: float
    tau: float
    delta_e: float
    nuclei_per_kg: float
    label: str = ""

    def __post_init__(self):
        for name in ("k", "tau", "nuclei_per_kg"):
            if not getattr(self, name) > 0:
                raise DomainError(f"{name} must be positive")


GE74 = NucleusSpec(k=3.2e10, tau=17.9e-12, delta_e=0.596, nuclei_per_kg=3.0e24, label="Ge-74")
GE74_ALL_ISOTOPES = NucleusSpec(k=3.2e10, tau=17.9e-12, delta_e=0.596, nuclei_per_kg=8.3e24,
                                label="Ge (all isotopes)")


def _flag(rate):
    return CONSISTENT if rate < EXPERIMENTAL_BOUND else EXCLUDED


# ---------------------------------------------------------------------------
# Nuclear closed forms
# ---------------------------------------------------------------------------

def _per_kg_day(rate_per_nucleus, nucleus):
    return rate_per_nucleus * nucleus.nuclei_per_kg * SECONDS_PER_DAY


def quadrupole_rate_qrcsl(nucleus: NucleusSpec = GE74, params: ModelParams | None = None):
    """Quadrupole excitation rate in counts/kg-day and its comparison flag.

    ``(5/2)^2 lambda / ((a k)^4 alpha k c tau)`` per nucleus.
    """
    p = params or ModelParams()
    ak = p.a * nucleus.k
    per_nucleus = 6.25 * p.lam / (ak**4 * p.alpha_fs * nucleus.k * p.c * nucleus.tau)
    rate = _per_kg_day(per_nucleus, nucleus)
    return rate, _flag(rate)


def quadrupole_rate_rcsl(nucleus: NucleusSpec = GE74, params: ModelParams | None = None):
    """Same transition for the tachyonic-noise model, ``(5/3 pi^2) lambda a / (alpha c tau)``."""
    p = params or ModelParams()
    per_nucleus = 5.0 / (3.0 * math.pi**2) * p.lam * p.a / (p.alpha_fs * p.c * nucleus.tau)
    rate = _per_kg_day(per_nucleus, nucleus)
    return rate, _flag(rate)


@dataclass(frozen=True)
class QuadrupoleConsistency:
    rate_via_strength: float
    rate_via_lifetime: float
    tau_implied: float


def quadrupole_consistency(S, nucleus: NucleusSpec = GE74, params: ModelParams | None = None):
    """Check that eliminating the strength through the lifetime reproduces the rate.

    ``S`` is the summed squared quadrupole matrix element in cm^4. The
    direct rate is ``(pi/15)(lambda/a^4) S``; the lifetime implied by ``S``
    is ``[(4 pi / (3 * 5^3)) c k^5 alpha S]^{-1}``, and feeding that lifetime
    to the closed form must give the same rate. Rates are per nucleus in 1/s.
    """
    if not S >= 0:
        raise DomainError("quadrupole strength must be non-negative")
    p = params or ModelParams()
    direct = math.pi / 15.0 * p.lam / p.a**4 * S
    if S == 0:
        return QuadrupoleConsistency(0.0, 0.0, math.inf)
    inv_tau = 4.0 * math.pi / 375.0 * p.c * nucleus.k**5 * p.alpha_fs * S
    tau = 1.0 / inv_tau
    ak = p.a * nucleus.k
    via_tau = 6.25 * p.lam / (ak**4 * p.alpha_fs * nucleus.k * p.c * tau)
    return QuadrupoleConsistency(direct, via_tau, tau)


def exclusion_scan(lambdas, as_, nucleus: NucleusSpec = GE74, params: ModelParams | None = None):
    """Both model predictions over a (lambda, a) grid, with bound flags.

    Returns a list of dicts, one per grid point, in row-major order.
    """
    base = params or ModelParams()
    rows = []
    for lam in lambdas:
        for a in as_:
            if not (lam > 0 and a > 0):
                raise DomainError("scan ranges must be positive")
            p = ModelParams(lam=lam, a=a, M=base.M, alpha_fs=base.alpha_fs, c=base.c)
            q, qf = quadrupole_rate_qrcsl(nucleus, p)
            r, rf = quadrupole_rate_rcsl(nucleus, p)
            rows.append({"lambda": lam, "a": a, "rate_qrcsl": q, "flag_qrcsl": qf,
                         "rate_rcsl": r, "flag_rcsl": rf})
    return rows


# ---------------------------------------------------------------------------
# Oscillator oracle
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class OscillatorOracleConfig:
    """Two-particle oscillator with relative-coordinate length ``b`` (units of a).

    ``final_l = 2`` selects the quadrupole level with projection ``m``;
    ``final_l = 0`` would be the initial state itself and is rejected where
    a transition is required.
    """

    b: float
    final_l: int = 2
    m: int = 0

    def __post_init__(self):
        if not self.b > 0:
            raise DomainError("oscillator length must be positive")
        if self.final_l not in (0, 2):
            raise DomainError("final_l must be 0 or 2")
        if abs(self.m) > self.final_l:
            raise DomainError("|m| must not exceed final_l")

    def require_transition(self):
        if self.final_l == 0:
            raise DomainError("initial and final states are identical; no transition")


# particle positions are c_n * r with c = +1/2, -1/2
_COEFFS = (0.5, -0.5)


def _radial_overlap(b, r):
    """``N_0 N_2 r^2 exp(-r^2/b^2)``: product of the two radial functions."""
    n0 = (math.pi * b * b) ** -0.75
    n2 = math.sqrt(16.0 / (15.0 * math.sqrt(math.pi) * b**7))
    return n0 * n2 * r * r * np.exp(-(r * r) / (b * b))


def _radial_nodes(b, n=160):
    # the overlap is negligible beyond 10 b
    x, w = leggauss(n)
    upper = 10.0 * b
    return 0.5 * upper * (x + 1.0), 0.5 * upper * w


def excitation_rate_exact(config: OscillatorOracleConfig, lam=1.0, a=1.0, n_nodes=160):
    """First-order rate from the full Gaussian overlap, by quadrature.

    Expanding ``exp(c_n c_m r.r' / 2a^2)`` in spherical harmonics leaves
    only the ``l = 2`` term after the angular integrals:

        Gamma = lambda sum_nm 4 pi int int r^2 r'^2 R(r) R(r')
                exp(-(c_n^2 r^2 + c_m^2 r'^2) / 4a^2) i_2(c_n c_m r r' / 2a^2)

    ``b`` is in units of ``a``; pass ``a`` only to rescale (the rate goes
    as ``1/a^4`` at small ``b``).
    """
    config.require_transition()
    b = config.b
    r, w = _radial_nodes(b, n_nodes)
    radial = r * r * _radial_overlap(b, r) * w
    total = 0.0
    for cn in _COEFFS:
        for cm in _COEFFS:
            kappa = cn * cm * np.outer(r, r) / 2.0
            damp = np.exp(-(cn * cn * r * r)[:, None] / 4.0 - (cm * cm * r * r)[None, :] / 4.0)
            vals = damp * spherical_in_small(2, kappa)
            total += float(radial @ vals @ radial)
    # lengths were in units of a; rescale for a given a in the same units as b's reference
    return lam * 4.0 * math.pi * total / a**4


@dataclass(frozen=True)
class SecondMoments:
    """Transition matrix elements of ``sum_n X_n^2`` and ``sum_n X_n^i X_n^j``.

    ``overlap`` is ``<f|i>``; a nonzero value means the data do not describe
    a transition.
    """

    trace: complex
    tensor: np.ndarray
    overlap: complex = 0.0


def _y2(m, theta, phi):
    st, ct = np.sin(theta), np.cos(theta)
    if m == 0:
        return 0.25 * math.sqrt(5.0 / math.pi) * (3.0 * ct * ct - 1.0) + 0j * phi
    if abs(m) == 1:
        sign = -1.0 if m > 0 else 1.0
        return sign * 0.5 * math.sqrt(15.0 / (2.0 * math.pi)) * st * ct * np.exp(1j * m * phi)
    return 0.25 * math.sqrt(15.0 / (2.0 * math.pi)) * st * st * np.exp(1j * m * phi)


def _sphere_nodes(n_theta=24, n_phi=48):
    x, wx = leggauss(n_theta)
    phi = 2.0 * math.pi * np.arange(n_phi) / n_phi
    theta = np.arccos(x)
    th, ph = np.meshgrid(theta, phi, indexing="ij")
    wt = np.outer(wx, np.full(n_phi, 2.0 * math.pi / n_phi))
    return th.ravel(), ph.ravel(), wt.ravel()


def _final_angular(config, theta, phi):
    if config.final_l == 0:
        return np.full(theta.shape, 1.0 / math.sqrt(4.0 * math.pi), dtype=complex)
    return _y2(config.m, theta, phi)


def oscillator_second_moments(config: OscillatorOracleConfig):
    """Second-moment transition data for the oracle, in units of ``a^2``.

    Angular integrals use a Gauss-Legendre by trapezoid product rule on the
    sphere, which is exact for these low-degree polynomials.
    """
    b = config.b
    th, ph, wt = _sphere_nodes()
    unit = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    ang_f = np.conj(_final_angular(config, th, ph))
    ang_i = 1.0 / math.sqrt(4.0 * math.pi)
    r, w = _radial_nodes(b)
    n0 = (math.pi * b * b) ** -0.75
    if config.final_l == 2:
        nf = math.sqrt(16.0 / (15.0 * math.sqrt(math.pi) * b**7))
        radial_f = nf * r * r * np.exp(-(r * r) / (2.0 * b * b))
    else:
        radial_f = n0 * np.exp(-(r * r) / (2.0 * b * b)) * math.sqrt(4.0 * math.pi)
    radial_i = n0 * np.exp(-(r * r) / (2.0 * b * b)) * math.sqrt(4.0 * math.pi)
    rad0 = float(np.sum(w * r * r * radial_f * radial_i))
    rad2 = float(np.sum(w * r**4 * radial_f * radial_i))
    ang_overlap = np.sum(wt * ang_f * ang_i)
    tensor = np.einsum("k,ik,jk->ij", wt * ang_f * ang_i, unit, unit) * rad2
    weight = sum(c * c for c in _COEFFS)
    tensor = tensor * weight
    trace = np.trace(tensor)
    return SecondMoments(trace=complex(trace), tensor=tensor, overlap=complex(rad0 * ang_overlap))


def _bracket(data: SecondMoments, tol=1e-10):
    if abs(data.overlap) > tol:
        raise DomainError("initial and final states are not orthogonal")
    t = np.asarray(data.tensor, dtype=complex)
    return abs(data.trace) ** 2 + 2.0 * float(np.sum(np.abs(t) ** 2))


def excitation_rate_series(data: SecondMoments, lam=1.0, a=1.0):
    """Leading small-size rate ``lambda (2a)^-4 [|trace|^2 + 2 sum_ij |T_ij|^2]``.

    Moments must be in the same length unit as ``a``.
    """
    return lam * (2.0 * a) ** -4 * _bracket(data)


# ---------------------------------------------------------------------------
# Tachyonic-noise model on the oracle
# ---------------------------------------------------------------------------

def rcsl_wavenumber(delta_e, a):
    """``k = sqrt(delta_e^2 + a^-2)`` with ``delta_e`` as an inverse length."""
    return math.sqrt(delta_e * delta_e + a**-2)


def rcsl_rate_general(config: OscillatorOracleConfig, k, lam=1.0, a=1.0, method="sinc"):
    """Excitation rate with the ``sin(k s)/s`` kernel, in units of ``lambda``.

    ``k`` is in units of ``1/a`` and ``b`` in units of ``a``. Methods:

    ``"sinc"``
        Addition theorem for ``j_0``; after the angular integrals
        ``Gamma = (4 lambda k / pi) (sum_n J_n)^2`` with
        ``J_n = int r^2 R(r) j_2(k |c_n| r) dr``.
    ``"momentum"``
        The on-shell momentum form: ``Gamma = lambda k / (4 pi^3)
        int dOmega |sum_n G_n(k n)|^2`` with ``G_n`` the transition form
        factor evaluated as a full three-dimensional quadrature.
    ``"series"``
        Leading small-``k b`` term ``2 lambda k^5 / (5! pi^2) [bracket]``.

    ``a`` multiplies the result (the rate is proportional to ``a`` at fixed
    dimensionless inputs).
    """
    config.require_transition()
    if not k > 0:
        raise DomainError("wavenumber must be positive")
    b = config.b
    if method == "sinc":
        r, w = _radial_nodes(b)
        base = r * r * _radial_overlap(b, r) * w
        total = sum(float(np.sum(base * spherical_jn_small(2, k * abs(c) * r))) for c in _COEFFS)
        return lam * a * 4.0 * k / math.pi * total * total
    if method == "series":
        return lam * a * 2.0 * k**5 / (120.0 * math.pi**2) * _bracket(oscillator_second_moments(config))
    if method == "momentum":
        return lam * a * k / (4.0 * math.pi**3) * _momentum_shell(config, k)
    raise ValueError(f"unknown method {method!r}")


def _momentum_shell(config, k):
    # int dOmega_p |sum_n <f| exp(i c_n p.r) |i>|^2 at |p| = k, all by quadrature
    b = config.b
    r, wr = _radial_nodes(b, 48)
    th, ph, wt = _sphere_nodes(20, 40)
    unit = np.stack([np.sin(th) * np.cos(ph), np.sin(th) * np.sin(ph), np.cos(th)])
    n0 = (math.pi * b * b) ** -0.75
    nf = math.sqrt(16.0 / (15.0 * math.sqrt(math.pi) * b**7))
    radial = (nf * r * r) * n0 * np.exp(-(r * r) / (b * b)) * r * r * wr
    density = np.conj(_final_angular(config, th, ph)) * wt
    pth, pph, pwt = _sphere_nodes(16, 32)
    pdir = np.stack([np.sin(pth) * np.cos(pph), np.sin(pth) * np.sin(pph), np.cos(pth)])
    cosines = pdir.T @ unit  # (n_p, n_angle)
    total = 0.0
    for j in range(pdir.shape[1]):
        form = 0.0 + 0.0j
        for c in _COEFFS:
            phase = np.exp(1j * c * k * np.outer(r, cosines[j]))
            form += radial @ phase @ density
        total += pwt[j] * abs(form) ** 2
    return total
