"""Stochastic collapse dynamics of one particle on a periodic 1-d grid.

Units: lengths in ``a``, momenta in ``1/a``, time in collapse times
(``lambda_sim = 1``). Site ``i`` of the collapse field sits on grid point
``x_i`` and carries weight ``dx``.

Two operator families are supported:

* CSL: ``A_i`` diagonal in position, ``pi^{-1/4} exp(-(x - x_i)^2 / 2)``.
* QRCSL: in the momentum basis ``<p'|A_i|p> = K(p', p) exp(-i (p' - p) x_i)``
  with ``K = c mu/sqrt(E E') exp(-[(p' - p)^2 - (E' - E)^2] / 2)`` on the
  momenta ``|p| <= p_max``. The constant ``c`` makes ``K`` reduce to the
  Fourier transform of the CSL Gaussian as ``mu -> inf``.

Every set in the momentum representation is translation covariant, so
``sum_i dx A_i^2`` is diagonal and the noise term ``sum_i w_i A_i`` is ``K``
times a discrete Fourier transform of ``w``.
"""
from __future__ import annotations

import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from . import _accel
from .free_rates import TwoPacketState
from .kernels import onshell_invariant_exponent
from .numerics import DomainError, worker_count

__all__ = [
    "CollapseOperatorSet",
    "EnsembleConfig",
    "EnsembleStats",
    "Grid1D",
    "IntegrationError",
    "StabilityError",
    "StateVector",
    "build_collapse_operators",
    "coherence",
    "csl_closed_form",
    "master_evolve",
    "off_diagonal_decay_rate",
    "packet_state",
    "run_ensemble",
    "step_trajectory",
]

CSL = "CSL"
QRCSL = "QRCSL"
COOKED = "cooked"
RAW = "raw"

STABILITY_LIMIT = 0.1
DEAD_FLAG_FRACTION = 0.01
_LOG_TINY = math.log(1e-300)


class StabilityError(DomainError):
    """Time step too large for the collapse generator."""


class IntegrationError(RuntimeError):
    """Master-equation integration lost trace, Hermiticity or positivity."""


@dataclass(frozen=True)
class Grid1D:
    """Periodic grid with points ``x_j = (j - n//2) dx``."""

    n_points: int
    dx: float
    dt: float

    def __post_init__(self):
        if int(self.n_points) != self.n_points or self.n_points < 8:
            raise DomainError("n_points must be an integer >= 8")
        if self.n_points % 2:
            raise DomainError("n_points must be even")
        if not self.dx > 0:
            raise DomainError("dx must be positive")
        if not self.dt > 0:
            raise DomainError("dt must be positive")
        # sum_i dx G_i^2 -> 1 for the CSL set: the generic bound
        if self.dt >= STABILITY_LIMIT:
            raise StabilityError(f"dt = {self.dt} violates dt * rate < {STABILITY_LIMIT}")

    @property
    def length(self):
        return self.n_points * self.dx

    @property
    def x(self):
        return (np.arange(self.n_points) - self.n_points // 2) * self.dx

    @property
    def p(self):
        return 2.0 * np.pi * np.fft.fftfreq(self.n_points, self.dx)

    def periodic_distance(self):
        d = np.abs(self.x[:, None] - self.x[None, :])
        return np.minimum(d, self.length - d)

    def fourier_matrix(self):
        """Unitary map from position amplitudes to momentum amplitudes."""
        return np.exp(-1j * np.outer(self.p, self.x)) / math.sqrt(self.n_points)

    def site_phases(self):
        # e^{-i (p_a - p_b) x_i} depends only on t = (a - b) mod n
        n = self.n_points
        i = np.arange(n) - n // 2
        return np.exp(-2j * np.pi * np.outer(i, np.arange(n)) / n)


@dataclass
class StateVector:
    """Position amplitudes times ``exp(log_scale)``.

    The dynamics is not unitary; the scale is kept separately so that
    squared norms far below the floating-point range stay representable.
    """

    amplitudes: np.ndarray
    log_scale: float = 0.0

    def __post_init__(self):
        self.amplitudes = np.asarray(self.amplitudes, dtype=complex)
        if not np.all(np.isfinite(self.amplitudes)):
            raise DomainError("state has non-finite entries")
        if not np.any(self.amplitudes != 0):
            raise DomainError("state has zero norm")

    @property
    def log_norm2(self):
        return float(np.log(np.sum(np.abs(self.amplitudes) ** 2))) + 2.0 * self.log_scale

    def normalized(self):
        return self.amplitudes / math.sqrt(float(np.sum(np.abs(self.amplitudes) ** 2)))

    @property
    def dead(self):
        return self.log_norm2 < _LOG_TINY


def packet_state(grid: Grid1D, state: TwoPacketState) -> StateVector:
    """Normalized superposition of two packets at ``-D/2`` (left) and ``+D/2``."""
    d = grid.x[:, None] - np.array([-0.5, 0.5])[None, :] * state.separation
    d = (d + 0.5 * grid.length) % grid.length - 0.5 * grid.length
    packets = np.exp(-d * d / (4.0 * state.width**2))
    packets /= np.sqrt(np.sum(packets**2, axis=0))
    amp_l, amp_r = state.amplitudes
    psi = amp_l * packets[:, 0] + amp_r * packets[:, 1]
    return StateVector(psi / math.sqrt(float(np.sum(np.abs(psi) ** 2))))


@dataclass
class CollapseOperatorSet:
    """Collapse operators ``A_i`` for every grid site.

    ``rows`` holds the CSL diagonals ``G[i, j] = A_i(x_j)`` for position
    sets; ``kernel`` the momentum kernel ``K`` for momentum sets, which
    are all QRCSL sets and every set with a momentum cutoff.
    """

    grid: Grid1D
    variant: str
    mu: float | None = None
    p_max: float | None = None
    rows: np.ndarray | None = None
    kernel: np.ndarray | None = None
    _cache: dict = field(default_factory=dict, repr=False)

    @property
    def basis(self):
        return "position" if self.rows is not None else "momentum"

    @property
    def mask(self):
        if self.p_max is None:
            return np.ones(self.grid.n_points, dtype=bool)
        return np.abs(self.grid.p) <= self.p_max * (1 + 1e-12)

    def squared_sum(self):
        """Diagonal of ``sum_i dx A_i^2`` in the set's own basis."""
        if "b" not in self._cache:
            if self.rows is not None:
                self._cache["b"] = self.grid.dx * np.einsum("ij,ij->j", self.rows, self.rows)
            else:
                self._cache["b"] = self.grid.length * np.sum(np.abs(self.kernel) ** 2, axis=1)
        return self._cache["b"]

    def max_rate(self):
        return float(np.max(self.squared_sum()))

    def position_matrices(self):
        """All ``A_i`` as dense position-basis matrices, shape ``(n, n, n)``."""
        n = self.grid.n_points
        if self.rows is not None:
            out = np.zeros((n, n, n), dtype=complex)
            idx = np.arange(n)
            out[:, idx, idx] = self.rows
            return out
        F = self.grid.fourier_matrix()
        phases = self.grid.site_phases()
        diff = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
        out = np.empty((n, n, n), dtype=complex)
        for i in range(n):
            out[i] = F.conj().T @ (self.kernel * phases[i][diff]) @ F
        return out

    def project(self, state: StateVector) -> StateVector:
        """Remove momentum components above the cutoff."""
        if self.p_max is None:
            return StateVector(state.amplitudes.copy(), state.log_scale)
        F = self.grid.fourier_matrix()
        phi = (F @ state.amplitudes) * self.mask
        return StateVector(F.conj().T @ phi, state.log_scale)


def _csl_rows(grid):
    d = grid.periodic_distance()
    return np.pi**-0.25 * np.exp(-0.5 * d * d)


def _csl_momentum_kernel(grid, mask):
    # exact discrete transform of the periodic CSL Gaussian, then masked
    n = grid.n_points
    g0 = _csl_rows(grid)[n // 2]  # site at x = 0
    F = grid.fourier_matrix()
    k = F @ np.diag(g0.astype(complex)) @ F.conj().T
    return k * np.outer(mask, mask)


def _qrcsl_kernel(grid, mu, mask):
    p = grid.p
    e = np.sqrt(p * p + mu * mu)
    pa = np.zeros((p.size, 3))
    pa[:, 0] = p
    invariant = onshell_invariant_exponent(pa[:, None, :], pa[None, :, :], mu)
    c = np.pi**-0.25 * math.sqrt(2.0 * math.pi) / grid.length
    k = c * mu / np.sqrt(np.outer(e, e)) * np.exp(-0.5 * invariant)
    return k * np.outer(mask, mask)


def build_collapse_operators(grid: Grid1D, variant=CSL, mu=None, p_max=None) -> CollapseOperatorSet:
    """Collapse operator set for ``variant`` in ``{"CSL", "QRCSL"}``.

    A CSL set with ``p_max`` is the exact CSL set projected onto the
    momenta below the cutoff, which is the reference a QRCSL set with the
    same cutoff converges to. The reference is the exact discrete
    transform and so carries the lattice's periodic images at momentum
    transfer ``2 pi/dx``; the two agree only when ``2 pi/dx - 2 p_max`` is
    several units. Raises :class:`StabilityError` when
    ``dt * max eig(sum_i dx A_i^2) >= 0.1``.
    """
    if p_max is not None:
        if not p_max > 0:
            raise DomainError("p_max must be positive")
        if p_max < 2.0 * np.pi / grid.length:
            raise DomainError("p_max is below the grid's momentum spacing")
        if p_max > np.pi / grid.dx:
            raise DomainError("p_max exceeds the grid's largest momentum")
    if variant == CSL:
        if p_max is None:
            ops = CollapseOperatorSet(grid, CSL, rows=_csl_rows(grid))
        else:
            ops = CollapseOperatorSet(grid, CSL, p_max=p_max, kernel=None)
            ops.kernel = _csl_momentum_kernel(grid, ops.mask)
    elif variant == QRCSL:
        if mu is None or not mu > 0:
            raise DomainError("QRCSL needs a positive mu")
        ops = CollapseOperatorSet(grid, QRCSL, mu=float(mu), p_max=p_max)
        ops.kernel = _qrcsl_kernel(grid, float(mu), ops.mask)
    else:
        raise DomainError(f"unknown variant {variant!r}")
    if grid.dt * ops.max_rate() >= STABILITY_LIMIT:
        raise StabilityError(
            f"dt * max rate = {grid.dt * ops.max_rate():.3g} exceeds {STABILITY_LIMIT}")
    return ops


# ---------------------------------------------------------------------------
# Master equation
# ---------------------------------------------------------------------------

def csl_closed_form(rho0, ops: CollapseOperatorSet, t):
    """Exact solution for a diagonal set: ``rho_jk exp(-t/2 sum_i dx (G_ij - G_ik)^2)``."""
    if ops.rows is None:
        raise DomainError("closed form needs a position-diagonal set")
    return np.asarray(rho0, dtype=complex) * np.exp(-0.5 * t * _pair_rates(ops))


def _pair_rates(ops):
    if "pairs" not in ops._cache:
        g = ops.rows
        b = ops.squared_sum()
        cross = ops.grid.dx * (g.T @ g)
        ops._cache["pairs"] = b[:, None] + b[None, :] - 2.0 * cross
    return ops._cache["pairs"]


def _sandwich_indices(n):
    # idx[t, a] = (a - t) mod n
    return (np.arange(n)[None, :] - np.arange(n)[:, None]) % n


def _momentum_generator(ops):
    n = ops.grid.n_points
    idx = _sandwich_indices(n)
    kt = ops.kernel[np.arange(n)[None, :], idx]  # kt[t, a] = K[a, a - t]
    pair = ops.grid.length * kt[:, :, None] * kt.conj()[:, None, :]
    b = ops.squared_sum()

    def deriv(rho):
        gathered = rho[idx[:, :, None], idx[:, None, :]]
        sandwich = np.einsum("tab,tab->ab", pair, gathered)
        return -0.5 * (b[:, None] * rho + rho * b[None, :]) + sandwich

    return deriv


def master_evolve(rho0, ops: CollapseOperatorSet, t_final, dt=None, check_every=None):
    """Integrate ``d rho/dt = -1/2 sum_i dx [A_i, [A_i, rho]]`` with classical RK4.

    ``rho0`` and the result are position-basis matrices. Raises
    :class:`IntegrationError` if the trace drifts by more than 1e-8 per
    unit time, Hermiticity is lost, or the smallest eigenvalue falls
    below -1e-8.
    """
    grid = ops.grid
    dt = grid.dt if dt is None else dt
    if t_final < 0:
        raise DomainError("t_final must be non-negative")
    if dt * ops.max_rate() >= STABILITY_LIMIT:
        raise StabilityError("time step violates the stability constraint")
    rho = np.array(rho0, dtype=complex)
    trace0 = np.trace(rho).real
    if ops.rows is not None:
        rates = _pair_rates(ops)

        def deriv(r):
            return -0.5 * rates * r
        to_basis = from_basis = None
    else:
        deriv = _momentum_generator(ops)
        F = grid.fourier_matrix()
        rho = F @ rho @ F.conj().T
        to_basis, from_basis = F, F.conj().T
    n_steps = int(round(t_final / dt))
    if n_steps and abs(n_steps * dt - t_final) > 1e-9 * max(1.0, t_final):
        raise DomainError("t_final must be a whole number of steps")
    for _ in range(n_steps):
        k1 = deriv(rho)
        k2 = deriv(rho + 0.5 * dt * k1)
        k3 = deriv(rho + 0.5 * dt * k2)
        k4 = deriv(rho + dt * k3)
        rho = rho + dt / 6.0 * (k1 + 2.0 * k2 + 2.0 * k3 + k4)
    if to_basis is not None:
        rho = from_basis @ rho @ to_basis
    _check_density(rho, trace0, t_final)
    return rho


def _check_density(rho, trace0, t):
    scale = max(abs(trace0), 1e-300)
    drift = abs(np.trace(rho).real - trace0) / scale
    if drift > 1e-8 * max(t, 1.0):
        raise IntegrationError(f"trace drifted by {drift:.3e}")
    asym = np.max(np.abs(rho - rho.conj().T)) / scale
    if asym > 1e-10:
        raise IntegrationError(f"Hermiticity lost: {asym:.3e}")
    lowest = np.linalg.eigvalsh(0.5 * (rho + rho.conj().T))[0] / scale
    if lowest < -1e-8:
        raise IntegrationError(f"negative eigenvalue {lowest:.3e}")


def coherence(rho, grid: Grid1D, state: TwoPacketState):
    """``|<L|rho|R>|`` for the two normalized packets of ``state``."""
    left = packet_state(grid, TwoPacketState(state.separation, state.width, 1.0)).amplitudes
    right = packet_state(grid, TwoPacketState(state.separation, state.width, 0.0)).amplitudes
    return abs(left.conj() @ rho @ right)


def off_diagonal_decay_rate(ops: CollapseOperatorSet, state: TwoPacketState, t_final=0.2, dt=None):
    """Decay rate of the left-right coherence under the master equation.

    The packets are projected below the cutoff first when the set has one.
    Returns ``-ln(c(t)/c(0)) / t``.
    """
    grid = ops.grid
    psi = ops.project(packet_state(grid, state)).normalized()
    rho0 = np.outer(psi, psi.conj())
    rho = master_evolve(rho0, ops, t_final, dt)
    return -math.log(coherence(rho, grid, state) / coherence(rho0, grid, state)) / t_final


# ---------------------------------------------------------------------------
# Trajectories
# ---------------------------------------------------------------------------

def _noise_operator(ops, w):
    # sum_i w_i A_i in the set's basis
    n = ops.grid.n_points
    if ops.rows is not None:
        return w @ ops.rows
    wt = w @ ops.grid.site_phases()
    diff = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    return ops.kernel * wt[diff]


def step_trajectory(state: StateVector, ops: CollapseOperatorSet, w, dt=None, lam=1.0):
    """One step of ``exp{-(1/4 lam) sum_i dx dt (w_i - 2 lam A_i)^2}``.

    The exponent is applied as a single exponential of the summed
    Hermitian operator, so all sites act at the same instant. The scalar
    ``exp(-dx dt sum w^2 / 4 lam)`` goes into ``log_scale``. With
    ``lam = 0`` the noise measure collapses onto ``w = 0`` and the step is
    the identity.
    """
    if lam == 0:
        return StateVector(state.amplitudes.copy(), state.log_scale)
    grid = ops.grid
    dt = grid.dt if dt is None else dt
    h = grid.dx * dt
    w = np.asarray(w, dtype=float)
    scalar = -h * float(w @ w) / (4.0 * lam)
    if ops.rows is not None:
        expo = h * _noise_operator(ops, w) - lam * dt * ops.squared_sum()
        shift = float(expo.max())
        psi = state.amplitudes * np.exp(expo - shift)
    else:
        gen = h * _noise_operator(ops, w) - lam * dt * np.diag(ops.squared_sum())
        vals, vecs = np.linalg.eigh(0.5 * (gen + gen.conj().T))
        shift = float(vals.max())
        F = grid.fourier_matrix()
        phi = F @ state.amplitudes
        phi = vecs @ (np.exp(vals - shift) * (vecs.conj().T @ phi))
        psi = F.conj().T @ phi
    # keep the amplitudes O(1)
    norm = math.sqrt(float(np.sum(np.abs(psi) ** 2)))
    if norm == 0.0:
        return StateVector(state.amplitudes * 0 + 1e-300, -np.inf)
    return StateVector(psi / norm, state.log_scale + scalar + shift + math.log(norm))


@dataclass(frozen=True)
class EnsembleConfig:
    """Settings for :func:`run_ensemble`.

    ``t_final`` must be a whole number of grid steps; statistics are
    recorded every ``record_every`` steps. Trajectory ``k`` draws its noise
    from ``SeedSequence(seed, spawn_key=(k,))`` and trajectories are
    processed in fixed chunks, so results do not depend on ``workers``.
    """

    n_traj: int = 1000
    t_final: float = 1.0
    scheme: str = COOKED
    seed: int = 1729
    record_every: int = 1
    chunk_size: int = 64
    workers: int | None = None

    def __post_init__(self):
        if self.n_traj < 1:
            raise DomainError("n_traj must be positive")
        if self.scheme not in (COOKED, RAW):
            raise DomainError(f"scheme must be {COOKED!r} or {RAW!r}")
        if self.record_every < 1 or self.chunk_size < 1:
            raise DomainError("record_every and chunk_size must be positive")
        if self.t_final <= 0:
            raise DomainError("t_final must be positive")


@dataclass
class EnsembleStats:
    """Weighted ensemble summary.

    ``weights`` are the per-trajectory probability weights relative to the
    sampling measure (squared norm for raw noise, squared norm over the
    proposal likelihood for cooked noise); their mean is 1 in expectation
    at every recorded time, which ``martingale_mean``/``martingale_stderr``
    track.
    """

    n_traj: int
    times: np.ndarray
    rho: np.ndarray
    left_fraction: float
    left_fraction_stderr: float
    martingale_mean: np.ndarray
    martingale_stderr: np.ndarray
    dead_fraction: float
    weights: np.ndarray
    final_left_mass: np.ndarray

    @property
    def flagged(self):
        return self.dead_fraction > DEAD_FLAG_FRACTION

    def martingale_ok(self, n_sigma=3.0):
        dev = np.abs(self.martingale_mean - 1.0)
        return bool(np.all(dev <= n_sigma * self.martingale_stderr + 1e-12))


def _trajectory_noise(seed, k, n_steps, n_sites):
    gen = np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(k,))))
    return gen.standard_normal((n_steps, n_sites))


def _generic_chunk(psi0, ops, dt, noise, record_every, raw, left_mask):
    # same contract as the compiled CSL chunk, for any operator set
    grid = ops.grid
    h = grid.dx * dt
    sigma = math.sqrt(1.0 / h)
    n_traj, n_steps, _ = noise.shape
    psi_out = np.empty((n_traj, grid.n_points), dtype=complex)
    records = np.zeros((n_traj, n_steps // record_every, 4))
    F = grid.fourier_matrix()
    phases = grid.site_phases()
    n = grid.n_points
    diff = (np.arange(n)[:, None] - np.arange(n)[None, :]) % n
    for k in range(n_traj):
        state = StateVector(np.asarray(psi0, dtype=complex))
        state = StateVector(state.normalized())
        log_q = 0.0
        dead = False
        for step in range(n_steps):
            xi = noise[k, step]
            if raw:
                w = sigma * xi
            else:
                if ops.rows is not None:
                    mean_a = ops.rows @ (np.abs(state.amplitudes) ** 2)
                else:
                    phi = F @ state.amplitudes
                    m = np.conj(phi)[:, None] * ops.kernel * phi[None, :]
                    per_t = np.bincount(diff.ravel(), weights=m.real.ravel(), minlength=n) \
                        + 1j * np.bincount(diff.ravel(), weights=m.imag.ravel(), minlength=n)
                    mean_a = (phases @ per_t).real
                w = 2.0 * mean_a + sigma * xi
                log_q += h * float(np.sum(2.0 * w * mean_a - 2.0 * mean_a * mean_a))
            state = step_trajectory(state, ops, w, dt)
            # drop the Gaussian reference density: weights are relative to raw noise
            state = StateVector(state.amplitudes, state.log_scale + h * float(w @ w) / 4.0)
            dead = dead or state.log_norm2 < _LOG_TINY
            if (step + 1) % record_every == 0:
                r = (step + 1) // record_every - 1
                records[k, r] = (state.log_norm2, log_q,
                                 float(np.sum(np.abs(state.amplitudes[left_mask]) ** 2)), dead)
        psi_out[k] = state.amplitudes
    return psi_out, records


def run_ensemble(initial, ops: CollapseOperatorSet, config: EnsembleConfig = EnsembleConfig()):
    """Run ``config.n_traj`` trajectories and reduce them to :class:`EnsembleStats`.

    ``initial`` is a :class:`StateVector` or a :class:`TwoPacketState`.
    Outcomes are classified by the final probability left of ``x = 0``.
    The density matrix is the weight-averaged projector onto the
    normalized final states, divided by the total weight.
    """
    grid = ops.grid
    if isinstance(initial, TwoPacketState):
        initial = packet_state(grid, initial)
    psi0 = ops.project(initial).normalized()
    n_steps = int(round(config.t_final / grid.dt))
    if abs(n_steps * grid.dt - config.t_final) > 1e-9 * config.t_final:
        raise DomainError("t_final must be a whole number of steps")
    if n_steps % config.record_every:
        raise DomainError("record_every must divide the number of steps")
    n = grid.n_points
    left_mask = grid.x < 0
    raw = config.scheme == RAW
    starts = list(range(0, config.n_traj, config.chunk_size))

    def run_chunk(start):
        stop = min(start + config.chunk_size, config.n_traj)
        noise = np.stack([_trajectory_noise(config.seed, k, n_steps, n) for k in range(start, stop)])
        if ops.rows is not None:
            psi, rec = _accel.csl_trajectory_chunk(psi0, ops.rows, grid.dx, grid.dt, noise,
                                                   config.record_every, raw, left_mask)
        else:
            psi, rec = _generic_chunk(psi0, ops, grid.dt, noise, config.record_every, raw, left_mask)
        return np.asarray(psi), np.asarray(rec)

    nw = worker_count(config.workers)
    if nw == 1 or len(starts) == 1:
        parts = [run_chunk(s) for s in starts]
    else:
        with ThreadPoolExecutor(max_workers=nw) as pool:
            parts = list(pool.map(run_chunk, starts))
    psi = np.concatenate([p[0] for p in parts])
    rec = np.concatenate([p[1] for p in parts])

    log_w = rec[:, :, 0] if raw else rec[:, :, 0] - rec[:, :, 1]
    w_all = np.exp(log_w)
    w_all[rec[:, :, 3] > 0] = 0.0
    weights = w_all[:, -1]
    total = float(np.sum(weights))
    unit = psi / np.sqrt(np.sum(np.abs(psi) ** 2, axis=1))[:, None]
    rho = (unit.T * weights) @ unit.conj() / total
    left_mass = rec[:, -1, 2]
    outcome = (left_mass > 0.5).astype(float)
    frac = float(np.sum(weights * outcome) / total)
    # effective sample size for the binomial error of a weighted proportion
    n_eff = total**2 / float(np.sum(weights**2))
    stderr = math.sqrt(max(frac * (1.0 - frac), 0.0) / n_eff)
    m_mean = w_all.mean(axis=0)
    m_err = w_all.std(axis=0, ddof=1) / math.sqrt(config.n_traj) if config.n_traj > 1 \
        else np.full(m_mean.shape, np.inf)
    times = grid.dt * config.record_every * np.arange(1, rec.shape[1] + 1)
    return EnsembleStats(
        n_traj=config.n_traj,
        times=times,
        rho=rho,
        left_fraction=frac,
        left_fraction_stderr=stderr,
        martingale_mean=m_mean,
        martingale_stderr=m_err,
        dead_fraction=float(np.mean(rec[:, -1, 3] > 0)),
        weights=weights,
        final_left_mass=left_mass,
    )
