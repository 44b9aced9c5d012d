"""Pure-Python (NumPy) versions of the hot loops in ``_core.pyx``.

Both modules expose the same functions with the same argument order and
must return identical results up to floating-point reassociation.
"""
import math

import numpy as np
from scipy.special import k1e

_SMEAR_NORM = 1.0 / (4.0 * math.pi) ** 2
_LOG_TINY = math.log(1e-300)


def smear_integrand(z, separations, mu, beta):
    """Importance-weighted samples of the smeared commutator kernel.

    ``z`` is an ``(m, 8)`` block of unit Gaussians. The first four give a
    direction on the 3-sphere, the last four a Gamma(2, beta) radius ``s``
    whose density cancels the ``1/s^2`` singularity of the kernel. Column
    ``j`` of the result is the weight for center offset ``separations[j]``
    along the first axis; the smearing density is N(0, 2 I_4).
    """
    z = np.ascontiguousarray(z, dtype=float)
    seps = np.asarray(separations, dtype=float)
    norm = np.sqrt(np.einsum("ij,ij->i", z[:, :4], z[:, :4]))
    cos1 = z[:, 0] / norm
    s = 0.5 * beta * np.einsum("ij,ij->i", z[:, 4:], z[:, 4:])
    # kernel * s^2 * (2 pi^2 s^3 / proposal density), with e^{-mu s} folded in
    radial = mu * mu * k1e(mu * s) * s * beta * beta * np.exp(s / beta - mu * s - s * s / 4.0)
    out = np.empty((z.shape[0], seps.size))
    for j, d in enumerate(seps):
        # |V - D|^2 = s^2 - 2 d s cos + d^2; the s^2 part is already in radial
        out[:, j] = radial * np.exp((2.0 * d * s * cos1 - d * d) / 4.0) * _SMEAR_NORM
    return out


def csl_trajectory_chunk(psi0, kernel_rows, dx, dt, noise, record_every, raw, left_mask):
    """Propagate a chunk of frozen-Hamiltonian CSL trajectories (lambda = 1).

    CSL operators are diagonal, so one step multiplies the state pointwise by
    ``exp(dx dt sum_i (w_i G_i(x) - G_i(x)^2))``. ``kernel_rows`` is the
    ``(n_sites, n_points)`` matrix ``G`` and ``noise`` the
    ``(n_traj, n_steps, n_sites)`` block of standard normals.

    The state is renormalized every step; the discarded log norm^2 and the
    log likelihood ratio of the cooked proposal are accumulated separately.
    Returns ``(psi, records)`` with ``records[t, k] = (log_norm2, log_q,
    left_mass, dead)`` at every ``record_every``-th step.
    """
    n_traj, n_steps, _ = noise.shape
    G = np.asarray(kernel_rows, dtype=float)
    h = dx * dt
    diag_sq = h * np.einsum("ij,ij->j", G, G)
    sigma = math.sqrt(1.0 / h)
    left = np.asarray(left_mask, dtype=bool)
    psi = np.tile(np.asarray(psi0, dtype=complex), (n_traj, 1))
    psi /= np.sqrt(np.sum(np.abs(psi) ** 2, axis=1))[:, None]
    log_norm2 = np.zeros(n_traj)
    log_q = np.zeros(n_traj)
    dead = np.zeros(n_traj, dtype=bool)
    records = np.zeros((n_traj, n_steps // record_every, 4))
    for step in range(n_steps):
        xi = noise[:, step, :]
        if raw:
            w = sigma * xi
        else:
            mean_a = (np.abs(psi) ** 2) @ G.T
            w = 2.0 * mean_a + sigma * xi
            log_q += h * np.sum(2.0 * w * mean_a - 2.0 * mean_a * mean_a, axis=1)
        expo = h * (w @ G) - diag_sq
        shift = expo.max(axis=1)
        psi = psi * np.exp(expo - shift[:, None])
        n2 = np.sum(np.abs(psi) ** 2, axis=1)
        psi /= np.sqrt(n2)[:, None]
        log_norm2 += np.log(n2) + 2.0 * shift
        dead |= log_norm2 < _LOG_TINY
        if (step + 1) % record_every == 0:
            k = (step + 1) // record_every - 1
            records[:, k, 0] = log_norm2
            records[:, k, 1] = log_q
            records[:, k, 2] = np.sum(np.abs(psi[:, left]) ** 2, axis=1)
            records[:, k, 3] = dead
    return psi, records
