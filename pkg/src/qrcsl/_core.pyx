# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled versions of the hot loops; see ``_core_py`` for the contract."""
import numpy as np

cimport numpy as cnp
from libc.math cimport exp, log, sqrt, M_PI
from scipy.special.cython_special cimport k1e
from scipy.linalg.cython_blas cimport dgemv

cnp.import_array()

cdef double _SMEAR_NORM = 1.0 / ((4.0 * M_PI) * (4.0 * M_PI))
cdef double _LOG_TINY = log(1e-300)


def smear_integrand(z, separations, double mu, double beta):
    cdef double[:, ::1] zv = np.ascontiguousarray(z, dtype=np.float64)
    cdef double[::1] seps = np.ascontiguousarray(separations, dtype=np.float64).ravel()
    cdef Py_ssize_t m = zv.shape[0], nd = seps.shape[0], i, j
    out = np.empty((m, nd))
    cdef double[:, ::1] ov = out
    cdef double norm, cos1, s, radial, d
    for i in range(m):
        norm = sqrt(zv[i, 0] * zv[i, 0] + zv[i, 1] * zv[i, 1]
                    + zv[i, 2] * zv[i, 2] + zv[i, 3] * zv[i, 3])
        cos1 = zv[i, 0] / norm
        s = 0.5 * beta * (zv[i, 4] * zv[i, 4] + zv[i, 5] * zv[i, 5]
                          + zv[i, 6] * zv[i, 6] + zv[i, 7] * zv[i, 7])
        radial = mu * mu * k1e(mu * s) * s * beta * beta * exp(s / beta - mu * s - s * s / 4.0)
        for j in range(nd):
            d = seps[j]
            ov[i, j] = radial * exp((2.0 * d * s * cos1 - d * d) / 4.0) * _SMEAR_NORM
    return out


def csl_trajectory_chunk(psi0, kernel_rows, double dx, double dt, noise,
                         Py_ssize_t record_every, bint raw, left_mask):
    cdef double[:, ::1] G = np.ascontiguousarray(kernel_rows, dtype=np.float64)
    cdef double[:, :, ::1] xi = np.ascontiguousarray(noise, dtype=np.float64)
    cdef cnp.uint8_t[::1] left = np.ascontiguousarray(left_mask, dtype=np.uint8)
    cdef double complex[::1] start = np.ascontiguousarray(psi0, dtype=np.complex128)
    cdef Py_ssize_t n_traj = xi.shape[0], n_steps = xi.shape[1]
    cdef Py_ssize_t n_sites = G.shape[0], n_pts = G.shape[1]
    cdef Py_ssize_t n_rec = n_steps // record_every
    cdef double h = dx * dt
    cdef double sigma = sqrt(1.0 / h)
    psi_out = np.empty((n_traj, n_pts), dtype=np.complex128)
    records_out = np.zeros((n_traj, n_rec, 4))
    cdef double complex[:, ::1] psi = psi_out
    cdef double[:, :, ::1] rec = records_out
    cdef double[::1] diag_sq = np.zeros(n_pts)
    cdef double[::1] prob = np.empty(n_pts)
    cdef double[::1] w = np.empty(n_sites)
    cdef double[::1] expo = np.empty(n_pts)
    cdef Py_ssize_t t, step, i, j, k
    cdef double acc, mean_a, log_norm2, log_q, shift, n2, scale, lm, start_n2, start_scale
    cdef bint dead
    # G is C-ordered (n_sites, n_pts), i.e. column-major (n_pts, n_sites) for BLAS
    cdef int bm = <int>n_pts, bn = <int>n_sites, one = 1
    cdef double alpha = 1.0, beta0 = 0.0
    cdef char trans_t = b'T', trans_n = b'N'
    cdef double[::1] mean = np.empty(n_sites)
    cdef double[::1] proj = np.empty(n_pts)

    for j in range(n_pts):
        acc = 0.0
        for i in range(n_sites):
            acc += G[i, j] * G[i, j]
        diag_sq[j] = h * acc
    start_n2 = 0.0
    for j in range(n_pts):
        start_n2 += start[j].real * start[j].real + start[j].imag * start[j].imag
    start_scale = 1.0 / sqrt(start_n2)

    for t in range(n_traj):
        for j in range(n_pts):
            psi[t, j] = start[j] * start_scale
        log_norm2 = 0.0
        log_q = 0.0
        dead = False
        for step in range(n_steps):
            if raw:
                for i in range(n_sites):
                    w[i] = sigma * xi[t, step, i]
            else:
                for j in range(n_pts):
                    prob[j] = psi[t, j].real * psi[t, j].real + psi[t, j].imag * psi[t, j].imag
                dgemv(&trans_t, &bm, &bn, &alpha, &G[0, 0], &bm, &prob[0], &one, &beta0, &mean[0], &one)
                for i in range(n_sites):
                    mean_a = mean[i]
                    w[i] = 2.0 * mean_a + sigma * xi[t, step, i]
                    log_q += h * (2.0 * w[i] * mean_a - 2.0 * mean_a * mean_a)
            dgemv(&trans_n, &bm, &bn, &alpha, &G[0, 0], &bm, &w[0], &one, &beta0, &proj[0], &one)
            shift = -1e308
            for j in range(n_pts):
                expo[j] = h * proj[j] - diag_sq[j]
                if expo[j] > shift:
                    shift = expo[j]
            n2 = 0.0
            for j in range(n_pts):
                psi[t, j] = psi[t, j] * exp(expo[j] - shift)
                n2 += psi[t, j].real * psi[t, j].real + psi[t, j].imag * psi[t, j].imag
            scale = 1.0 / sqrt(n2)
            for j in range(n_pts):
                psi[t, j] = psi[t, j] * scale
            log_norm2 += log(n2) + 2.0 * shift
            if log_norm2 < _LOG_TINY:
                dead = True
            if (step + 1) % record_every == 0:
                k = (step + 1) // record_every - 1
                lm = 0.0
                for j in range(n_pts):
                    if left[j]:
                        lm += psi[t, j].real * psi[t, j].real + psi[t, j].imag * psi[t, j].imag
                rec[t, k, 0] = log_norm2
                rec[t, k, 1] = log_q
                rec[t, k, 2] = lm
                rec[t, k, 3] = 1.0 if dead else 0.0
    return psi_out, records_out
