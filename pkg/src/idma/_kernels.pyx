# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled hot loops: dual box-QP coordinate descent for the generalized
lasso and exact block coordinate descent for the weighted group lasso.

Semantics match ``_kernels_py`` line for line; see that module for the
reference versions.
"""

from libc.math cimport fabs, sqrt

import numpy as np


def box_qp_cd(double[:, :] Q, double[:] c, double[:] w, double[:] u, double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t m = Q.shape[0]
    cdef Py_ssize_t sweep, e, i
    cdef double qee, old, new, d, delta, ad
    cdef double[:] Qu = np.asarray(Q) @ np.asarray(u)
    for sweep in range(1, max_iter + 1):
        delta = 0.0
        for e in range(m):
            qee = Q[e, e]
            if qee <= 0.0:
                continue
            old = u[e]
            new = old + (c[e] - Qu[e]) / qee
            if new > w[e]:
                new = w[e]
            elif new < -w[e]:
                new = -w[e]
            d = new - old
            if d != 0.0:
                u[e] = new
                for i in range(m):
                    Qu[i] += Q[i, e] * d
                ad = fabs(d)
                if ad > delta:
                    delta = ad
        if delta <= tol:
            return sweep
    return max_iter


cdef void _block_solve(double[:] g, double[:] lam, double[:, :] vec, double omega,
                       double[:] out, double[:] gt) noexcept nogil:
    cdef Py_ssize_t k = g.shape[0]
    cdef Py_ssize_t i, j, it
    cdef double gn = 0.0, lo, hi, nu, s, s3, den, phi, dphi, step, lmin, lmax, acc
    for i in range(k):
        gn += g[i] * g[i]
    gn = sqrt(gn)
    if omega > 0.0 and gn <= omega:
        for i in range(k):
            out[i] = 0.0
        return
    for j in range(k):
        acc = 0.0
        for i in range(k):
            acc += vec[i, j] * g[i]
        gt[j] = acc
    nu = 0.0
    if omega > 0.0:
        lmin = lam[0]
        lmax = lam[0]
        for j in range(1, k):
            if lam[j] < lmin:
                lmin = lam[j]
            if lam[j] > lmax:
                lmax = lam[j]
        lo = omega * lmin / (gn - omega)
        hi = omega * lmax / (gn - omega)
        nu = lo
        if hi - lo > 1e-15 * hi:
            for it in range(200):
                s = 0.0
                s3 = 0.0
                for j in range(k):
                    den = lam[j] + nu
                    s += gt[j] * gt[j] / (den * den)
                    s3 += gt[j] * gt[j] / (den * den * den)
                s = sqrt(s)
                phi = nu * s - omega
                if fabs(phi) <= 1e-15 * omega:
                    break
                if phi < 0.0:
                    lo = nu
                else:
                    hi = nu
                dphi = s - nu * s3 / s
                step = nu - phi / dphi if dphi > 0.0 else 0.5 * (lo + hi)
                if not (lo < step < hi):
                    step = 0.5 * (lo + hi)
                if fabs(step - nu) <= 1e-16 * (nu if nu > 1e-300 else 1e-300):
                    nu = step
                    break
                nu = step
    for i in range(k):
        acc = 0.0
        for j in range(k):
            acc += vec[i, j] * gt[j] / (lam[j] + nu)
        out[i] = acc


def block_solve(double[:] g, double[:] evals, double[:, :] evecs, double omega, double[:] out):
    cdef Py_ssize_t k = g.shape[0]
    cdef double[:] gt = np.empty(k)
    _block_solve(g, evals[:k], evecs[:k, :k], omega, out[:k], gt)


def group_bcd(double[:, :] G, double[:] b, Py_ssize_t[:] starts, Py_ssize_t[:] sizes,
              double[:] omegas, double[:, :] evals, double[:, :, :] evecs, double[:] beta,
              double tol, Py_ssize_t max_iter):
    cdef Py_ssize_t nb = starts.shape[0]
    cdef Py_ssize_t d = G.shape[0]
    cdef Py_ssize_t kmax = 0, j, i, l, s0, k, sweep
    cdef double delta, ad, acc
    cdef Py_ssize_t done = max_iter
    for j in range(nb):
        if sizes[j] > kmax:
            kmax = sizes[j]
    cdef double[:] q = np.asarray(b) - np.asarray(G) @ np.asarray(beta)
    cdef double[:] g = np.empty(kmax)
    cdef double[:] out = np.empty(kmax)
    cdef double[:] dl = np.empty(kmax)
    cdef double[:] gt = np.empty(kmax)
    with nogil:
        for sweep in range(1, max_iter + 1):
            delta = 0.0
            for j in range(nb):
                s0 = starts[j]
                k = sizes[j]
                for i in range(k):
                    acc = q[s0 + i]
                    for l in range(k):
                        acc = acc + G[s0 + i, s0 + l] * beta[s0 + l]
                    g[i] = acc
                _block_solve(g[:k], evals[j, :k], evecs[j, :k, :k], omegas[j], out[:k], gt[:k])
                ad = 0.0
                for i in range(k):
                    dl[i] = out[i] - beta[s0 + i]
                    if fabs(dl[i]) > ad:
                        ad = fabs(dl[i])
                if ad > 0.0:
                    for i in range(k):
                        beta[s0 + i] = out[i]
                    for l in range(d):
                        acc = 0.0
                        for i in range(k):
                            acc = acc + G[l, s0 + i] * dl[i]
                        q[l] -= acc
                    if ad > delta:
                        delta = ad
            if delta <= tol:
                done = sweep
                break
    return done
