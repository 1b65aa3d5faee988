"""Pure-Python reference implementations of the compiled kernels.

Signatures and in-place semantics mirror ``_kernels.pyx`` exactly; the
backend selector in :mod:`idma._backend` picks one of the two at import.
"""

import math

import numpy as np


def box_qp_cd(Q, c, w, u, tol, max_iter):
    """Minimize 0.5 u'Qu - c'u subject to |u_e| <= w_e by cyclic coordinate descent.

    ``u`` is updated in place. Returns the number of sweeps performed; a
    return value equal to ``max_iter`` means the tolerance was not reached.
    """
    m = Q.shape[0]
    Qu = Q @ u
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
                Qu += Q[:, e] * d
                ad = abs(d)
                if ad > delta:
                    delta = ad
        if delta <= tol:
            return sweep
    return max_iter


def block_solve(g, evals, evecs, omega, out):
    """Minimize 0.5 b'Hb - g'b + omega*||b|| with H = evecs diag(evals) evecs'.

    Writes the minimizer into ``out`` (length len(g)).
    """
    k = g.shape[0]
    gn = math.sqrt(float(np.dot(g, g)))
    if omega > 0.0 and gn <= omega:
        out[:] = 0.0
        return
    gt = evecs[:k, :k].T @ g
    lam = evals[:k]
    if omega <= 0.0:
        out[:] = evecs[:k, :k] @ (gt / lam)
        return
    lo = omega * lam.min() / (gn - omega)
    hi = omega * lam.max() / (gn - omega)
    nu = lo
    if hi - lo > 1e-15 * hi:
        gt2 = gt * gt
        for _ in range(200):
            den = lam + nu
            s = math.sqrt(float(np.sum(gt2 / (den * den))))
            phi = nu * s - omega
            if abs(phi) <= 1e-15 * omega:
                break
            if phi < 0.0:
                lo = nu
            else:
                hi = nu
            ds = -float(np.sum(gt2 / (den * den * den))) / s
            dphi = s + nu * ds
            step = nu - phi / dphi if dphi > 0.0 else 0.5 * (lo + hi)
            if not (lo < step < hi):
                step = 0.5 * (lo + hi)
            if abs(step - nu) <= 1e-16 * max(nu, 1e-300):
                nu = step
                break
            nu = step
    out[:] = evecs[:k, :k] @ (gt / (lam + nu))


def group_bcd(G, b, starts, sizes, omegas, evals, evecs, beta, tol, max_iter):
    """Block coordinate descent for 0.5 beta'G beta - b'beta + sum_k omega_k ||beta_k||.

    Blocks are contiguous column ranges ``starts[k]:starts[k]+sizes[k]``.
    ``evals``/``evecs`` hold the eigendecomposition of each diagonal block
    (padded to the largest block size). ``beta`` is updated in place.
    Returns the number of sweeps.
    """
    nb = starts.shape[0]
    q = b - G @ beta
    kmax = int(sizes.max()) if nb else 0
    buf = np.empty(kmax)
    for sweep in range(1, max_iter + 1):
        delta = 0.0
        for j in range(nb):
            s0 = starts[j]
            k = sizes[j]
            sl = slice(s0, s0 + k)
            old = beta[sl].copy()
            g = q[sl] + G[sl, sl] @ old
            out = buf[:k]
            block_solve(g, evals[j], evecs[j], omegas[j], out)
            d = out - old
            ad = float(np.max(np.abs(d)))
            if ad > 0.0:
                beta[sl] = out
                q -= G[:, sl] @ d
                if ad > delta:
                    delta = ad
        if delta <= tol:
            return sweep
    return max_iter
