"""Optimization kernels: singular-value shrinkage, nuclear-norm fixed point
iteration, SCAD machinery, generalized lasso and group-SCAD regression."""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import _backend
from .errors import ConvergenceFailure, InvalidShape, SolverDiverged

__all__ = [
    "ThinSvd",
    "thin_svd",
    "singular_value_shrink",
    "nuclear_norm",
    "FpcResult",
    "fpc_nuclear",
    "mediator_loss_oracle",
    "scad_value",
    "scad_derivative",
    "difference_operator",
    "GenLassoProblem",
    "GenLassoResult",
    "solve_generalized_lasso",
    "solve_genlasso_gram",
    "genlasso_kkt_residual",
    "GroupScadResult",
    "group_scad_regression",
    "group_scad_gram",
    "loss_mediator",
    "loss_outcome",
    "stabilize_gram",
]

RIDGE = 1e-8


@dataclass(frozen=True)
class ThinSvd:
    u: np.ndarray
    d: np.ndarray
    v: np.ndarray

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.d) @ self.v.T


def thin_svd(w, k: Optional[int] = None) -> ThinSvd:
    """Top-``k`` singular triplets of ``w`` with a deterministic sign convention.

    Each right singular vector is flipped so that its largest-magnitude
    entry is positive (the left vector is flipped with it).
    """
    w = np.asarray(w, dtype=float)
    if w.ndim != 2:
        raise InvalidShape(f"thin_svd expects a matrix, got shape {w.shape}")
    kmax = min(w.shape)
    if k is None:
        k = kmax
    if not 0 <= k <= kmax:
        raise InvalidShape(f"k={k} outside [0, {kmax}]")
    try:
        u, d, vt = np.linalg.svd(w, full_matrices=False)
    except np.linalg.LinAlgError as exc:
        raise ConvergenceFailure(f"SVD did not converge: {exc}") from exc
    u, d, v = u[:, :k], d[:k], vt[:k].T
    if k:
        piv = np.argmax(np.abs(v), axis=0)
        sgn = np.sign(v[piv, np.arange(k)])
        sgn[sgn == 0] = 1.0
        u = u * sgn
        v = v * sgn
    return ThinSvd(u, d, v)


def singular_value_shrink(w, nu: float) -> np.ndarray:
    """Proximal operator of ``nu * ||.||_*``: soft-threshold the singular values."""
    if nu < 0:
        raise InvalidShape("nu must be nonnegative")
    svd = thin_svd(w)
    d = np.maximum(svd.d - nu, 0.0)
    keep = d > 0
    return (svd.u[:, keep] * d[keep]) @ svd.v[:, keep].T


def nuclear_norm(w) -> float:
    return float(np.linalg.svd(np.asarray(w, dtype=float), compute_uv=False).sum())


@dataclass
class FpcResult:
    iterate: np.ndarray
    objective: float
    iteration: int
    converged: bool
    losses: list = field(default_factory=list)
    objectives: list = field(default_factory=list)


def fpc_nuclear(
    grad: Callable[[np.ndarray], np.ndarray],
    lip: float,
    lambda_r: float,
    a0,
    tol: float = 1e-6,
    max_iter: int = 500,
    loss: Optional[Callable[[np.ndarray], float]] = None,
) -> FpcResult:
    """Fixed point continuation for ``loss(A) + lambda_r * ||A||_*``.

    Iterates ``A <- S_{tau*lambda_r}(A - tau*grad(A))`` with ``tau = 1/lip``.
    Stops once the absolute change in ``loss`` drops below ``tol`` (or, if
    no loss is supplied, the max-abs change of the iterate does). Reaching
    ``max_iter`` is reported through ``converged=False`` rather than raised.
    """
    if not lip > 0:
        raise InvalidShape("lip must be positive")
    if lambda_r < 0:
        raise InvalidShape("lambda_r must be nonnegative")
    tau = 1.0 / lip
    a = np.array(a0, dtype=float, copy=True)
    prev_loss = loss(a) if loss is not None else None
    losses, objectives = [], []
    if loss is not None:
        losses.append(prev_loss)
        objectives.append(prev_loss + lambda_r * nuclear_norm(a))
    converged = False
    it = 0
    for it in range(1, max_iter + 1):
        step = a - tau * grad(a)
        svd = thin_svd(step)
        d = np.maximum(svd.d - tau * lambda_r, 0.0)
        keep = d > 0
        new = (svd.u[:, keep] * d[keep]) @ svd.v[:, keep].T
        if not np.all(np.isfinite(new)):
            raise SolverDiverged("non-finite iterate in fixed point iteration")
        if loss is not None:
            cur = loss(new)
            losses.append(cur)
            objectives.append(cur + lambda_r * float(d.sum()))
            done = abs(cur - prev_loss) < tol
            prev_loss = cur
        else:
            done = float(np.max(np.abs(new - a), initial=0.0)) < tol
        a = new
        if done:
            converged = True
            break
    obj = objectives[-1] if objectives else float("nan")
    return FpcResult(a, obj, it, converged, losses, objectives)


def mediator_loss_oracle(m_flat, x_flat):
    """Loss, gradient and Lipschitz constant of ``sum ||M_it - alpha_it x_it||^2``.

    ``m_flat`` is (N, p), ``x_flat`` is (N,). The curvature is diagonal with
    entries ``2 x_it^2`` so the Lipschitz constant is ``2 max x^2``.
    """
    m_flat = np.asarray(m_flat, dtype=float)
    xw = np.asarray(x_flat, dtype=float)[:, None]
    x2 = xw * xw

    def loss(a):
        r = m_flat - a * xw
        return float(np.sum(r * r))

    def grad(a):
        return -2.0 * xw * (m_flat - a * xw)

    lip = 2.0 * float(np.max(x2))
    return loss, grad, lip


def _check_scad(a):
    if not a > 2:
        raise InvalidShape(f"SCAD shape a must exceed 2, got {a}")


def scad_value(x, lam, a: float = 3.7):
    """SCAD penalty evaluated at ``|x|``."""
    _check_scad(a)
    t = np.abs(np.asarray(x, dtype=float))
    lam = float(lam)
    mid = (2 * a * lam * t - t * t - lam * lam) / (2 * (a - 1))
    out = np.where(t <= lam, lam * t, np.where(t <= a * lam, mid, lam * lam * (a + 1) / 2))
    return out if out.ndim else float(out)


def scad_derivative(x, lam, a: float = 3.7):
    """Derivative of the SCAD penalty at ``|x|`` (right derivative at 0)."""
    _check_scad(a)
    t = np.abs(np.asarray(x, dtype=float))
    lam = float(lam)
    out = np.where(t <= lam, lam, np.maximum(a * lam - t, 0.0) / (a - 1))
    return out if out.ndim else float(out)


def difference_operator(T: int, r: int = 1) -> np.ndarray:
    """First-difference operator on ``vec(f_1', ..., f_T')``: shape ((T-1)r, Tr)."""
    if T < 1 or r < 1:
        raise InvalidShape("T and r must be positive")
    d1 = np.zeros((max(T - 1, 0), T))
    idx = np.arange(T - 1)
    d1[idx, idx] = -1.0
    d1[idx, idx + 1] = 1.0
    return np.kron(d1, np.eye(r))


def stabilize_gram(G):
    """Add a ``1e-8``-scaled ridge when ``G`` is numerically singular."""
    G = np.array(G, dtype=float, copy=True)
    d = G.shape[0]
    if d == 0:
        return G
    ev = np.linalg.eigvalsh(G)
    if ev[0] <= 1e-10 * max(ev[-1], 0.0) or ev[0] <= 0:
        scale = max(float(np.mean(np.diag(G))), 1.0)
        G[np.diag_indices(d)] += RIDGE * scale
    return G


@dataclass(frozen=True)
class GenLassoProblem:
    """``0.5||y - X beta||^2 + sum_e weights_e |D_e beta|``."""

    design: np.ndarray
    response: np.ndarray
    diff_op: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        X = np.atleast_2d(np.asarray(self.design, dtype=float))
        y = np.asarray(self.response, dtype=float).ravel()
        D = self.diff_op
        if hasattr(D, "toarray"):
            D = D.toarray()
        D = np.asarray(D, dtype=float).reshape(-1, X.shape[1])
        w = np.asarray(self.weights, dtype=float).ravel()
        if X.shape[0] != y.shape[0]:
            raise InvalidShape(f"design has {X.shape[0]} rows, response {y.shape[0]}")
        if w.shape[0] != D.shape[0]:
            raise InvalidShape(f"{w.shape[0]} weights for {D.shape[0]} penalty rows")
        if np.any(w < 0) or not np.all(np.isfinite(w)):
            raise InvalidShape("weights must be finite and nonnegative")
        object.__setattr__(self, "design", X)
        object.__setattr__(self, "response", y)
        object.__setattr__(self, "diff_op", D)
        object.__setattr__(self, "weights", w)


@dataclass
class GenLassoResult:
    beta: np.ndarray
    dual: np.ndarray
    kkt: float
    polished: bool
    sweeps: int


def _genlasso_polish(G, b, D, w, u):
    """Solve the equality-constrained QP implied by the dual's active pattern."""
    d = G.shape[0]
    interior = (w > 0) & (np.abs(u) < w * (1 - 1e-9))
    bound = ~interior
    s = np.sign(u)
    rhs = b - D[bound].T @ (w[bound] * s[bound])
    Df = D[interior]
    nf = Df.shape[0]
    K = np.zeros((d + nf, d + nf))
    K[:d, :d] = G
    K[:d, d:] = Df.T
    K[d:, :d] = Df
    sol, *_ = np.linalg.lstsq(K, np.concatenate([rhs, np.zeros(nf)]), rcond=None)
    beta = sol[:d]
    u_new = np.where(bound, w * s, 0.0)
    u_new[interior] = sol[d:]
    return beta, u_new, interior


def genlasso_kkt_residual(G, b, D, w, beta, tol=1e-9) -> float:
    """Stationarity residual ``min_u ||G beta - b + D'u||_inf`` over subgradients ``u``."""
    grad = G @ beta - b
    if D.shape[0] == 0:
        return float(np.max(np.abs(grad), initial=0.0))
    Db = D @ beta
    scale = max(1.0, float(np.max(np.abs(beta), initial=0.0)))
    nz = (np.abs(Db) > tol * scale) & (w > 0)
    free = (w == 0)
    u = np.zeros(D.shape[0])
    u[nz] = w[nz] * np.sign(Db[nz])
    rest = ~nz & ~free
    r0 = grad + D[nz].T @ u[nz]
    if rest.any():
        ur, *_ = np.linalg.lstsq(D[rest].T, -r0, rcond=None)
        u[rest] = np.clip(ur, -w[rest], w[rest])
    res = grad + D.T @ u
    # free rows carry no penalty, so D_e beta is unrestricted and u_e = 0
    return float(np.max(np.abs(res), initial=0.0))


def solve_genlasso_gram(G, b, D, w, tol=1e-6, max_sweeps=200000, kernels=None) -> GenLassoResult:
    """Generalized lasso in Gram form: ``0.5 b'Gb - b'beta + sum w_e |D_e beta|``.

    The dual box-constrained QP is solved by coordinate descent, the
    resulting active pattern is re-solved exactly, and the KKT residual of
    the returned point is checked against ``tol``.
    """
    k = kernels or _backend.kernels
    G = stabilize_gram(G)
    b = np.asarray(b, dtype=float)
    D = np.asarray(D, dtype=float).reshape(-1, G.shape[0])
    w = np.asarray(w, dtype=float)
    if D.shape[0] == 0 or not np.any(w > 0):
        beta = np.linalg.solve(G, b)
        return GenLassoResult(beta, np.zeros(D.shape[0]), 0.0, True, 0)
    L = np.linalg.cholesky(G)
    Ginv_Dt = np.linalg.solve(L.T, np.linalg.solve(L, D.T))
    Q = D @ Ginv_Dt
    c = Ginv_Dt.T @ b
    u = np.zeros(D.shape[0])
    scale = max(1.0, float(np.max(np.abs(c))))
    sweeps = k.box_qp_cd(Q, c, w, u, 1e-14 * scale, max_sweeps)
    beta_cd = np.linalg.solve(G, b - D.T @ u)
    if not np.all(np.isfinite(beta_cd)):
        raise SolverDiverged("generalized lasso dual iteration produced non-finite values")
    kkt_cd = genlasso_kkt_residual(G, b, D, w, beta_cd)
    beta_p, u_p, _ = _genlasso_polish(G, b, D, w, u)
    kkt_p = genlasso_kkt_residual(G, b, D, w, beta_p)
    if kkt_p <= kkt_cd:
        beta, u, kkt, polished = beta_p, u_p, kkt_p, True
    else:
        beta, kkt, polished = beta_cd, kkt_cd, False
    if kkt > tol * max(1.0, float(np.max(np.abs(b)))):
        raise SolverDiverged(f"generalized lasso KKT residual {kkt:.3e} exceeds tolerance")
    return GenLassoResult(beta, u, kkt, polished, int(sweeps))


def solve_generalized_lasso(prob: GenLassoProblem, tol: float = 1e-6, kernels=None) -> np.ndarray:
    """Minimize ``0.5||y - X beta||^2 + sum_e w_e |D_e beta|``; returns beta."""
    X, y = prob.design, prob.response
    return solve_genlasso_gram(X.T @ X, X.T @ y, prob.diff_op, prob.weights, tol, kernels=kernels).beta


@dataclass
class GroupScadResult:
    coef: np.ndarray
    objectives: list
    weights: np.ndarray
    kkt: float
    sweeps: int

    def group_norms(self, starts, sizes):
        return np.array([np.linalg.norm(self.coef[s:s + k]) for s, k in zip(starts, sizes)])


def _block_eigs(G, starts, sizes):
    nb = len(starts)
    kmax = int(max(sizes)) if nb else 1
    evals = np.ones((nb, kmax))
    evecs = np.zeros((nb, kmax, kmax))
    for j, (s, k) in enumerate(zip(starts, sizes)):
        lam, vec = np.linalg.eigh(G[s:s + k, s:s + k])
        evals[j, :k] = np.maximum(lam, 0.0)
        evecs[j, :k, :k] = vec
    return evals, evecs


def _group_objective(G, b, yy, beta, starts, sizes, penalized, lam, a):
    rss = float(beta @ G @ beta - 2 * b @ beta + yy)
    pen = 0.0
    for s, k, pz in zip(starts, sizes, penalized):
        if pz:
            pen += scad_value(np.linalg.norm(beta[s:s + k]), lam, a)
    return rss + pen


def _group_kkt(G, b, beta, starts, sizes, omegas):
    q = b - G @ beta
    worst = 0.0
    for s, k, om in zip(starts, sizes, omegas):
        bk = beta[s:s + k]
        nk = np.linalg.norm(bk)
        if nk == 0.0:
            worst = max(worst, np.linalg.norm(q[s:s + k]) - om)
        else:
            worst = max(worst, np.linalg.norm(q[s:s + k] - om * bk / nk))
    return float(max(worst, 0.0))


def _group_newton(G, b, starts, sizes, omegas, beta, active, max_iter=200, damp=frozenset()):
    """Damped Newton on the groups in ``active`` with all other groups held at zero.

    The objective is smooth there as long as no active group reaches the
    origin. A full step that carries a group through its origin drops that
    group, except for groups in ``damp`` (dropped before and then readmitted
    by their KKT condition), which move halfway to the origin instead.
    Returns ``(ok, drop)``: on failure ``drop`` is the position in
    ``active`` of the group to remove, and ``beta`` is left untouched.
    """
    idx = np.concatenate([np.arange(starts[j], starts[j] + sizes[j]) for j in active])
    Ga, ba = G[np.ix_(idx, idx)], b[idx]
    pos = np.cumsum([0] + [int(sizes[j]) for j in active])
    oms = [float(omegas[j]) for j in active]
    x = beta[idx].copy()
    scale = max(1.0, float(np.max(np.abs(ba))))

    om_vec = np.asarray(oms)
    seg = pos[:-1]

    def value(v):
        nrm = np.sqrt(np.add.reduceat(v * v, seg))
        if np.any(nrm[om_vec > 0] <= 1e-14 * scale):
            return None
        return float(0.5 * v @ Ga @ v - ba @ v + om_vec @ nrm)

    def parts(v):
        f = value(v)
        if f is None:
            return None
        grad = Ga @ v - ba
        H = Ga.copy()
        for j, om in enumerate(oms):
            if om == 0.0:
                continue
            sl = slice(pos[j], pos[j + 1])
            nv = float(np.linalg.norm(v[sl]))
            u = v[sl] / nv
            grad[sl] += om * u
            H[sl, sl] += (om / nv) * (np.eye(pos[j + 1] - pos[j]) - np.outer(u, u))
        return grad, H, f

    def smallest():
        pen = [j for j, om in enumerate(oms) if om > 0.0]
        if not pen:
            return None
        return min(pen, key=lambda j: np.linalg.norm(x[pos[j]:pos[j + 1]]))

    cur = parts(x)
    if cur is None:
        return False, smallest()
    collapses = [0] * len(oms)
    for _ in range(max_iter):
        grad, H, f = cur
        if float(np.max(np.abs(grad))) <= 1e-12 * scale:
            break
        try:
            step = -np.linalg.solve(H, grad)
        except np.linalg.LinAlgError:
            return False, smallest()
        full = x + step
        flips = [(float(x[pos[j]:pos[j + 1]] @ full[pos[j]:pos[j + 1]])
                  / float(x[pos[j]:pos[j + 1]] @ x[pos[j]:pos[j + 1]]), j)
                 for j, om in enumerate(oms) if om > 0.0]
        flip = min(flips, default=(1.0, None))
        t = 1.0
        if flip[0] <= 0.0:
            # the full step crosses the origin of a group: go halfway to it
            # instead, and give up on the group once it keeps collapsing
            j = flip[1]
            sl = slice(pos[j], pos[j + 1])
            collapses[j] += 1
            if int(active[j]) not in damp or collapses[j] > 40:
                return False, j
            t = 0.5 * float(x[sl] @ x[sl]) / -float(x[sl] @ step[sl])
        dec = float(grad @ step)
        while True:
            ft = value(x + t * step)
            if ft is not None and ft <= f + 1e-4 * t * dec + 1e-15 * abs(f):
                break
            t *= 0.5
            if t < 1e-8:
                return False, smallest()
        x = x + t * step
        cur = parts(x)
    else:
        return False, smallest()
    beta[idx] = x
    return True, None


def weighted_group_lasso(G, b, starts, sizes, omegas, evals, evecs, beta, tol=1e-12,
                         max_sweeps=100000, kernels=None):
    """Solve ``0.5 beta'G beta - b'beta + sum_k omega_k ||beta_k||`` in place.

    A few block coordinate descent sweeps guess the active set; an
    active-set loop then alternates a Newton solve on the active groups
    with dropping groups that collapse and re-adding zero groups whose KKT
    condition fails. Plain BCD with a growing budget is the fallback.
    Returns the number of BCD sweeps used.
    """
    k = kernels or _backend.kernels
    scale = max(1.0, float(np.max(np.abs(b), initial=0.0)))
    target = tol * scale * 1e3
    nb = len(starts)
    coarse, budget, total = 1e-6 * scale, 20, 0
    buf = np.empty(int(np.max(sizes)) if nb else 0)
    while total < max_sweeps:
        total += k.group_bcd(G, b, starts, sizes, omegas, evals, evecs, beta, coarse,
                             min(budget, max_sweeps - total))
        snapshot = beta.copy()
        norms = np.array([np.linalg.norm(beta[s:s + kk]) for s, kk in zip(starts, sizes)])
        act = set(np.flatnonzero((norms > 0) | (omegas == 0)).tolist())
        dropped, damp = set(), set()
        for _ in range(4 * nb + 10):
            active = np.array(sorted(act), dtype=np.intp)
            if active.size:
                ok, drop = _group_newton(G, b, starts, sizes, omegas, beta, active, damp=damp)
                if not ok:
                    if drop is None:
                        break
                    j = int(active[drop])
                    dropped.add(j)
                    act.discard(j)
                    beta[starts[j]:starts[j] + sizes[j]] = 0.0
                    continue
            q = b - G @ beta
            viol = [(np.linalg.norm(q[starts[j]:starts[j] + sizes[j]]) - omegas[j], j)
                    for j in range(nb) if j not in act]
            worst = max(viol, default=(-1.0, -1))
            if worst[0] <= target:
                if _group_kkt(G, b, beta, starts, sizes, omegas) <= target:
                    return total
                break
            j = worst[1]
            if j in dropped:
                damp.add(j)
            sl = slice(starts[j], starts[j] + sizes[j])
            out = buf[:sizes[j]]
            k.block_solve(q[sl] + G[sl, sl] @ beta[sl], evals[j], evecs[j], omegas[j], out)
            beta[sl] = out
            act.add(j)
        beta[:] = snapshot
        budget *= 2
        coarse *= 1e-2
    if _group_kkt(G, b, beta, starts, sizes, omegas) > 1e-6 * scale:
        raise SolverDiverged("weighted group lasso did not reach its KKT tolerance")
    return total


def group_scad_gram(
    G,
    b,
    yy: float,
    starts,
    sizes,
    penalized,
    lam: float,
    a: float = 3.7,
    tol: float = 1e-8,
    lla_rounds: int = 3,
    init=None,
    max_sweeps: int = 100000,
    kernels=None,
) -> GroupScadResult:
    """Group SCAD least squares in Gram form via local linear approximation.

    Objective: ``beta'G beta - 2 b'beta + yy + sum_{penalized k} p_lam(||beta_k||)``.
    Blocks are contiguous column ranges. Each LLA round solves a weighted
    group lasso by exact block coordinate descent.
    """
    _check_scad(a)
    k = kernels or _backend.kernels
    G = stabilize_gram(G)
    b = np.asarray(b, dtype=float)
    starts = np.asarray(starts, dtype=np.intp)
    sizes = np.asarray(sizes, dtype=np.intp)
    penalized = np.asarray(penalized, dtype=bool)
    evals, evecs = _block_eigs(G, starts, sizes)
    if init is None:
        beta = np.linalg.solve(G, b)
    else:
        beta = np.array(init, dtype=float, copy=True)
    objectives = [_group_objective(G, b, yy, beta, starts, sizes, penalized, lam, a)]
    omegas = np.zeros(len(starts))
    total = 0
    for _ in range(max(lla_rounds, 1)):
        norms = np.array([np.linalg.norm(beta[s:s + kk]) for s, kk in zip(starts, sizes)])
        w = np.where(penalized, scad_derivative(norms, lam, a), 0.0)
        omegas = 0.5 * w
        prev = beta.copy()
        total += weighted_group_lasso(G, b, starts, sizes, omegas, evals, evecs, beta,
                                      max_sweeps=max_sweeps, kernels=k)
        if not np.all(np.isfinite(beta)):
            raise SolverDiverged("group coordinate descent produced non-finite values")
        objectives.append(_group_objective(G, b, yy, beta, starts, sizes, penalized, lam, a))
        if lam == 0 or float(np.max(np.abs(beta - prev), initial=0.0)) <= tol:
            break
    kkt = _group_kkt(G, b, beta, starts, sizes, omegas)
    return GroupScadResult(beta, objectives, 2 * omegas, kkt, int(total))


def _blocks_from_groups(groups):
    groups = np.asarray(groups)
    order = np.argsort(groups, kind="stable")
    g_sorted = groups[order]
    uniq, first, counts = np.unique(g_sorted, return_index=True, return_counts=True)
    penalized = uniq >= 0
    return order, first, counts, penalized, uniq


def group_scad_regression(design, response, groups, lambda_b: float, scad_a: float = 3.7,
                          tol: float = 1e-8, lla_rounds: int = 3, kernels=None) -> GroupScadResult:
    """Least squares with SCAD on group norms: ``||y - X beta||^2 + sum_k p(||beta_k||)``.

    ``groups`` labels each column of ``design`` with a group id; negative
    ids mark unpenalized columns. Coefficients are returned in the
    original column order; unselected groups are exact zeros.
    """
    X = np.asarray(design, dtype=float)
    y = np.asarray(response, dtype=float).ravel()
    if X.shape[0] != y.shape[0]:
        raise InvalidShape(f"design has {X.shape[0]} rows, response {y.shape[0]}")
    order, starts, sizes, penalized, _ = _blocks_from_groups(groups)
    Xo = X[:, order]
    res = group_scad_gram(Xo.T @ Xo, Xo.T @ y, float(y @ y), starts, sizes, penalized,
                          lambda_b, scad_a, tol, lla_rounds, kernels=kernels)
    coef = np.empty_like(res.coef)
    coef[order] = res.coef
    res.coef = coef
    return res


def loss_mediator(alpha, panel) -> float:
    """``sum_it ||M_it - alpha_it x_it||^2``."""
    r = panel.m - np.asarray(alpha) * panel.x[:, :, None]
    return float(np.sum(r * r))


def loss_outcome(theta, beta, panel) -> float:
    """``sum_it (Y_it - theta_it x_it - beta_it' M_it)^2``."""
    fit = np.asarray(theta) * panel.x + np.einsum("itk,itk->it", np.asarray(beta), panel.m)
    r = panel.y - fit
    return float(np.sum(r * r))
