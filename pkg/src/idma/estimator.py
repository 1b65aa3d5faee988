"""Estimation pipeline: low-rank initialization, fused factor updates,
loading refits, sparse outcome model and mediation-effect assembly."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import numerics as nm
from .errors import IdmaError, RankTooLarge, SingularDesign, StageError
from .model import CoefficientField, FactorModel, Hyperparams, PanelData, validate_panel

__all__ = [
    "IdmaFit",
    "InitResult",
    "SplitPlan",
    "make_split",
    "init_factorization",
    "unpenalized_factors",
    "update_factors_fused",
    "update_loadings",
    "outcome_gram",
    "fit_outcome",
    "threshold_b",
    "kmeans_subgroup_factors",
    "count_distinct_rows",
    "fit_idma",
    "mediation_effects",
]

DISTINCT_TOL = 1e-6


@dataclass
class InitResult:
    factors: np.ndarray  # (n, T, r), U_r D_r reshaped
    loading_a: np.ndarray  # (p, r), V_r
    singular_values: np.ndarray  # full spectrum of the nuclear-norm solution
    lambda_r: float
    converged: bool
    iterations: int
    objectives: list = field(default_factory=list)


@dataclass
class IdmaFit:
    factor_model: FactorModel
    coefficients: CoefficientField
    selected: np.ndarray
    losses: tuple
    singular_values: np.ndarray
    distinct_factor_rows: np.ndarray
    converged: dict
    lambda_r: float = float("nan")
    lambda_b: float = float("nan")
    lambda_f: float = 0.0
    c_f: int = 0
    rank: int = 0
    labels: Optional[np.ndarray] = None
    cv_curve: Optional[list] = None
    halves: Optional[list] = None
    penalty_slack: float = 0.0

    @property
    def df_f(self) -> int:
        F = self.factor_model.factors
        return count_distinct_rows(F.reshape(-1, F.shape[2]))

    @property
    def df_b(self) -> int:
        return int(self.selected.size)


@dataclass(frozen=True)
class SplitPlan:
    held_out: int
    part_a: np.ndarray
    part_b: np.ndarray


def make_split(n: int, rng, held_out: Optional[int] = None) -> SplitPlan:
    """Random split of the individuals other than ``held_out``; part A gets ceil(n/2).

    With ``held_out=None`` all ``n`` individuals are split.
    """
    pool = np.arange(n) if held_out is None else np.delete(np.arange(n), held_out)
    perm = rng.permutation(pool)
    na = min(math.ceil(n / 2), len(pool) - 1)
    a, b = np.sort(perm[:na]), np.sort(perm[na:])
    return SplitPlan(-1 if held_out is None else int(held_out), a, b)


def count_distinct_rows(mat, tol: float = DISTINCT_TOL) -> int:
    """Number of rows that differ (max-abs) by more than ``tol`` from all earlier representatives."""
    mat = np.asarray(mat, dtype=float)
    if mat.shape[0] == 0:
        return 0
    reps = [mat[0]]
    for row in mat[1:]:
        R = np.asarray(reps)
        if np.min(np.max(np.abs(R - row), axis=1)) > tol:
            reps.append(row)
    return len(reps)


def init_factorization(panel: PanelData, lambda_r: float, rank: int,
                       tol: float = 1e-6, max_iter: int = 500) -> InitResult:
    """Nuclear-norm initial estimate of the mediator coefficient matrix, split as F = U D, A = V."""
    N, p = panel.n * panel.T, panel.p
    if not 1 <= rank <= min(N, p):
        raise RankTooLarge(f"rank {rank} must lie in [1, {min(N, p)}]")
    _, m, x = panel.flat()
    loss, grad, lip = nm.mediator_loss_oracle(m, x)
    a0 = m / x[:, None]
    res = nm.fpc_nuclear(grad, lip, lambda_r, a0, tol=tol, max_iter=max_iter, loss=loss)
    svd = nm.thin_svd(res.iterate)
    F = svd.u[:, :rank] * svd.d[:rank]
    A = svd.v[:, :rank]
    return InitResult(F.reshape(panel.n, panel.T, rank), A, svd.d.copy(), float(lambda_r),
                      res.converged, res.iteration, res.objectives)


def unpenalized_factors(loading_a, m_i, x_i):
    """Per-time least squares ``argmin_f ||M_t - A f x_t||^2`` for every row of ``m_i``."""
    A = np.asarray(loading_a, dtype=float)
    G = nm.stabilize_gram(A.T @ A)
    coef = np.linalg.solve(G, A.T @ np.asarray(m_i).T).T  # (T, r)
    x_i = np.asarray(x_i, dtype=float)
    safe = np.where(x_i == 0, 1.0, x_i)
    return np.where((x_i == 0)[:, None], 0.0, coef / safe[:, None])


def _factor_gram(loading_a, m_rows, x_rows):
    """Gram blocks of the stacked per-time design ``A x_t`` for one or more individuals.

    ``m_rows`` is (k, T, p) and ``x_rows`` (k, T); contributions are summed over k.
    """
    A = np.asarray(loading_a, dtype=float)
    r = A.shape[1]
    AtA = A.T @ A
    x2 = np.sum(x_rows * x_rows, axis=0)  # (T,)
    T = x2.shape[0]
    G = np.zeros((T * r, T * r))
    for t in range(T):
        G[t * r:(t + 1) * r, t * r:(t + 1) * r] = x2[t] * AtA
    b = np.einsum("kt,ktp,pr->tr", x_rows, m_rows, A).reshape(T * r)
    return G, b


def _fused_solve(G, b, T, r, lambda_f, scad_a, lla_rounds, init, tol):
    D = nm.difference_operator(T, r)
    f = np.asarray(init, dtype=float).reshape(T * r)
    if T == 1 or lambda_f == 0:
        return np.linalg.solve(nm.stabilize_gram(G), b).reshape(T, r)
    for _ in range(max(lla_rounds, 1)):
        w = 0.5 * nm.scad_derivative(D @ f, lambda_f, scad_a)
        new = nm.solve_genlasso_gram(G, b, D, w, tol=tol).beta
        done = np.max(np.abs(new - f)) <= 1e-12 * max(1.0, np.max(np.abs(new)))
        f = new
        if done:
            break
    return f.reshape(T, r)


def update_factors_fused(loading_a, m_i, x_i, lambda_f: float, scad_a: float = 3.7,
                         lla_rounds: int = 3, tol: float = 1e-6):
    """Factor path for one individual under a fused SCAD penalty on adjacent differences.

    Minimizes ``sum_t ||M_t - A f_t x_t||^2 + sum_{t>1} sum_j p_SCAD(f_tj - f_{t-1,j})``
    by local linear approximation started at the per-time least-squares fit.
    ``m_i`` is (T, p), ``x_i`` is (T,). Returns (T, r).
    """
    m_i = np.asarray(m_i, dtype=float)
    x_i = np.asarray(x_i, dtype=float)
    T, r = m_i.shape[0], np.asarray(loading_a).shape[1]
    G, b = _factor_gram(loading_a, m_i[None], x_i[None])
    f0 = unpenalized_factors(loading_a, m_i, x_i)
    return _fused_solve(G, b, T, r, lambda_f, scad_a, lla_rounds, f0, tol)


def _pooled_fused(loading_a, m_rows, x_rows, lambda_f, scad_a, lla_rounds, tol):
    # Shared path for a subgroup: the sum of the members' individual objectives,
    # so the fusion penalty counts once per member. Averaging the Gram
    # statistics instead keeps the same minimizer.
    T, r = m_rows.shape[1], np.asarray(loading_a).shape[1]
    G, b = _factor_gram(loading_a, m_rows, x_rows)
    G, b = G / len(m_rows), b / len(m_rows)
    f0 = np.linalg.solve(nm.stabilize_gram(G), b)
    return _fused_solve(G, b, T, r, lambda_f, scad_a, lla_rounds, f0, tol)


def update_loadings(factors, panel: PanelData):
    """Least-squares loadings: row k solves ``min_a sum_it (m_itk - x_it f_it'a)^2``."""
    F = np.asarray(factors, dtype=float).reshape(-1, np.shape(factors)[-1])
    _, m, x = panel.flat()
    Z = F * x[:, None]
    G = Z.T @ Z
    try:
        A = np.linalg.solve(nm.stabilize_gram(G), Z.T @ m).T
    except np.linalg.LinAlgError as exc:
        raise SingularDesign(f"loading normal equations are singular: {exc}") from exc
    if not np.all(np.isfinite(A)):
        raise SingularDesign("loading normal equations produced non-finite values")
    return A


def outcome_design(factors, panel: PanelData):
    """Rows ``kron([x_it, m_it], f_it)``: block 0 is the exposure, block k the k-th mediator."""
    F = np.asarray(factors, dtype=float).reshape(-1, np.shape(factors)[-1])
    y, m, x = panel.flat()
    W = np.column_stack([x, m])
    Z = (W[:, :, None] * F[:, None, :]).reshape(F.shape[0], -1)
    return Z, y


def outcome_gram(factors, panel: PanelData):
    """Per-individual sufficient statistics (G_i, b_i, yy_i) of the outcome design."""
    Z, y = outcome_design(factors, panel)
    n, T = panel.n, panel.T
    Zi = Z.reshape(n, T, -1)
    yi = y.reshape(n, T)
    G = np.einsum("itj,itk->ijk", Zi, Zi)
    b = np.einsum("itj,it->ij", Zi, yi)
    yy = np.einsum("it,it->i", yi, yi)
    return G, b, yy


def _outcome_blocks(p, r):
    starts = np.arange(p + 1) * r
    sizes = np.full(p + 1, r)
    penalized = np.ones(p + 1, dtype=bool)
    penalized[0] = False
    return starts, sizes, penalized


def fit_outcome_gram(G, b, yy, p, r, lambda_b, scad_a=3.7, lla_rounds=3, tol=1e-8):
    starts, sizes, penalized = _outcome_blocks(p, r)
    res = nm.group_scad_gram(G, b, yy, starts, sizes, penalized, lambda_b, scad_a,
                             tol=tol, lla_rounds=lla_rounds)
    coef = res.coef
    return coef[r:].reshape(p, r), coef[:r].copy(), res


def fit_outcome(factors, panel: PanelData, lambda_b: float, scad_a: float = 3.7,
                lla_rounds: int = 3, tol: float = 1e-8):
    """Sparse outcome model: returns ``(loading_b, loading_c, solver_result)``.

    Group k collects ``m_itk * f_it``; its coefficient ``b_k`` carries a SCAD
    penalty on its Euclidean norm. The exposure block ``c`` is unpenalized.
    """
    Z, y = outcome_design(factors, panel)
    r = np.shape(factors)[-1]
    return fit_outcome_gram(Z.T @ Z, Z.T @ y, float(y @ y), panel.p, r, lambda_b,
                            scad_a, lla_rounds, tol)


def threshold_b(loading_b, scale: str = "se"):
    """Zero rows whose norm falls strictly below ``mean + 0.5 * spread`` of all row norms.

    ``scale='se'`` uses the standard error of the mean (sd / sqrt(p));
    ``scale='sd'`` uses the sample standard deviation.
    """
    B = np.array(loading_b, dtype=float, copy=True)
    norms = np.linalg.norm(B, axis=1)
    p = norms.size
    sd = float(np.std(norms, ddof=1)) if p > 1 else 0.0
    spread = sd / math.sqrt(p) if scale == "se" else sd
    cut = float(np.mean(norms)) + 0.5 * spread
    B[norms < cut] = 0.0
    return B


def _kmeans_once(X, k, rng, max_iter=300):
    n = X.shape[0]
    centers = np.empty((k, X.shape[1]))
    centers[0] = X[rng.integers(n)]
    d2 = np.sum((X - centers[0]) ** 2, axis=1)
    for j in range(1, k):
        tot = d2.sum()
        idx = rng.choice(n, p=d2 / tot) if tot > 0 else rng.integers(n)
        centers[j] = X[idx]
        d2 = np.minimum(d2, np.sum((X - centers[j]) ** 2, axis=1))
    labels = np.full(n, -1)
    for _ in range(max_iter):
        dist = np.sum((X[:, None, :] - centers[None]) ** 2, axis=2)
        new = np.argmin(dist, axis=1)
        counts = np.bincount(new, minlength=k)
        for j in np.flatnonzero(counts == 0):
            # reseed an empty cluster at the point farthest from its center
            far = int(np.argmax(dist[np.arange(n), new]))
            new[far] = j
            dist[far] = 0.0
        if np.array_equal(new, labels):
            break
        labels = new
        for j in range(k):
            centers[j] = X[labels == j].mean(axis=0)
    sse = float(np.sum((X - centers[labels]) ** 2))
    return labels, sse


def kmeans_subgroup_factors(factors, c_f: int, seed=0, restarts: int = 10):
    """Cluster vectorized factor trajectories into ``c_f`` groups (labels 0..c_f-1).

    Lloyd iterations from k-means++ seeds; the best of ``restarts`` runs is
    kept and labels are renumbered in order of first appearance.
    """
    F = np.asarray(factors, dtype=float)
    n = F.shape[0]
    if not 1 <= c_f <= n:
        raise ValueError(f"c_f must lie in [1, {n}], got {c_f}")
    X = F.reshape(n, -1)
    if c_f == 1:
        return np.zeros(n, dtype=int)
    if c_f == n:
        return np.arange(n)
    rng = np.random.default_rng(seed)
    best, best_sse = None, np.inf
    for _ in range(restarts):
        labels, sse = _kmeans_once(X, c_f, rng)
        if sse < best_sse - 1e-12:
            best, best_sse = labels, sse
    _, first = np.unique(best, return_index=True)
    remap = np.empty(c_f, dtype=int)
    remap[best[np.sort(first)]] = np.arange(c_f)
    return remap[best]


def mediation_effects(fit) -> CoefficientField:
    """Mediation effects ``gamma_itk = alpha_itk * beta_itk`` from a fit or factor model."""
    if isinstance(fit, IdmaFit):
        c = fit.coefficients
        return CoefficientField.from_parts(c.alpha, c.beta, c.theta)
    return fit.coefficients()


def _stage(name, fn, *args, **kw):
    try:
        return fn(*args, **kw)
    except StageError:
        raise
    except (IdmaError, np.linalg.LinAlgError, ValueError) as exc:
        raise StageError(name, exc) from exc


def _resolve_rank(panel, hyper):
    if hyper.rank != "auto":
        return int(hyper.rank)
    from .tuning import estimate_rank

    _, m, x = panel.flat()
    sv = np.linalg.svd(m / x[:, None], compute_uv=False)
    max_rank = max(1, min(8, len(sv) - 1))
    return estimate_rank(sv, max_rank)


def _resolve_lambda_r(panel, hyper, rank):
    if hyper.lambda_r is not None:
        return float(hyper.lambda_r)
    from .tuning import estimate_noise_variance, select_lambda_r

    sigma2 = estimate_noise_variance(panel, rank=rank)
    return select_lambda_r(panel, sigma2, draws=200, seed=hyper.seed)


def _factor_paths(panel, loading_a, hyper, fit_idx=None):
    """Step 3 for every individual, optionally followed by subgroup pooling."""
    n, T = panel.n, panel.T
    r = loading_a.shape[1]
    F = np.empty((n, T, r))
    for i in range(n):
        F[i] = update_factors_fused(loading_a, panel.m[i], panel.x[i], hyper.lambda_f,
                                    hyper.scad_a, hyper.lla_rounds)
    labels = None
    if hyper.c_f:
        labels = kmeans_subgroup_factors(F, min(hyper.c_f, n), seed=hyper.seed)
        for g in np.unique(labels):
            members = np.flatnonzero(labels == g)
            path = _pooled_fused(loading_a, panel.m[members], panel.x[members], hyper.lambda_f,
                                 hyper.scad_a, hyper.lla_rounds, 1e-6)
            F[members] = path
    return F, labels


def _penalty_slack(F, lambda_f, a):
    if lambda_f == 0 or F.shape[1] < 2:
        return 0.0
    return float(np.sum(nm.scad_value(np.diff(F, axis=1), lambda_f, a)))


def _select_lambda_b(F, panel, hyper):
    if hyper.lambda_b is not None:
        return float(hyper.lambda_b), None
    from .tuning import select_lambda_b_cv

    lam, curve = select_lambda_b_cv(F, panel, hyper.lambda_b_grid, folds=hyper.folds,
                                    seed=hyper.seed, scad_a=hyper.scad_a,
                                    lla_rounds=hyper.lla_rounds)
    return lam, curve


def _fit_half(panel, init, hyper, eval_idx=None):
    """Steps 3-5 given an initial loading matrix; loadings are refit on ``eval_idx``."""
    loading = init.loading_a
    labels = None
    for _ in range(max(hyper.max_rounds, 1)):
        F, labels = _stage("factors", _factor_paths, panel, loading, hyper)
        sub = panel if eval_idx is None else panel.subset(eval_idx)
        Fs = F if eval_idx is None else F[eval_idx]
        loading = _stage("loadings", update_loadings, Fs, sub)
    lam_b, curve = _stage("lambda_b", _select_lambda_b, Fs, sub, hyper)
    B, c, res = _stage("outcome", fit_outcome, Fs, sub, lam_b, hyper.scad_a, hyper.lla_rounds)
    if hyper.threshold and panel.p >= 2:
        B = threshold_b(B)
    return F, loading, B, c, labels, lam_b, curve, res


def _build_init(panel, hyper, rank, lambda_r):
    return _stage("init", init_factorization, panel, lambda_r, rank, hyper.tol, hyper.max_iter)


def fit_idma(panel: PanelData, hyper: Hyperparams = Hyperparams(), init: Optional[InitResult] = None) -> IdmaFit:
    """Estimate individualized dynamic mediation coefficients.

    Full-sample mode (default) runs the low-rank initialization, one round
    of fused factor and loading updates, and the sparse outcome fit on all
    individuals. ``hyper.crossfit`` instead averages two half-sample fits
    with the roles of the halves exchanged. A precomputed ``init`` (from
    :func:`init_factorization`) may be passed to share work across tuning
    candidates in full-sample mode.
    """
    validate_panel(panel)
    if hyper.crossfit:
        return _fit_crossfit(panel, hyper)
    if init is None:
        rank = _stage("rank", _resolve_rank, panel, hyper)
        lambda_r = _stage("lambda_r", _resolve_lambda_r, panel, hyper, rank)
        init = _build_init(panel, hyper, rank, lambda_r)
    rank = init.factors.shape[2]
    F, A, B, c, labels, lam_b, curve, _ = _fit_half(panel, init, hyper)
    fm = FactorModel(F, A, B, c)
    coef = fm.coefficients()
    lM = nm.loss_mediator(coef.alpha, panel)
    lY = nm.loss_outcome(coef.theta, coef.beta, panel)
    distinct = np.array([count_distinct_rows(F[i]) for i in range(panel.n)])
    return IdmaFit(
        factor_model=fm,
        coefficients=coef,
        selected=np.flatnonzero(np.any(B != 0, axis=1)),
        losses=(lM, lY),
        singular_values=init.singular_values,
        distinct_factor_rows=distinct,
        converged={"init": init.converged},
        lambda_r=init.lambda_r,
        lambda_b=lam_b,
        lambda_f=hyper.lambda_f,
        c_f=int(hyper.c_f or 0),
        rank=rank,
        labels=labels,
        cv_curve=curve,
        penalty_slack=_penalty_slack(F, hyper.lambda_f, hyper.scad_a),
    )


def _fit_crossfit(panel, hyper):
    rng = np.random.default_rng([hyper.seed, 0x5EED])
    plan = make_split(panel.n, rng)
    rank = _stage("rank", _resolve_rank, panel, hyper)
    halves = []
    for fit_idx, eval_idx in ((plan.part_a, plan.part_b), (plan.part_b, plan.part_a)):
        sub = panel.subset(fit_idx)
        lambda_r = _stage("lambda_r", _resolve_lambda_r, sub, hyper, rank)
        init = _build_init(sub, hyper, rank, lambda_r)
        F, A, B, c, labels, lam_b, curve, _ = _fit_half(panel, init, hyper, eval_idx)
        halves.append((FactorModel(F, A, B, c), init, lam_b))
    c1, c2 = (h[0].coefficients() for h in halves)
    alpha = (c1.alpha + c2.alpha) / 2
    beta = (c1.beta + c2.beta) / 2
    theta = (c1.theta + c2.theta) / 2
    coef = CoefficientField.from_parts(alpha, beta, theta)
    fm = halves[0][0]
    F = fm.factors
    selected = np.flatnonzero(np.any(halves[0][0].loading_b != 0, axis=1)
                              | np.any(halves[1][0].loading_b != 0, axis=1))
    return IdmaFit(
        factor_model=fm,
        coefficients=coef,
        selected=selected,
        losses=(nm.loss_mediator(alpha, panel), nm.loss_outcome(theta, beta, panel)),
        singular_values=halves[0][1].singular_values,
        distinct_factor_rows=np.array([count_distinct_rows(F[i]) for i in range(panel.n)]),
        converged={"init_a": halves[0][1].converged, "init_b": halves[1][1].converged},
        lambda_r=halves[0][1].lambda_r,
        lambda_b=halves[0][2],
        lambda_f=hyper.lambda_f,
        c_f=int(hyper.c_f or 0),
        rank=rank,
        halves=[h[0] for h in halves],
    )
