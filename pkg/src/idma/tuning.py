"""Hyperparameter selection: lambda_r quantile rule, noise variance, lambda_b
cross-validation, modified BIC over (lambda_f, c_f), and rank estimation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import estimator as est
from . import numerics as nm
from .errors import InvalidShape, NonPositiveLoss
from .model import Hyperparams, PanelData

__all__ = [
    "TuneGrid",
    "BicCandidate",
    "BicReport",
    "estimate_noise_variance",
    "select_lambda_r",
    "default_lambda_b_grid",
    "select_lambda_b_cv",
    "cv_folds",
    "bic_score",
    "default_lambda_f_grid",
    "tune_bic",
    "estimate_rank",
]

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class TuneGrid:
    lambda_f_grid: Optional[tuple] = None  # None -> data-driven default
    c_f_grid: tuple = (0, 1, 2, 3, 4)
    folds: int = 5
    bic_c1: float = 0.5
    bic_c2: float = 0.5
    quantile_draws: int = 200

    def __post_init__(self):
        if self.lambda_f_grid is not None:
            if len(self.lambda_f_grid) == 0 or min(self.lambda_f_grid) < 0:
                raise InvalidShape("lambda_f grid must be nonempty and nonnegative")
        if len(self.c_f_grid) == 0 or min(self.c_f_grid) < 0:
            raise InvalidShape("c_f grid must be nonempty and nonnegative")
        if self.folds < 2:
            raise InvalidShape("folds must be >= 2")


@dataclass
class BicCandidate:
    lambda_f: float
    c_f: int
    loss_m: float = float("nan")
    loss_y: float = float("nan")
    df_f: int = 0
    df_b: int = 0
    score: float = float("inf")
    lambda_b: float = float("nan")
    error: Optional[str] = None


@dataclass
class BicReport:
    candidates: list
    best: int
    lambda_r: float
    rank: int
    skipped: list = field(default_factory=list)

    @property
    def best_candidate(self) -> BicCandidate:
        return self.candidates[self.best]


def estimate_noise_variance(panel: PanelData, rank: Optional[int] = None) -> float:
    """Pooled noise variance of the mediator equations.

    Without ``rank``: residual variance of column-wise least squares of each
    mediator on the exposure (no intercept), pooled over mediators. With
    ``rank``: residual variance of the rank-``rank`` truncation of the
    elementwise unpenalized fit ``M / x``, weighted back to the mediator
    scale, with the degrees of freedom of a rank-r fit removed.
    """
    _, m, x = panel.flat()
    N, p = m.shape
    if N <= 2:
        raise InvalidShape("need more than two observations")
    if rank is None:
        coef = (x @ m) / (x @ x)
        resid = m - np.outer(x, coef)
        return float(np.sum(resid * resid) / (p * (N - 1)))
    rank = int(rank)
    svd = nm.thin_svd(m / x[:, None], rank)
    resid = m - svd.reconstruct() * x[:, None]
    dof = N * p - rank * (N + p - rank)
    if dof <= 0:
        raise InvalidShape("rank too large for a residual variance estimate")
    return float(np.sum(resid * resid) / dof)


def select_lambda_r(panel: PanelData, sigma2: float, draws: int = 200, seed=0) -> float:
    """``2.2 * q95(||Delta o X_tilde||)`` with ``Delta`` i.i.d. N(0, sigma2).

    Standard normal draws are scaled by ``sqrt(sigma2)`` after the quantile is
    taken, so the result is exactly proportional to ``sqrt(sigma2)`` for a
    fixed seed.
    """
    if draws < 20:
        raise InvalidShape("need at least 20 draws")
    if sigma2 < 0:
        raise InvalidShape("sigma2 must be nonnegative")
    if sigma2 == 0:
        return 0.0
    _, m, x = panel.flat()
    N, p = m.shape
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0x1A4B]))
    norms = np.empty(draws)
    for j in range(draws):
        W = rng.standard_normal((N, p)) * x[:, None]
        small = W.T @ W if N >= p else W @ W.T
        norms[j] = math.sqrt(max(float(np.linalg.eigvalsh(small)[-1]), 0.0))
    q = float(np.quantile(norms, 0.95))
    return 2.2 * q * math.sqrt(sigma2)


def cv_folds(n: int, folds: int, seed=0) -> np.ndarray:
    """Fold id per individual: a random balanced partition into ``folds`` parts."""
    if folds < 2 or folds > n:
        raise InvalidShape(f"folds must lie in [2, {n}]")
    rng = np.random.default_rng(np.random.SeedSequence([int(seed), 0xCF01]))
    ids = np.arange(n) % folds
    return rng.permutation(ids)


def default_lambda_b_grid(G, b, p, r, num: int = 12, ratio: float = 1e-3):
    """Log-spaced grid from the smallest value that zeroes every mediator group."""
    c_blk = slice(0, r)
    Gc = nm.stabilize_gram(G[c_blk, c_blk])
    c = np.linalg.solve(Gc, b[c_blk])
    grad = 2 * (b - G[:, c_blk] @ c)
    lam_max = max(float(np.max(np.linalg.norm(grad[r:].reshape(p, r), axis=1))), 1e-12)
    return tuple(lam_max * np.logspace(0, math.log10(ratio), num))


def select_lambda_b_cv(factors, panel: PanelData, lambda_grid: Optional[Sequence[float]] = None,
                       folds: int = 5, seed=0, scad_a: float = 3.7, lla_rounds: int = 3):
    """K-fold cross-validation of the outcome-model penalty, folds split by individual.

    Returns ``(lambda_b, curve)`` where ``curve`` lists ``(lambda, mean
    held-out squared error)``. Ties go to the larger penalty.
    """
    F = np.asarray(factors, dtype=float)
    n, r, p = panel.n, F.shape[2], panel.p
    Gi, bi, yyi = est.outcome_gram(F, panel)
    G, b, yy = Gi.sum(0), bi.sum(0), float(yyi.sum())
    if lambda_grid is None:
        lambda_grid = default_lambda_b_grid(G, b, p, r)
    grid = [float(v) for v in lambda_grid]
    if not grid:
        raise InvalidShape("lambda grid must be nonempty")
    if len(grid) == 1:
        return grid[0], [(grid[0], float("nan"))]
    fold_id = cv_folds(n, min(folds, n), seed)
    errs = np.zeros(len(grid))
    for f in range(fold_id.max() + 1):
        hold = fold_id == f
        Gv, bv, yyv = Gi[hold].sum(0), bi[hold].sum(0), float(yyi[hold].sum())
        Gt, bt, yyt = G - Gv, b - bv, yy - yyv
        for j, lam in enumerate(grid):
            B, c, res = est.fit_outcome_gram(Gt, bt, yyt, p, r, lam, scad_a, lla_rounds)
            beta = res.coef
            errs[j] += float(beta @ Gv @ beta - 2 * bv @ beta + yyv)
    errs /= n * panel.T
    best = min(range(len(grid)), key=lambda j: (round(errs[j], 12), -grid[j]))
    return grid[best], list(zip(grid, errs.tolist()))


def bic_score(loss_m: float, loss_y: float, df_f: int, df_b: int, n: int, T: int, p: int, r: int,
              c1: float = 0.5, c2: float = 0.5) -> float:
    """Modified BIC: ``log(L_M/N) + log(L_Y/N) + c_N r df_F + d_N r df_B`` with N = nT."""
    if loss_m <= 0 or loss_y <= 0:
        raise NonPositiveLoss(f"losses must be positive (got {loss_m}, {loss_y})")
    N = n * T
    llN = math.log(math.log(N))
    c_n = c1 * llN * math.log(p) / N
    d_n = c2 * llN / N
    return math.log(loss_m / N) + math.log(loss_y / N) + c_n * r * df_f + d_n * r * df_b


def default_lambda_f_grid(panel: PanelData, loading_a, num: int = 8):
    """Log-spaced grid scaled by the median absolute first difference of per-time factor fits."""
    diffs = []
    for i in range(panel.n):
        f = est.unpenalized_factors(loading_a, panel.m[i], panel.x[i])
        diffs.append(np.abs(np.diff(f, axis=0)).ravel())
    d = np.concatenate(diffs) if diffs else np.zeros(1)
    pilot = float(np.median(d)) if d.size else 1.0
    if not pilot > 0:
        pilot = 1.0
    return tuple(pilot * np.logspace(-0.5, 1, num))


def tune_bic(panel: PanelData, grid: TuneGrid = TuneGrid(), base_hyper: Hyperparams = Hyperparams(),
             init: Optional[est.InitResult] = None, return_fit: bool = False):
    """Fit every (lambda_f, c_f) candidate and keep the one with the smallest BIC.

    The nuclear-norm initialization does not depend on the candidate and is
    computed once. Candidates whose fit fails are recorded with their error
    and skipped. Ties prefer larger lambda_f, then smaller c_f.
    """
    if init is None:
        rank = est._resolve_rank(panel, base_hyper)
        lam_r = est._resolve_lambda_r(panel, base_hyper, rank)
        init = est.init_factorization(panel, lam_r, rank, base_hyper.tol, base_hyper.max_iter)
    rank = init.factors.shape[2]
    lf_grid = grid.lambda_f_grid or default_lambda_f_grid(panel, init.loading_a)
    shared_b = base_hyper.lambda_b is None
    if shared_b:
        # one cross-validated lambda_b shared by every candidate, chosen on
        # pilot factors at the middle of the lambda_f grid without clustering
        pilot = base_hyper.with_(lambda_f=float(sorted(lf_grid)[len(lf_grid) // 2]), c_f=0,
                                 rank=rank, lambda_r=init.lambda_r, folds=grid.folds)
        F0, _ = est._factor_paths(panel, init.loading_a, pilot)
        lam_b, _ = est._select_lambda_b(F0, panel, pilot)
        base_hyper = base_hyper.with_(lambda_b=lam_b)
    cands, fits, skipped = [], [], []
    for c_f in grid.c_f_grid:
        for lf in lf_grid:
            cand = BicCandidate(float(lf), int(c_f))
            hyper = base_hyper.with_(lambda_f=float(lf), c_f=int(c_f), rank=rank,
                                     lambda_r=init.lambda_r, folds=grid.folds)
            try:
                if c_f > panel.n:
                    raise InvalidShape(f"c_f={c_f} exceeds n={panel.n}")
                fit = est.fit_idma(panel, hyper, init=init)
                cand.loss_m, cand.loss_y = fit.losses
                cand.df_f, cand.df_b = fit.df_f, fit.df_b
                cand.lambda_b = fit.lambda_b
                cand.score = bic_score(cand.loss_m, cand.loss_y, cand.df_f, cand.df_b, panel.n,
                                       panel.T, panel.p, rank, grid.bic_c1, grid.bic_c2)
            except Exception as exc:  # recorded, never silently dropped
                cand.error = f"{type(exc).__name__}: {exc}"
                skipped.append(len(cands))
                fit = None
                log.info("candidate lambda_f=%g c_f=%d skipped: %s", lf, c_f, cand.error)
            cands.append(cand)
            fits.append(fit)
    ok = [j for j, c in enumerate(cands) if c.error is None]
    if not ok:
        raise RuntimeError("every tuning candidate failed: " + "; ".join(c.error for c in cands))
    best = min(ok, key=lambda j: (round(cands[j].score, 12), -cands[j].lambda_f, cands[j].c_f))
    report = BicReport(cands, best, init.lambda_r, rank, skipped)
    bc = cands[best]
    chosen = base_hyper.with_(lambda_f=bc.lambda_f, c_f=bc.c_f, rank=rank, lambda_r=init.lambda_r,
                              folds=grid.folds)
    fit = fits[best]
    if shared_b:
        # the shared lambda_b only ranks candidates; the winner gets its own CV
        refit = est.fit_idma(panel, chosen.with_(lambda_b=None), init=init)
        chosen = chosen.with_(lambda_b=refit.lambda_b)
        fit = refit
    if return_fit:
        return chosen, report, fit
    return chosen, report


def estimate_rank(singular_values, max_rank: int) -> int:
    """Eigenvalue-ratio style estimate ``argmax_{j <= max_rank} s_j / s_{j+1}``."""
    s = np.asarray(singular_values, dtype=float)
    if max_rank < 1 or s.size < max_rank + 1:
        raise InvalidShape(f"need at least max_rank+1={max_rank + 1} singular values")
    num = s[:max_rank]
    den = s[1:max_rank + 1]
    with np.errstate(divide="ignore", invalid="ignore"):
        ratio = np.where(den > 0, num / np.where(den > 0, den, 1.0), np.where(num > 0, np.inf, 0.0))
    return int(np.argmax(ratio)) + 1
