"""Simulation settings, evaluation metrics, a homogeneous per-time baseline and
the replication runner."""

from __future__ import annotations

import logging
import math
import time
from dataclasses import asdict, dataclass, field
from typing import Optional, Sequence

import numpy as np

from . import estimator as est
from . import tuning
from .errors import InvalidShape, TooShort
from .model import CoefficientField, Hyperparams, PanelData

__all__ = [
    "SimTruth",
    "MetricsRow",
    "ReplicationReport",
    "stream",
    "generate_setting1",
    "generate_setting2",
    "trend_operator",
    "matching_error",
    "rmse_effects",
    "fn_fp_all",
    "fn_fp_avg",
    "compute_metrics",
    "homogeneous_baseline_fit",
    "run_replications",
    "METRICS",
]

log = logging.getLogger(__name__)

METRICS = ("rmse", "me", "fn_avg", "fp_avg", "fn_all", "fp_all")

# stream purposes
_DESIGN, _NOISE, _FIT = 11, 12, 13


def stream(*key) -> np.random.Generator:
    """Counter-based Philox generator keyed by a tuple of nonnegative integers."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence([int(k) for k in key])))


def derived_seed(*key) -> int:
    return int(np.random.SeedSequence([int(k) for k in key]).generate_state(1, np.uint64)[0])


@dataclass(frozen=True)
class SimTruth:
    alpha: np.ndarray
    beta: np.ndarray
    gamma: np.ndarray
    theta: np.ndarray
    factors: np.ndarray
    loading_a: np.ndarray
    loading_b: np.ndarray
    loading_c: np.ndarray
    meta: dict = field(default_factory=dict)


def _ar_cov(dim, rho, scale=1.0):
    idx = np.arange(dim)
    return scale * rho ** np.abs(idx[:, None] - idx[None, :])


def _assemble(F, A, B, c, x, delta, eps, meta):
    alpha = F @ A.T
    beta = F @ B.T
    theta = F @ c
    m = alpha * x[:, :, None] + delta
    y = theta * x + np.einsum("itk,itk->it", beta, m) + eps
    truth = SimTruth(alpha, beta, alpha * beta, theta, F, A, B, c, meta)
    return PanelData(y, m, x), truth


def _errors(rng, n, T, p, sig_m, sig_t, sig_eps):
    xi1 = rng.multivariate_normal(np.zeros(p), sig_m, size=n, method="cholesky")  # (n, p)
    xi2 = rng.multivariate_normal(np.zeros(T), sig_t, size=n, method="cholesky")  # (n, T)
    delta = xi1[:, None, :] + xi2[:, :, None]
    eps = rng.multivariate_normal(np.zeros(T), sig_eps, size=n, method="cholesky")
    return delta, eps


def _break(T):
    return min(2, T)


def generate_setting1(n: int, p: int, T: int = 5, seed: int = 0, rep: int = 0,
                      design_seed: Optional[int] = None, variance: bool = False,
                      p_hete: float = 0.3):
    """Heterogeneous setting with counteractive mediation effects (rank 2).

    Design quantities (individual factor levels and signs, loadings) come
    from the ``design_seed`` stream and are shared by every replication;
    exposures and errors come from the ``(seed, rep)`` stream. With
    ``variance=True`` the second parameter of each univariate normal is a
    variance, otherwise a standard deviation.
    """
    if p < 8:
        raise InvalidShape("setting 1 needs p >= 8")
    sd = math.sqrt if variance else (lambda v: v)
    drng = stream(seed if design_seed is None else design_seed, 1, _DESIGN)
    mu = drng.normal(1.0, sd(0.15), size=(n, 2))
    w_i = drng.choice([-1.0, 1.0], size=n)
    brk = _break(T)
    F = np.empty((n, T, 2))
    F[:, :brk, 0] = mu[:, :1]
    F[:, brk:, 0] = mu[:, :1] - 0.5
    F[:, :brk, 1] = (w_i * (mu[:, 1] - 0.5))[:, None]
    F[:, brk:, 1] = (w_i * mu[:, 1])[:, None]
    w_k = drng.random(p) < p_hete
    h_k = drng.random(p) < 0.5
    mu_k = np.where(h_k, drng.normal(1.5, sd(0.5), p), drng.normal(-1.5, sd(0.5), p))
    A = np.column_stack([np.where(w_k, 0.0, mu_k), np.where(w_k, mu_k, 0.0)])
    B = np.zeros((p, 2))
    B[0:8:2, 0] = 1.0
    B[1:8:2, 1] = 1.0
    c = np.array([1.0, 0.0])
    nrng = stream(seed, rep, _NOISE)
    x = nrng.uniform(1.0, 2.0, size=(n, T))
    sig_t = _ar_cov(T, 0.2, 0.7)
    delta, eps = _errors(nrng, n, T, p, _ar_cov(p, 0.3), sig_t, sig_t)
    meta = {"setting": 1, "n": n, "p": p, "T": T, "seed": seed, "rep": rep,
            "design_seed": seed if design_seed is None else design_seed,
            "p_hete": p_hete, "variance": variance, "counteractive": np.flatnonzero(w_k).tolist()}
    return _assemble(F, A, B, c, x, delta, eps, meta)


def generate_setting2(n: int, p: int, T: int = 5, seed: int = 0, rep: int = 0,
                      design_seed: Optional[int] = None, variance: bool = True):
    """Homogeneous setting: every individual shares one piecewise-constant factor path.

    For ``p == 30`` the outcome loadings are drawn like the mediator
    loadings and rows with squared norm below 0.8 are zeroed; for any other
    ``p`` the first four rows are fixed and the rest are zero.
    """
    drng = stream(seed if design_seed is None else design_seed, 2, _DESIGN)
    cov = (0.1 if variance else 0.01) * np.eye(2)

    def mixture(size):
        w = drng.random(size) < 0.5
        e1 = drng.multivariate_normal([1.0, 0.0], cov, size=size)
        e2 = drng.multivariate_normal([0.0, 1.0], cov, size=size)
        return np.where(w[:, None], e1, e2)

    A = mixture(p)
    if p == 30:
        B = mixture(p)
        B[np.sum(B * B, axis=1) < 0.8] = 0.0
    else:
        if p < 4:
            raise InvalidShape("setting 2 needs p >= 4")
        B = np.zeros((p, 2))
        B[0:2] = [1.5, 0.0]
        B[2:4] = [0.0, 1.5]
    c = np.array([1.0, 0.0])
    early = min(3, T)
    F = np.empty((n, T, 2))
    F[:, :early] = [1.5, 0.1]
    F[:, early:] = [0.1, 1.5]
    nrng = stream(seed, rep, _NOISE)
    x = nrng.uniform(1.0, 2.0, size=(n, T))
    delta, eps = _errors(nrng, n, T, p, _ar_cov(p, 0.3, 0.5), _ar_cov(T, 0.2, 0.5),
                         _ar_cov(T, 0.2, 0.7))
    meta = {"setting": 2, "n": n, "p": p, "T": T, "seed": seed, "rep": rep,
            "design_seed": seed if design_seed is None else design_seed}
    return _assemble(F, A, B, c, x, delta, eps, meta)


def trend_operator(h, c: float = 0.1):
    """Soft trend codes along the last axis: +1 if the step exceeds ``c``, -1 if below ``-c``."""
    h = np.asarray(h, dtype=float)
    if h.shape[-1] < 2:
        raise TooShort("trend operator needs at least two time points")
    d = np.diff(h, axis=-1)
    return (d > c).astype(int) - (d < -c).astype(int)


def matching_error(gamma_hat, gamma, c: float = 0.1) -> float:
    """RMS disagreement of trend codes of each (individual, mediator) effect path.

    Arrays are (n, T, p).
    """
    gh = np.moveaxis(np.asarray(gamma_hat, dtype=float), 1, -1)
    g = np.moveaxis(np.asarray(gamma, dtype=float), 1, -1)
    n, p, T = g.shape
    if T < 2:
        raise TooShort("matching error needs T >= 2")
    diff = trend_operator(gh, c) - trend_operator(g, c)
    return math.sqrt(float(np.sum(diff * diff)) / (n * p * (T - 1)))


def rmse_effects(gamma_hat, gamma) -> float:
    gh = np.asarray(gamma_hat, dtype=float)
    g = np.asarray(gamma, dtype=float)
    if gh.shape != g.shape:
        raise InvalidShape(f"shape mismatch {gh.shape} vs {g.shape}")
    return math.sqrt(float(np.mean((gh - g) ** 2)))


def _ratio(num, den):
    return float(num) / float(den) if den else 0.0


def fn_fp_all(gamma_hat, gamma):
    """Entry-level false negative and false positive ratios of the nonzero pattern."""
    est_nz = np.asarray(gamma_hat) != 0
    true_nz = np.asarray(gamma) != 0
    fn = _ratio(np.sum(~est_nz & true_nz), np.sum(true_nz))
    fp = _ratio(np.sum(est_nz & ~true_nz), np.sum(~true_nz))
    return fn, fp


def fn_fp_avg(gamma_hat, gamma):
    """Mediator-level ratios using ``w_k = sum_it |gamma_itk|``."""
    w_hat = np.sum(np.abs(np.asarray(gamma_hat)), axis=(0, 1))
    w = np.sum(np.abs(np.asarray(gamma)), axis=(0, 1))
    return fn_fp_all(w_hat, w)


@dataclass
class MetricsRow:
    method: str
    rep: int
    rmse: float = float("nan")
    me: float = float("nan")
    fn_avg: float = float("nan")
    fp_avg: float = float("nan")
    fn_all: float = float("nan")
    fp_all: float = float("nan")
    runtime_seconds: float = 0.0
    error: Optional[str] = None
    extra: dict = field(default_factory=dict)


def compute_metrics(gamma_hat, truth: SimTruth, method: str = "", rep: int = 0) -> MetricsRow:
    fn_all, fp_all = fn_fp_all(gamma_hat, truth.gamma)
    fn_avg, fp_avg = fn_fp_avg(gamma_hat, truth.gamma)
    return MetricsRow(method, rep, rmse_effects(gamma_hat, truth.gamma),
                      matching_error(gamma_hat, truth.gamma), fn_avg, fp_avg, fn_all, fp_all)


def homogeneous_baseline_fit(panel: PanelData, lambda_b: Optional[float] = None, folds: int = 5,
                             seed: int = 0, scad_a: float = 3.7) -> CoefficientField:
    """Per-time-point homogeneous mediation fit (comparison stand-in, not a HIMA port).

    At each time point: alpha_k by least squares of mediator k on the
    exposure; (theta, beta) by SCAD-penalized least squares of the outcome
    on the exposure (unpenalized) and the mediators (penalized singly),
    with the penalty chosen by cross-validation over individuals.
    """
    n, T, p = panel.n, panel.T, panel.p
    alpha = np.empty((T, p))
    beta = np.empty((T, p))
    theta = np.empty(T)
    ones = np.ones((n, 1, 1))
    for t in range(T):
        sub = PanelData(panel.y[:, t:t + 1], panel.m[:, t:t + 1], panel.x[:, t:t + 1])
        x = sub.x[:, 0]
        alpha[t] = (x @ sub.m[:, 0]) / (x @ x)
        lam = lambda_b
        if lam is None:
            lam, _ = tuning.select_lambda_b_cv(ones, sub, folds=min(folds, n), seed=seed + t,
                                               scad_a=scad_a)
        B, c, _ = est.fit_outcome(ones, sub, lam, scad_a)
        beta[t] = B[:, 0]
        theta[t] = c[0]
    rep = lambda a: np.broadcast_to(a, (n,) + a.shape).copy()
    return CoefficientField.from_parts(rep(alpha), rep(beta), rep(theta))


@dataclass
class ReplicationReport:
    setting: int
    n: int
    p: int
    T: int
    reps: int
    seed: int
    rows: list
    aggregates: dict
    failures: dict

    def to_dict(self):
        d = asdict(self)
        return d


def _aggregate(rows, methods):
    agg, fails = {}, {}
    for m in methods:
        ok = [r for r in rows if r.method == m and r.error is None]
        fails[m] = sum(1 for r in rows if r.method == m and r.error is not None)
        entry = {"count": len(ok)}
        for key in METRICS + ("runtime_seconds",):
            vals = np.array([getattr(r, key) for r in ok], dtype=float)
            entry[key] = {
                "mean": float(vals.mean()) if vals.size else float("nan"),
                "sd": float(vals.std(ddof=1)) if vals.size > 1 else 0.0,
            }
        agg[m] = entry
    return agg, fails


def _one_replication(setting, n, p, T, seed, rep, hyper, grid, methods):
    gen = generate_setting1 if setting == 1 else generate_setting2
    panel, truth = gen(n, p, T, seed=seed, rep=rep, design_seed=seed)
    fit_seed = derived_seed(seed, rep, _FIT) % (2**63)
    rows = []
    for method in methods:
        t0 = time.perf_counter()
        try:
            if method == "idma":
                h = (hyper or Hyperparams()).with_(seed=fit_seed)
                if hyper is None or hyper.lambda_f is None:
                    _, report, fit = tuning.tune_bic(panel, grid or tuning.TuneGrid(), h,
                                                     return_fit=True)
                    extra = {"lambda_f": fit.lambda_f, "c_f": fit.c_f, "lambda_r": fit.lambda_r,
                             "lambda_b": fit.lambda_b, "selected": fit.selected.tolist()}
                else:
                    fit = est.fit_idma(panel, h)
                    extra = {"lambda_r": fit.lambda_r, "lambda_b": fit.lambda_b,
                             "selected": fit.selected.tolist()}
                extra["distinct_rows_mode"] = int(np.bincount(fit.distinct_factor_rows).argmax())
                gamma_hat = fit.coefficients.gamma
            elif method == "baseline":
                gamma_hat = homogeneous_baseline_fit(panel, seed=fit_seed % 100000).gamma
                extra = {}
            else:
                raise ValueError(f"unknown method {method!r}")
            row = compute_metrics(gamma_hat, truth, method, rep)
            row.extra = extra
        except Exception as exc:
            row = MetricsRow(method, rep, error=f"{type(exc).__name__}: {exc}")
            log.warning("replication %d method %s failed: %s", rep, method, row.error)
        row.runtime_seconds = time.perf_counter() - t0
        rows.append(row)
    return rows


def run_replications(setting: int, n: int, p: int, reps: int, T: int = 5, seed: int = 0,
                     hyper: Optional[Hyperparams] = None, grid: Optional[tuning.TuneGrid] = None,
                     jobs: int = 1, methods: Sequence[str] = ("idma", "baseline")) -> ReplicationReport:
    """Monte Carlo replications of a setting; one metrics row per method and replication.

    ``hyper=None`` (or ``hyper.lambda_f=None``) tunes (lambda_f, c_f) by BIC
    in every replication. Replication seeds derive from ``seed`` alone so
    results do not depend on ``jobs``.
    """
    if reps < 1:
        raise InvalidShape("reps must be >= 1")
    if setting not in (1, 2):
        raise InvalidShape("setting must be 1 or 2")
    args = [(setting, n, p, T, seed, rep, hyper, grid, tuple(methods)) for rep in range(reps)]
    if jobs == 1:
        chunks = [_one_replication(*a) for a in args]
    else:
        from joblib import Parallel, delayed

        chunks = Parallel(n_jobs=jobs)(delayed(_one_replication)(*a) for a in args)
    rows = [r for chunk in chunks for r in chunk]
    agg, fails = _aggregate(rows, methods)
    return ReplicationReport(setting, n, p, T, reps, seed, rows, agg, fails)
