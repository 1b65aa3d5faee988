"""Panel data model, validation, covariate adjustment and standardization."""

from __future__ import annotations

from dataclasses import dataclass, field, replace
from typing import Optional, Union

import numpy as np

from .errors import (
    DegenerateExposure,
    DimensionMismatch,
    InvalidShape,
    NonFinite,
    RankDeficientCovariates,
    ZeroVariance,
)

__all__ = [
    "PanelData",
    "FactorModel",
    "CoefficientField",
    "Hyperparams",
    "ScalingRecord",
    "ProjectionRecord",
    "validate_panel",
    "residualize_on_covariates",
    "standardize",
    "unstandardize",
]


def _frozen(a, ndim=None):
    a = np.array(a, dtype=float, copy=True)
    if ndim is not None and a.ndim != ndim:
        raise DimensionMismatch(f"expected {ndim}-d array, got shape {a.shape}")
    a.setflags(write=False)
    return a


@dataclass(frozen=True)
class PanelData:
    """Balanced longitudinal panel.

    Attributes
    ----------
    y : (n, T) outcome
    m : (n, T, p) mediators
    x : (n, T) exposure
    z : (n, T, q) observed confounders, or None
    """

    y: np.ndarray
    m: np.ndarray
    x: np.ndarray
    z: Optional[np.ndarray] = None

    def __post_init__(self):
        object.__setattr__(self, "y", _frozen(self.y, 2))
        object.__setattr__(self, "m", _frozen(self.m, 3))
        object.__setattr__(self, "x", _frozen(self.x, 2))
        if self.z is not None:
            z = np.asarray(self.z, dtype=float)
            if z.ndim == 2:
                z = z[:, :, None]
            object.__setattr__(self, "z", _frozen(z, 3))

    @property
    def n(self) -> int:
        return self.y.shape[0]

    @property
    def T(self) -> int:
        return self.y.shape[1]

    @property
    def p(self) -> int:
        return self.m.shape[2]

    @property
    def q(self) -> int:
        return 0 if self.z is None else self.z.shape[2]

    def subset(self, idx) -> "PanelData":
        """Panel restricted to the individuals in ``idx``."""
        idx = np.asarray(idx, dtype=int)
        z = None if self.z is None else self.z[idx]
        return PanelData(self.y[idx], self.m[idx], self.x[idx], z)

    def flat(self):
        """Pooled (nT, ...) views ordered individual-major: row = i*T + t."""
        N = self.n * self.T
        return self.y.reshape(N), self.m.reshape(N, self.p), self.x.reshape(N)


@dataclass(frozen=True)
class FactorModel:
    """Low-rank parameterization: alpha_it = A f_it, beta_it = B f_it, theta_it = c'f_it."""

    factors: np.ndarray  # (n, T, r)
    loading_a: np.ndarray  # (p, r)
    loading_b: np.ndarray  # (p, r)
    loading_c: np.ndarray  # (r,)

    @property
    def r(self) -> int:
        return self.factors.shape[2]

    def coefficients(self) -> "CoefficientField":
        F = self.factors
        alpha = F @ self.loading_a.T
        beta = F @ self.loading_b.T
        theta = F @ self.loading_c
        return CoefficientField.from_parts(alpha, beta, theta)


@dataclass(frozen=True)
class CoefficientField:
    alpha: np.ndarray
    beta: np.ndarray
    theta: np.ndarray
    gamma: np.ndarray
    gamma_total: np.ndarray

    @classmethod
    def from_parts(cls, alpha, beta, theta) -> "CoefficientField":
        alpha = np.asarray(alpha, dtype=float)
        beta = np.asarray(beta, dtype=float)
        if alpha.shape != beta.shape:
            raise DimensionMismatch(f"alpha {alpha.shape} vs beta {beta.shape}")
        gamma = alpha * beta
        return cls(alpha, beta, np.asarray(theta, dtype=float), gamma, gamma.sum(axis=-1))


@dataclass(frozen=True)
class Hyperparams:
    """Regularization and solver settings for one fit.

    ``lambda_r``/``lambda_b`` set to None mean "choose from data" (quantile
    rule and cross-validation respectively). ``rank`` may be ``"auto"``.
    ``c_f`` of 0 or None disables subgroup clustering.
    """

    lambda_r: Optional[float] = None
    lambda_f: float = 0.0
    lambda_b: Optional[float] = None
    c_f: Optional[int] = None
    rank: Union[int, str] = 2
    scad_a: float = 3.7
    tol: float = 1e-6
    max_iter: int = 500
    seed: int = 0
    crossfit: bool = False
    lla_rounds: int = 3
    max_rounds: int = 1
    threshold: bool = True
    lambda_b_grid: Optional[tuple] = None
    folds: int = 5

    def __post_init__(self):
        for name in ("lambda_r", "lambda_f", "lambda_b"):
            v = getattr(self, name)
            if v is not None and not (np.isfinite(v) and v >= 0):
                raise InvalidShape(f"{name} must be a finite nonnegative number, got {v}")
        if not self.scad_a > 2:
            raise InvalidShape(f"scad_a must exceed 2, got {self.scad_a}")
        if isinstance(self.rank, str):
            if self.rank != "auto":
                raise InvalidShape(f"rank must be a positive integer or 'auto', got {self.rank!r}")
        elif int(self.rank) < 1:
            raise InvalidShape(f"rank must be >= 1, got {self.rank}")
        if self.c_f is not None and self.c_f < 0:
            raise InvalidShape("c_f must be >= 0")
        if self.tol <= 0 or self.max_iter < 1:
            raise InvalidShape("tol must be positive and max_iter >= 1")
        if not 0 <= int(self.seed) < 2**64:
            raise InvalidShape("seed must fit in 64 unsigned bits")

    def with_(self, **kw) -> "Hyperparams":
        return replace(self, **kw)


@dataclass(frozen=True)
class ScalingRecord:
    y_mean: float
    y_sd: float
    m_means: np.ndarray
    m_sds: np.ndarray
    x_mean: float
    x_sd: float


@dataclass(frozen=True)
class ProjectionRecord:
    """Coefficients of the pooled regression on [1, z] removed from each series."""

    y_coef: np.ndarray
    m_coef: np.ndarray  # (q+1, p)
    x_coef: np.ndarray
    rank: int = field(default=0)


def validate_panel(raw: PanelData) -> PanelData:
    """Check dimensions, finiteness and exposure identifiability; return ``raw``."""
    n, T = raw.y.shape
    if raw.x.shape != (n, T):
        raise DimensionMismatch(f"x has shape {raw.x.shape}, expected {(n, T)}")
    if raw.m.shape[:2] != (n, T):
        raise DimensionMismatch(f"m has shape {raw.m.shape}, expected ({n}, {T}, p)")
    if raw.z is not None and raw.z.shape[:2] != (n, T):
        raise DimensionMismatch(f"z has shape {raw.z.shape}, expected ({n}, {T}, q)")
    if n < 2 or T < 1 or raw.p < 1:
        raise DimensionMismatch(f"need n >= 2, T >= 1, p >= 1 (got n={n}, T={T}, p={raw.p})")
    arrays = [("y", raw.y), ("m", raw.m), ("x", raw.x)]
    if raw.z is not None:
        arrays.append(("z", raw.z))
    for name, a in arrays:
        if not np.all(np.isfinite(a)):
            bad = np.argwhere(~np.isfinite(a))[0]
            raise NonFinite(f"{name} has a non-finite entry at index {tuple(int(v) for v in bad)}")
    dead = np.flatnonzero(np.all(raw.x == 0, axis=1))
    if dead.size:
        raise DegenerateExposure(f"exposure is identically zero for individual(s) {dead.tolist()}")
    return raw


def residualize_on_covariates(panel: PanelData):
    """Remove the pooled linear projection on [1, z] from y, x and every mediator.

    Returns the z-free panel and a :class:`ProjectionRecord`. With no
    covariates only the pooled means are removed.
    """
    n, T, p = panel.n, panel.T, panel.p
    N = n * T
    y, m, x = panel.flat()
    if panel.z is None or panel.q == 0:
        design = np.ones((N, 1))
    else:
        design = np.column_stack([np.ones(N), panel.z.reshape(N, panel.q)])
    q1 = design.shape[1]
    rank = np.linalg.matrix_rank(design)
    if rank < q1:
        raise RankDeficientCovariates(f"pooled design [1, z] has rank {rank} < {q1}")
    targets = np.column_stack([y, x, m])
    coef, *_ = np.linalg.lstsq(design, targets, rcond=None)
    resid = targets - design @ coef
    # one refinement sweep tightens orthogonality for badly scaled z
    coef2, *_ = np.linalg.lstsq(design, resid, rcond=None)
    resid = resid - design @ coef2
    coef = coef + coef2
    out = PanelData(
        resid[:, 0].reshape(n, T),
        resid[:, 2:].reshape(n, T, p),
        resid[:, 1].reshape(n, T),
        None,
    )
    rec = ProjectionRecord(coef[:, 0], coef[:, 2:], coef[:, 1], rank)
    return out, rec


def standardize(panel: PanelData):
    """Pooled z-scoring of y, x and each mediator column (ddof=0)."""
    y, m, x = panel.flat()
    sds = [y.std(), x.std()]
    m_sds = m.std(axis=0)
    if min(sds) <= 0 or np.any(m_sds <= 0):
        names = [nm for nm, s in zip(("y", "x"), sds) if s <= 0]
        names += [f"m[{k}]" for k in np.flatnonzero(m_sds <= 0)]
        raise ZeroVariance(f"zero variance in {', '.join(names)}")
    rec = ScalingRecord(
        float(y.mean()), float(sds[0]), m.mean(axis=0), m_sds, float(x.mean()), float(sds[1])
    )
    out = PanelData(
        (panel.y - rec.y_mean) / rec.y_sd,
        (panel.m - rec.m_means) / rec.m_sds,
        (panel.x - rec.x_mean) / rec.x_sd,
        panel.z,
    )
    return out, rec


def unstandardize(panel: PanelData, rec: ScalingRecord) -> PanelData:
    """Invert :func:`standardize`."""
    return PanelData(
        panel.y * rec.y_sd + rec.y_mean,
        panel.m * rec.m_sds + rec.m_means,
        panel.x * rec.x_sd + rec.x_mean,
        panel.z,
    )
