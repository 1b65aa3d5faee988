import numpy as np
import pytest

from idma.errors import DegenerateExposure, DimensionMismatch, InvalidShape, NonFinite, ZeroVariance
from idma.model import (CoefficientField, FactorModel, Hyperparams, PanelData,
                        residualize_on_covariates, standardize, unstandardize, validate_panel)


def _panel(rng, n=5, T=3, p=4, q=0):
    z = rng.normal(size=(n, T, q)) if q else None
    return PanelData(rng.normal(size=(n, T)), rng.normal(size=(n, T, p)),
                     rng.uniform(1, 2, size=(n, T)), z)


def test_validate_identity_and_idempotent(rng):
    p = _panel(rng, 2, 2, 3)
    assert validate_panel(p) is p
    assert validate_panel(validate_panel(p)) is p


def test_validate_rejects_nan(rng):
    p = _panel(rng)
    m = p.m.copy()
    m[1, 2, 0] = np.nan
    with pytest.raises(NonFinite, match=r"\(1, 2, 0\)"):
        validate_panel(PanelData(p.y, m, p.x))


def test_validate_rejects_dead_exposure(rng):
    p = _panel(rng)
    x = p.x.copy()
    x[3] = 0.0
    with pytest.raises(DegenerateExposure, match=r"\[3\]"):
        validate_panel(PanelData(p.y, p.m, x))


def test_validate_rejects_mismatched_shapes(rng):
    p = _panel(rng)
    with pytest.raises(DimensionMismatch):
        validate_panel(PanelData(p.y, p.m, p.x[:, :2]))


def test_panel_arrays_are_read_only(rng):
    p = _panel(rng)
    with pytest.raises(ValueError):
        p.m[0, 0, 0] = 1.0


def test_residualize_constant_only_removes_means(rng):
    p = _panel(rng, q=0)
    out, rec = residualize_on_covariates(p)
    assert np.allclose(out.y, p.y - p.y.mean(), atol=1e-12)
    assert np.allclose(out.m, p.m - p.m.reshape(-1, p.p).mean(0), atol=1e-12)
    assert out.z is None and rec.rank == 1


def test_residualize_exact_linear_fit(rng):
    p = _panel(rng, q=2)
    y = 1.5 + p.z[..., 0] * 2 - p.z[..., 1]
    out, _ = residualize_on_covariates(PanelData(y, p.m, p.x, p.z))
    assert np.max(np.abs(out.y)) < 1e-10


def test_residualize_orthogonal_to_covariates(rng):
    p = _panel(rng, n=20, T=3, p=4, q=2)
    out, _ = residualize_on_covariates(p)
    z = p.z.reshape(-1, 2)
    y, m, x = out.flat()
    cols = np.column_stack([y, x, m])
    assert np.max(np.abs(z.T @ cols)) < 1e-8
    assert np.max(np.abs(cols.sum(0))) < 1e-8
    zc = (z - z.mean(0)) / z.std(0)
    cc = cols / cols.std(0)
    assert np.max(np.abs(zc.T @ cc / len(z))) < 1e-8


def test_standardize_idempotent_and_invertible(rng):
    p = _panel(rng, n=8)
    s1, rec = standardize(p)
    s2, rec2 = standardize(s1)
    assert np.max(np.abs(s2.m - s1.m)) < 1e-12 and np.max(np.abs(s2.y - s1.y)) < 1e-12
    assert abs(rec2.y_mean) < 1e-12 and abs(rec2.y_sd - 1) < 1e-12
    back = unstandardize(s1, rec)
    assert np.max(np.abs(back.m - p.m)) < 1e-10 and np.max(np.abs(back.x - p.x)) < 1e-10


def test_standardize_scale_invariant(rng):
    p = _panel(rng, n=8)
    a, _ = standardize(p)
    b, _ = standardize(PanelData(10 * p.y, p.m, p.x))
    assert np.max(np.abs(a.y - b.y)) < 1e-12


def test_standardize_zero_variance(rng):
    p = _panel(rng)
    m = p.m.copy()
    m[..., 2] = 4.0
    with pytest.raises(ZeroVariance, match=r"m\[2\]"):
        standardize(PanelData(p.y, m, p.x))


def test_coefficient_field_gamma_exact(rng):
    a, b = rng.normal(size=(3, 2, 4)), rng.normal(size=(3, 2, 4))
    cf = CoefficientField.from_parts(a, b, rng.normal(size=(3, 2)))
    assert np.array_equal(cf.gamma, a * b)
    assert np.array_equal(cf.gamma_total, (a * b).sum(-1))


def test_factor_model_rank_one_identity(rng):
    F = rng.normal(size=(4, 3, 1))
    A, B = rng.normal(size=(5, 1)), rng.normal(size=(5, 1))
    cf = FactorModel(F, A, B, np.ones(1)).coefficients()
    assert np.allclose(cf.gamma, A[:, 0] * B[:, 0] * F ** 2)


@pytest.mark.parametrize("kw", [dict(lambda_f=-1.0), dict(rank=0), dict(rank="big"), dict(scad_a=2.0),
                                dict(c_f=-1), dict(tol=0.0)])
def test_hyperparams_validation(kw):
    with pytest.raises(InvalidShape):
        Hyperparams(**kw)
