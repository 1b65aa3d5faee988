import numpy as np
import pytest

from idma.model import PanelData


@pytest.fixture
def rng():
    return np.random.default_rng(12345)


def planted_panel(n=30, T=5, p=20, r=2, noise=0.0, seed=0, b_rows=4):
    """Low-rank panel with known factors and loadings; returns (panel, F, A, B, c)."""
    g = np.random.default_rng(seed)
    F = g.normal(1.0, 0.5, size=(n, T, r))
    A = g.normal(size=(p, r))
    B = np.zeros((p, r))
    B[:b_rows] = g.choice([-1.0, 1.0], size=(b_rows, r)) * g.uniform(1.0, 1.5, size=(b_rows, r))
    c = g.normal(size=r)
    x = g.uniform(1.0, 2.0, size=(n, T))
    m = (F @ A.T) * x[:, :, None] + noise * g.normal(size=(n, T, p))
    y = (F @ c) * x + np.einsum("itk,itk->it", F @ B.T, m) + noise * g.normal(size=(n, T))
    return PanelData(y, m, x), F, A, B, c
