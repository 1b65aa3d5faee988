"""The compiled kernels and the pure-Python fallback must agree."""

import numpy as np
import pytest

from idma import _backend
from idma import numerics as nm

py = _backend.get_kernels("python")
try:
    cy = _backend.get_kernels("cython")
except ImportError:  # pragma: no cover - extension not built
    cy = None

needs_cython = pytest.mark.skipif(cy is None, reason="compiled extension not built")


def test_backend_flag_is_consistent():
    assert _backend.BACKEND in ("python", "cython")
    assert _backend.get_kernels() is (cy if _backend.BACKEND == "cython" else py)
    with pytest.raises(ValueError):
        _backend.get_kernels("fortran")


def _box_problem(seed, m=12):
    g = np.random.default_rng(seed)
    M = g.normal(size=(m, m))
    return M @ M.T + 0.1 * np.eye(m), g.normal(size=m) * 3, g.uniform(0.1, 2, size=m)


@needs_cython
@pytest.mark.parametrize("seed", range(5))
def test_box_qp_parity(seed):
    Q, c, w = _box_problem(seed)
    u1, u2 = np.zeros_like(c), np.zeros_like(c)
    s1 = py.box_qp_cd(Q, c, w, u1, 1e-14, 100000)
    s2 = cy.box_qp_cd(Q, c, w, u2, 1e-14, 100000)
    assert s1 == s2
    assert np.max(np.abs(u1 - u2)) < 1e-12


@needs_cython
@pytest.mark.parametrize("omega", [0.0, 0.5, 3.0, 50.0])
def test_block_solve_parity(omega):
    g = np.random.default_rng(3)
    M = g.normal(size=(4, 4))
    lam, vec = np.linalg.eigh(M @ M.T + 0.05 * np.eye(4))
    grad = g.normal(size=4) * 5
    o1, o2 = np.empty(4), np.empty(4)
    py.block_solve(grad, lam, vec, omega, o1)
    cy.block_solve(grad, lam, vec, omega, o2)
    assert np.max(np.abs(o1 - o2)) < 1e-12
    # the block optimum solves (H + omega/||beta|| I) beta = g
    H = (vec * lam) @ vec.T
    nb = np.linalg.norm(o1)
    if nb > 0:
        assert np.allclose((H + omega / nb * np.eye(4)) @ o1, grad, atol=1e-8)
    else:
        assert np.linalg.norm(grad) <= omega


@needs_cython
@pytest.mark.parametrize("seed", range(4))
def test_group_bcd_parity(seed):
    g = np.random.default_rng(seed)
    groups, k = 8, 2
    X = g.normal(size=(60, groups * k))
    y = X[:, :4] @ np.array([1.0, -1.0, 0.5, 2.0]) + g.normal(size=60)
    G, b = X.T @ X, X.T @ y
    starts = np.arange(groups, dtype=np.intp) * k
    sizes = np.full(groups, k, dtype=np.intp)
    omegas = np.full(groups, 6.0)
    evals, evecs = nm._block_eigs(G, starts, sizes)
    b1, b2 = np.zeros(groups * k), np.zeros(groups * k)
    n1 = py.group_bcd(G, b, starts, sizes, omegas, evals, evecs, b1, 1e-12, 10000)
    n2 = cy.group_bcd(G, b, starts, sizes, omegas, evals, evecs, b2, 1e-12, 10000)
    assert n1 == n2
    assert np.max(np.abs(b1 - b2)) < 1e-10


@needs_cython
def test_solvers_agree_across_backends():
    g = np.random.default_rng(9)
    d = 6
    X = g.normal(size=(20, d))
    y = g.normal(size=20)
    prob = nm.GenLassoProblem(X, y, nm.difference_operator(d), np.full(d - 1, 0.7))
    a = nm.solve_generalized_lasso(prob, tol=1e-10, kernels=py)
    c = nm.solve_generalized_lasso(prob, tol=1e-10, kernels=cy)
    assert np.max(np.abs(a - c)) < 1e-10
    labels = np.repeat(np.arange(5), 2)
    Z = g.normal(size=(50, 10))
    resp = Z[:, :2] @ [2.0, -1.0] + g.normal(size=50)
    r1 = nm.group_scad_regression(Z, resp, labels, 10.0, kernels=py)
    r2 = nm.group_scad_regression(Z, resp, labels, 10.0, kernels=cy)
    assert np.max(np.abs(r1.coef - r2.coef)) < 1e-10
