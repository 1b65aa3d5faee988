import itertools

import numpy as np
import pytest

from idma import numerics as nm
from idma.errors import InvalidShape
from idma.model import PanelData


# ---- thin SVD and singular value shrinkage

def test_thin_svd_identity_and_diagonal():
    assert np.allclose(nm.thin_svd(np.eye(3), 3).d, [1, 1, 1])
    assert np.allclose(nm.thin_svd(np.diag([3.0, 2.0, 1.0]), 2).d, [3, 2])


def test_thin_svd_reconstructs_full_rank(rng):
    w = rng.normal(size=(10, 6))
    assert np.max(np.abs(nm.thin_svd(w, 6).reconstruct() - w)) < 1e-8


def test_thin_svd_sign_convention(rng):
    w = rng.normal(size=(8, 5))
    a, b = nm.thin_svd(w), nm.thin_svd(-w)
    # largest entry of each right vector is positive, so the flip moves to u
    assert np.all(a.v[np.argmax(np.abs(a.v), axis=0), range(5)] > 0)
    assert np.allclose(a.v, b.v) and np.allclose(a.u, -b.u)


def test_shrink_simple_cases(rng):
    assert np.allclose(nm.singular_value_shrink(np.diag([3.0, 1.0]), 2.0), np.diag([1.0, 0.0]))
    w = rng.normal(size=(5, 4))
    assert np.max(np.abs(nm.singular_value_shrink(w, 0.0) - w)) < 1e-10
    with pytest.raises(InvalidShape):
        nm.singular_value_shrink(w, -1.0)


def prox_optimality_gap(w, x, nu):
    """Distance of W - X from the nuclear-norm subdifferential scaled by nu at X.

    Built from an independent full SVD of X: the subgradient is U V' + R
    with R orthogonal to both singular spaces and ||R||_op <= 1.
    """
    u, s, vt = np.linalg.svd(x)
    r = int(np.sum(s > 1e-10 * max(1.0, s[0] if s.size else 1.0)))
    g = (w - x) / nu
    U, V = u[:, :r], vt[:r].T
    main = U @ V.T
    resid = g - main
    pu = np.eye(w.shape[0]) - U @ U.T
    pv = np.eye(w.shape[1]) - V @ V.T
    inner = pu @ resid @ pv
    outer = resid - inner
    op = np.linalg.norm(inner, 2) if inner.size else 0.0
    return max(float(np.max(np.abs(outer))), max(op - 1.0, 0.0))


def test_shrink_matches_prox_oracle():
    # 100 random matrices of varied shape and threshold
    g = np.random.default_rng(7)
    worst = 0.0
    for _ in range(100):
        m, n = g.integers(2, 9, size=2)
        w = g.normal(size=(m, n)) * g.uniform(0.5, 3)
        nu = float(g.uniform(0.05, 2.0))
        x = nm.singular_value_shrink(w, nu)
        worst = max(worst, prox_optimality_gap(w, x, nu))
        sv_w = np.linalg.svd(w, compute_uv=False)
        sv_x = np.linalg.svd(x, compute_uv=False)
        assert np.allclose(sv_x, np.maximum(sv_w - nu, 0), atol=1e-8)
        assert abs(nm.nuclear_norm(x) - np.maximum(sv_w - nu, 0).sum()) < 1e-8
    assert worst < 1e-8


# ---- fixed point continuation

def _quadratic(target, weights):
    def loss(a):
        return float(np.sum(weights * (a - target) ** 2))

    def grad(a):
        return 2 * weights * (a - target)

    return loss, grad, 2 * float(weights.max())


def test_fpc_unpenalized_is_least_squares(rng):
    target = rng.normal(size=(6, 5))
    loss, grad, lip = _quadratic(target, rng.uniform(0.5, 2, size=(6, 5)))
    res = nm.fpc_nuclear(grad, lip, 0.0, np.zeros_like(target), tol=1e-14, max_iter=5000, loss=loss)
    assert np.max(np.abs(res.iterate - target)) < 1e-6


def test_fpc_zero_above_gradient_scale(rng):
    m = rng.normal(size=(12, 6))
    x = rng.uniform(1, 2, size=12)
    loss, grad, lip = nm.mediator_loss_oracle(m, x)
    # A = 0 is a fixed point iff ||grad(0)||_op <= lambda_r
    lam = np.linalg.norm(grad(np.zeros_like(m)), 2) * 1.001
    res = nm.fpc_nuclear(grad, lip, lam, m / x[:, None], tol=1e-12, max_iter=2000, loss=loss)
    assert np.all(res.iterate == 0)


def test_fpc_monotone_and_planted_recovery():
    g = np.random.default_rng(11)
    truth = g.normal(size=(20, 2)) @ g.normal(size=(2, 15))
    x = g.uniform(1, 2, size=20)
    m = truth * x[:, None]
    loss, grad, lip = nm.mediator_loss_oracle(m, x)
    res = nm.fpc_nuclear(grad, lip, 0.05, np.zeros_like(truth), tol=1e-12, max_iter=5000, loss=loss)
    obj = np.array(res.objectives)
    assert np.all(np.diff(obj) <= 1e-10 * max(1.0, obj[0]))
    err = np.linalg.norm(res.iterate - truth) / np.linalg.norm(truth)
    assert err < 0.05
    # fixed point condition
    tau = 1 / lip
    fp = nm.singular_value_shrink(res.iterate - tau * grad(res.iterate), tau * 0.05)
    assert np.max(np.abs(fp - res.iterate)) < 1e-5


# ---- SCAD

def test_scad_branches_and_knots():
    lam, a = 0.8, 3.7
    assert nm.scad_derivative(0.5 * lam, lam, a) == pytest.approx(lam)
    assert nm.scad_derivative(5 * lam, lam, a) == 0.0
    for knot in (lam, a * lam):
        left = nm.scad_value(knot * (1 - 1e-13), lam, a)
        right = nm.scad_value(knot * (1 + 1e-13), lam, a)
        assert abs(left - right) < 1e-12
    assert nm.scad_value(10.0, lam, a) == pytest.approx(lam ** 2 * (a + 1) / 2)
    with pytest.raises(InvalidShape):
        nm.scad_value(1.0, 1.0, 2.0)


def test_scad_numerical_derivative():
    lam, a = 1.3, 3.7
    h = 1e-6
    for t in np.linspace(0.05, 6, 57):
        if min(abs(t - lam), abs(t - a * lam)) < 1e-3:
            continue
        num = (nm.scad_value(t + h, lam, a) - nm.scad_value(t - h, lam, a)) / (2 * h)
        assert abs(num - nm.scad_derivative(t, lam, a)) < 1e-5


# ---- generalized lasso

def test_genlasso_zero_weights_is_ols(rng):
    X = rng.normal(size=(15, 5))
    y = rng.normal(size=15)
    D = nm.difference_operator(5)
    beta = nm.solve_generalized_lasso(nm.GenLassoProblem(X, y, D, np.zeros(4)))
    assert np.max(np.abs(beta - np.linalg.lstsq(X, y, rcond=None)[0])) < 1e-8


def _chain_objective(X, y, w, beta):
    return 0.5 * float(np.sum((y - X @ beta) ** 2)) + float(np.sum(w * np.abs(np.diff(beta))))


def enumeration_oracle(X, y, w):
    """Exhaustive search over fusion patterns and jump signs of a 1-D chain.

    For a fixed pattern the coefficients are piecewise constant; with the
    jump signs fixed the penalty is linear, so each (pattern, signs) pair
    has a closed-form minimizer. The true objective at that point bounds
    the optimum from above and is tight for the optimal pair.
    """
    d = X.shape[1]
    best, best_val = None, np.inf
    for fused in itertools.product([0, 1], repeat=d - 1):
        blocks = np.concatenate([[0], np.cumsum(1 - np.array(fused))])
        P = np.zeros((d, blocks[-1] + 1))
        P[np.arange(d), blocks] = 1.0
        jumps = [e for e in range(d - 1) if not fused[e]]
        for signs in itertools.product([-1.0, 1.0], repeat=len(jumps)):
            lin = np.zeros(P.shape[1])
            for e, s in zip(jumps, signs):
                lin[blocks[e + 1]] += w[e] * s
                lin[blocks[e]] -= w[e] * s
            Z = X @ P
            theta = np.linalg.solve(Z.T @ Z, Z.T @ y - lin)
            beta = P @ theta
            val = _chain_objective(X, y, w, beta)
            if val < best_val:
                best, best_val = beta, val
    return best, best_val


@pytest.mark.parametrize("d", [3, 4, 5, 6])
def test_genlasso_matches_pattern_enumeration(d):
    g = np.random.default_rng(100 + d)
    for trial in range(5):
        X = np.eye(d) if trial == 0 else g.normal(size=(d + 3, d))
        y = X @ np.repeat(g.normal(size=2), [d // 2, d - d // 2]) + 0.3 * g.normal(size=X.shape[0])
        w = g.uniform(0.1, 1.0, size=d - 1)
        beta = nm.solve_generalized_lasso(nm.GenLassoProblem(X, y, nm.difference_operator(d), w),
                                          tol=1e-10)
        ref, ref_val = enumeration_oracle(X, y, w)
        assert np.max(np.abs(beta - ref)) < 1e-6
        assert _chain_objective(X, y, w, beta) <= ref_val + 1e-9


def test_genlasso_large_weights_constrained_ls(rng):
    d = 6
    X = rng.normal(size=(20, d))
    y = rng.normal(size=20)
    beta = nm.solve_generalized_lasso(nm.GenLassoProblem(X, y, nm.difference_operator(d),
                                                         np.full(d - 1, 1e4)), tol=1e-9)
    # equality-constrained LS: all coordinates equal
    one = np.ones(d)
    c = float((X @ one) @ y / ((X @ one) @ (X @ one)))
    assert np.max(np.abs(beta - c)) < 1e-6


def test_genlasso_kkt_sign_condition(rng):
    d = 8
    X = rng.normal(size=(25, d))
    y = X @ np.repeat([1.0, -1.0], 4) + 0.5 * rng.normal(size=25)
    D = nm.difference_operator(d)
    w = np.full(d - 1, 1.5)
    res = nm.solve_genlasso_gram(X.T @ X, X.T @ y, D, w, tol=1e-9)
    Db = D @ res.beta
    moving = np.abs(Db) > 1e-9
    # dual variable sits at the sign-matched bound wherever the difference is nonzero
    assert np.allclose(res.dual[moving], w[moving] * np.sign(Db[moving]), atol=1e-8)
    assert np.all(np.abs(res.dual) <= w + 1e-12)


def test_genlasso_rejects_bad_weights(rng):
    with pytest.raises(InvalidShape):
        nm.GenLassoProblem(np.eye(3), np.ones(3), nm.difference_operator(3), [-1.0, 1.0])
    with pytest.raises(InvalidShape):
        nm.GenLassoProblem(np.eye(3), np.ones(3), nm.difference_operator(3), [1.0])


# ---- group SCAD

def test_group_scad_unpenalized_is_ls(rng):
    X = rng.normal(size=(40, 6))
    y = rng.normal(size=40)
    res = nm.group_scad_regression(X, y, [0, 0, 1, 1, 2, 2], 0.0)
    assert np.max(np.abs(res.coef - np.linalg.lstsq(X, y, rcond=None)[0])) < 1e-8


def scalar_scad_oracle(zn, lam, a):
    """argmin_t>=0 (t - zn)^2 + p(t) by grid search then golden-section refinement."""
    t = np.linspace(0, zn + 1, 400_001)
    f = (t - zn) ** 2 + nm.scad_value(t, lam, a)
    j = int(np.argmin(f))
    lo, hi = t[max(j - 1, 0)], t[min(j + 1, t.size - 1)]
    phi = (np.sqrt(5) - 1) / 2
    g = lambda s: (s - zn) ** 2 + float(nm.scad_value(s, lam, a))
    for _ in range(120):
        m1, m2 = hi - phi * (hi - lo), lo + phi * (hi - lo)
        if g(m1) <= g(m2):
            hi = m2
        else:
            lo = m1
    return 0.5 * (lo + hi)


@pytest.mark.parametrize("zn", [0.3, 0.6, 1.2, 2.0, 3.0, 4.5, 8.0])
def test_group_scad_single_group_orthonormal(zn):
    # covers the zero, soft-threshold, interpolation and flat regions
    g = np.random.default_rng(int(zn * 10))
    X, _ = np.linalg.qr(g.normal(size=(30, 3)))
    u = g.normal(size=3)
    u /= np.linalg.norm(u)
    res = nm.group_scad_regression(X, X @ (zn * u), [0, 0, 0], 1.0, 3.7, tol=1e-12, lla_rounds=50)
    t = scalar_scad_oracle(zn, 1.0, 3.7)
    assert abs(np.linalg.norm(res.coef) - t) < 1e-6
    if t > 1e-6:
        assert np.allclose(res.coef / np.linalg.norm(res.coef), u, atol=1e-8)


def test_group_scad_support_recovery_and_exact_zeros():
    g = np.random.default_rng(5)
    n, groups, k = 400, 20, 2
    X = g.normal(size=(n, groups * k))
    beta = np.zeros(groups * k)
    active = [1, 6, 11, 17]
    for j in active:
        beta[j * k:(j + 1) * k] = g.choice([-1, 1], size=k) * g.uniform(1.5, 2.5, size=k)
    y = X @ beta + 0.5 * g.normal(size=n)
    labels = np.repeat(np.arange(groups), k)
    res = nm.group_scad_regression(X, y, labels, 60.0, tol=1e-10)
    norms = np.linalg.norm(res.coef.reshape(groups, k), axis=1)
    assert list(np.flatnonzero(norms > 0)) == active
    inactive = np.setdiff1d(np.arange(groups), active)
    assert np.all(res.coef.reshape(groups, k)[inactive] == 0.0)
    # stationarity on the active groups: 2 X_j'(y - X beta) = w_j beta_j / ||beta_j||
    grad = 2 * X.T @ (y - X @ res.coef)
    for j in active:
        bj = res.coef[j * k:(j + 1) * k]
        wj = nm.scad_derivative(np.linalg.norm(bj), 60.0)
        assert np.allclose(grad[j * k:(j + 1) * k], wj * bj / np.linalg.norm(bj), atol=1e-6)


def test_group_scad_lla_objective_nonincreasing(rng):
    X = rng.normal(size=(60, 12))
    y = X[:, :4] @ np.array([1.0, -0.5, 0.8, 0.3]) + rng.normal(size=60)
    res = nm.group_scad_regression(X, y, np.repeat(np.arange(6), 2), 8.0, lla_rounds=6)
    obj = np.array(res.objectives)
    assert np.all(np.diff(obj) <= 1e-9 * max(1.0, abs(obj[0])))


def test_group_scad_unpenalized_columns(rng):
    # negative labels are never shrunk, even under a huge penalty
    X = rng.normal(size=(50, 4))
    y = 3 * X[:, 0] + rng.normal(size=50)
    res = nm.group_scad_regression(X, y, [-1, 0, 0, 1], 1e6)
    assert res.coef[0] == pytest.approx(np.linalg.lstsq(X[:, :1], y, rcond=None)[0][0], abs=1e-8)
    assert np.all(res.coef[1:] == 0)


# ---- losses

def test_losses_match_naive_loops(rng):
    n, T, p = 4, 3, 5
    panel = PanelData(rng.normal(size=(n, T)), rng.normal(size=(n, T, p)), rng.uniform(1, 2, (n, T)))
    alpha = rng.normal(size=(n, T, p))
    beta = rng.normal(size=(n, T, p))
    theta = rng.normal(size=(n, T))
    lm = ly = 0.0
    for i in range(n):
        for t in range(T):
            fit = theta[i, t] * panel.x[i, t]
            for k in range(p):
                lm += (panel.m[i, t, k] - alpha[i, t, k] * panel.x[i, t]) ** 2
                fit += beta[i, t, k] * panel.m[i, t, k]
            ly += (panel.y[i, t] - fit) ** 2
    assert abs(nm.loss_mediator(alpha, panel) - lm) < 1e-10
    assert abs(nm.loss_outcome(theta, beta, panel) - ly) < 1e-10


def test_loss_mediator_trivial_cases(rng):
    panel = PanelData(rng.normal(size=(3, 2)), rng.normal(size=(3, 2, 4)), rng.uniform(1, 2, (3, 2)))
    assert nm.loss_mediator(panel.m / panel.x[:, :, None], panel) < 1e-20
    assert nm.loss_mediator(np.zeros((3, 2, 4)), panel) == pytest.approx(float(np.sum(panel.m ** 2)))

