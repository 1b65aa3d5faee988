"""Time the compiled kernels against the pure-Python fallback.

    python benchmarks/bench_kernels.py [--repeat N]

Each kernel runs on the same inputs under both backends; the outputs are
compared before timing so a speedup never hides a wrong answer.
"""

import argparse
import timeit

import numpy as np

from idma import _backend
from idma import estimator as est
from idma import numerics as nm
from idma import simulation as sim
from idma.model import Hyperparams


def box_qp_case(seed=0, m=40):
    g = np.random.default_rng(seed)
    M = g.normal(size=(m, m))
    return M @ M.T + 0.1 * np.eye(m), 3 * g.normal(size=m), g.uniform(0.1, 2, size=m)


def group_case(seed=0, groups=60, k=2, n=300):
    g = np.random.default_rng(seed)
    X = g.normal(size=(n, groups * k))
    y = X[:, :8] @ g.normal(size=8) + g.normal(size=n)
    starts = np.arange(groups, dtype=np.intp) * k
    sizes = np.full(groups, k, dtype=np.intp)
    G = X.T @ X
    evals, evecs = nm._block_eigs(G, starts, sizes)
    return G, X.T @ y, starts, sizes, np.full(groups, 40.0), evals, evecs


def cases(kern):
    Q, c, w = box_qp_case()
    G, b, starts, sizes, om, ev, evec = group_case()

    def box():
        u = np.zeros_like(c)
        kern.box_qp_cd(Q, c, w, u, 1e-12, 100000)
        return u

    def bcd():
        beta = np.zeros(len(b))
        kern.group_bcd(G, b, starts, sizes, om, ev, evec, beta, 1e-10, 100000)
        return beta

    panel, _ = sim.generate_setting2(40, 30, seed=0)

    def fit():
        _backend.kernels = kern
        try:
            return est.fit_idma(panel, Hyperparams(lambda_f=3.0, c_f=1, seed=0)).coefficients.gamma
        finally:
            _backend.kernels = _backend.get_kernels()

    return {"box_qp_cd (m=40)": box, "group_bcd (60 groups)": bcd, "fit_idma (n=40, p=30)": fit}


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    py = _backend.get_kernels("python")
    try:
        cy = _backend.get_kernels("cython")
    except ImportError:
        raise SystemExit("compiled extension not built; run `pip install -e . --no-build-isolation`")
    py_cases, cy_cases = cases(py), cases(cy)
    print(f"{'kernel':<24}{'python s':>11}{'cython s':>11}{'speedup':>9}{'max diff':>11}")
    for name in py_cases:
        diff = float(np.max(np.abs(py_cases[name]() - cy_cases[name]())))
        tp = min(timeit.repeat(py_cases[name], number=1, repeat=args.repeat))
        tc = min(timeit.repeat(cy_cases[name], number=1, repeat=args.repeat))
        print(f"{name:<24}{tp:>11.4f}{tc:>11.4f}{tp / tc:>8.1f}x{diff:>11.1e}")


if __name__ == "__main__":
    main()
