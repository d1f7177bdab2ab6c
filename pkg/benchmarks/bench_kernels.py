"""Time the compiled kernels against their numpy fallbacks.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Each kernel is warmed up once (this triggers numba compilation) and then
timed ``--repeat`` times. The best time per backend is reported, together
with the largest difference between the two outputs.
"""
import argparse
import time

import numpy as np

from benignlab import kernels


def _cases(rng):
    v = rng.standard_normal(200_000)
    yield "project_l1_ball d=2e5", (v, 50.0)

    A = rng.standard_normal((16, 16))
    yield "max_sign_quadratic d=16", (A @ A.T,)

    n, d = 20, 4096
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal(n)
    proj = X.T @ np.linalg.inv(X @ X.T)
    yield "admm_bp n=20 d=4096, 200 steps", (X, proj, Y, None, None, None, 1.0, 200, 1e-14, 1e-14)

    n, d = 6, 60
    X = rng.standard_normal((n, d))
    Y = rng.standard_normal(n)
    proj = X.T @ np.linalg.inv(X @ X.T)
    S = np.diag(rng.exponential(size=d))
    w0 = proj @ Y
    yield "pga_l1 n=6 d=60", (w0, S, np.zeros(d), X, proj, Y, 2 * np.abs(w0).sum(), 0.05, 100, 200, 0.0)


def _call(impl, name, args):
    fn = getattr(impl, name.split()[0])
    if name.startswith("admm_bp"):
        # the ADMM kernel updates its iterates in place, so each call gets fresh ones
        X, proj, Y, _, _, _, *rest = args
        d = X.shape[1]
        x, z, u = np.zeros(d), np.zeros(d), np.zeros(d)
        fn(X, proj, Y, x, z, u, *rest)
        return z
    return np.asarray(fn(*args))


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=5)
    parser.add_argument("--seed", type=int, default=0)
    args = parser.parse_args()
    if kernels.NUMBA is None:
        raise SystemExit("numba is not installed; nothing to compare")

    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':34s} {'numpy':>10s} {'numba':>10s} {'speedup':>8s} {'max diff':>10s}")
    for name, case in _cases(rng):
        best, outs = {}, {}
        for impl in (kernels.NUMPY, kernels.NUMBA):
            outs[impl.name] = _call(impl, name, case)
            times = []
            for _ in range(args.repeat):
                t0 = time.perf_counter()
                _call(impl, name, case)
                times.append(time.perf_counter() - t0)
            best[impl.name] = min(times)
        diff = float(np.max(np.abs(outs["numpy"] - outs["numba"])))
        print(f"{name:34s} {best['numpy']:10.4f} {best['numba']:10.4f} "
              f"{best['numpy'] / best['numba']:8.1f} {diff:10.2e}")


if __name__ == "__main__":
    main()
