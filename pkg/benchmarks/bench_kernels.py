"""Time the numba and numpy kernel backends on representative inputs.

    python3 benchmarks/bench_kernels.py [--repeat 5]

Compilation happens in a warm-up call and is reported separately.
"""
import argparse
import time

import numpy as np

from decohist import _kernels


def cases(rng):
    vecs = rng.normal(size=(256, 1024)) + 1j * rng.normal(size=(256, 1024))
    labels = rng.integers(0, 8, size=1024).astype(np.int64)
    a = rng.normal(size=(1024, 64)) + 1j * rng.normal(size=(1024, 64))
    gram = np.ascontiguousarray(a.conj() @ a.T)
    w = np.ascontiguousarray(gram.diagonal().real)
    n = 9
    q, _ = np.linalg.qr(rng.normal(size=(n + 2, n + 2)) + 1j * rng.normal(size=(n + 2, n + 2)))
    v = q[:, :n].T
    bits = ((np.arange(1, 2**n)[:, None] >> np.arange(n)) & 1).astype(float)
    coefs = np.ascontiguousarray((bits @ v) @ np.linalg.pinv(v.T).T)
    gcoefs = np.ascontiguousarray(coefs @ (v.conj() @ v.T).T)
    norms2 = np.einsum("ij,ij->i", bits @ v.conj(), bits @ v).real
    rel = ((np.arange(1, 2**n)[:, None] & np.arange(1, 2**n)[None, :]) == np.arange(1, 2**n)[:, None])
    return {
        "split_masked 256x1024": ("split_masked", (vecs, labels, 8)),
        "offdiag_scan 1024^2": ("offdiag_scan", (gram, w, 1e-8, 1e-4, False)),
        "binomial_pmf n=5000": ("binomial_pmf", (0.3, 5000)),
        "part_matrix 511^2": ("part_matrix", (coefs, gcoefs, norms2, 1e-6, 1e-6, 1e-14)),
        "fusion_scan 511^2": ("fusion_scan", (rel,)),
    }


def best_of(fn, args, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn(*args)
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if _kernels.NUMBA is None:
        raise SystemExit("numba is not importable; nothing to compare")
    rng = np.random.default_rng(0)
    table = cases(rng)
    compile_time = 0.0
    for name, (kernel, kargs) in table.items():
        t = time.perf_counter()
        getattr(_kernels.NUMBA, kernel)(*kargs)
        compile_time += time.perf_counter() - t
    print(f"numba warm-up (compile or cache load): {compile_time:.2f} s")
    print(f"{'kernel':<26}{'numpy ms':>12}{'numba ms':>12}{'speed-up':>10}")
    for name, (kernel, kargs) in table.items():
        tn = best_of(getattr(_kernels.NUMPY, kernel), kargs, args.repeat)
        tb = best_of(getattr(_kernels.NUMBA, kernel), kargs, args.repeat)
        print(f"{name:<26}{tn * 1e3:>12.2f}{tb * 1e3:>12.2f}{tn / tb:>9.1f}x")
    print(f"active backend: {_kernels.BACKEND} (set DECOHIST_DISABLE_NUMBA=1 for numpy)")


if __name__ == "__main__":
    main()
