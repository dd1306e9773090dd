"""Time the SVD backends: compiled Jacobi kernel, its numpy fallback, LAPACK.

    python benchmarks/bench_kernels.py [--sizes 40x40,100x300] [--repeat 5]

Prints one line per (size, backend) with the best wall time and the
reconstruction error of the factorization.
"""
import argparse
import time

import numpy as np

from lrfd import _jacobi_py, _kernels
from lrfd.linalg import svd


def _jacobi_svd_with(kernel, a):
    tall = a if a.shape[0] >= a.shape[1] else a.T
    w, *_ = kernel(tall, tall.shape[0] * np.finfo(float).eps, 100 * tall.shape[1])
    s = np.linalg.norm(w, axis=0)
    return s


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n\n")[0])
    p.add_argument("--sizes", default="40x40,100x100,100x300,200x200")
    p.add_argument("--repeat", type=int, default=5)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    rng = np.random.default_rng(args.seed)
    backends = [("lapack", lambda a: svd(a, "lapack"))]
    if _kernels.BACKEND == "cython":
        backends.append(("jacobi-cython",
                         lambda a: _jacobi_svd_with(_kernels.jacobi_orthogonalize, a)))
    else:
        print("compiled kernel not built; only the fallback is timed")
    backends.append(("jacobi-python",
                     lambda a: _jacobi_svd_with(_jacobi_py.jacobi_orthogonalize, a)))

    print(f"{'size':>9} {'backend':>14} {'best ms':>10} {'max |ds|':>10}")
    for size in args.sizes.split(","):
        m, n = (int(x) for x in size.lower().split("x"))
        a = rng.standard_normal((m, n))
        ref = np.linalg.svd(a, compute_uv=False)
        for name, fn in backends:
            out = fn(a)
            s = out[1] if isinstance(out, tuple) else np.sort(out)[::-1]
            err = float(np.max(np.abs(s[: ref.size] - ref)))
            ms = 1e3 * best_time(lambda: fn(a), args.repeat)
            print(f"{size:>9} {name:>14} {ms:10.2f} {err:10.2e}")


if __name__ == "__main__":
    main()
