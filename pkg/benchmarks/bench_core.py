"""Compiled core vs numpy fallback on the hot kernels.

Run ``python benchmarks/bench_core.py [--repeat 5] [--threads 1]``. Each
kernel is timed on identical inputs under both backends and the outputs
are compared (bit-for-bit except the orthant weights, which may differ in
the last bits because the fallback uses BLAS dot products).
"""
import argparse
import time

import numpy as np

from persistlab import _fallback
from persistlab.covariance import gram_stationary
from persistlab.estimate import _conditional_form, _correlation_and_levels, _pivoted_cholesky
from persistlab.rng import stream_key

try:
    from persistlab import _core
except ImportError:  # extension not built
    _core = None


def _best(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def cases(threads):
    key = stream_key(1, "bench")
    rows, cols = 256, 4096

    def normals(mod):
        out = np.empty((rows, cols))
        return lambda: mod.fill_normals(out, key, 0, 0, threads), out

    scale = np.linspace(0.1, 1.0, cols // 2)

    def complex_fill(mod):
        out = np.empty((rows // 2, cols))
        return lambda: mod.fill_complex_scaled(out, scale, key, 0, threads), out

    xi = np.random.default_rng(0).standard_normal((2000, 4096))
    sig = np.ones(4096)

    def passage(mod):
        tau = np.empty(2000, dtype=np.int64)
        return lambda: mod.first_passage(xi, sig, 0.0, tau, threads), tau

    def passage_iid(mod):
        tau = np.empty(20000, dtype=np.int64)
        return lambda: mod.first_passage_iid(key, 0, sig, 0.0, tau, threads), tau

    C, b = _correlation_and_levels(gram_stationary("ou:alpha=1", 0.01, 1001), 0.0)
    L, perm = _pivoted_cholesky(C)
    A, d, start = _conditional_form(L)
    W = np.random.default_rng(1).random((1024, 1000))

    def genz(mod):
        out = np.empty(1024)
        return lambda: mod.genz_logweights(A, start, b[perm], d, W, out, threads), out

    return [("fill_normals 256x4096", normals, True),
            ("fill_complex_scaled 128x4096", complex_fill, True),
            ("first_passage 2000x4096", passage, True),
            ("first_passage_iid 20000 rows", passage_iid, True),
            ("genz_logweights 1024 pts, n=1001", genz, False)]


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--threads", type=int, default=1)
    args = ap.parse_args(argv)
    if _core is None:
        print("compiled extension not built; nothing to compare")
        return 1
    print(f"{'kernel':36s} {'compiled':>10s} {'fallback':>10s} {'speedup':>8s}  match")
    for name, make, exact in cases(args.threads):
        fc, oc = make(_core)
        fp, op = make(_fallback)
        tc, tp = _best(fc, args.repeat), _best(fp, args.repeat)
        same = np.array_equal(oc, op) if exact else np.allclose(oc, op, rtol=1e-12, atol=0)
        tag = ("identical" if exact else "to rounding") if same else "MISMATCH"
        print(f"{name:36s} {tc * 1e3:8.1f}ms {tp * 1e3:8.1f}ms {tp / tc:7.1f}x  {tag}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
