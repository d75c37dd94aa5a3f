"""Compiled vs NumPy simplex kernel.

Two workloads: dense random LPs from a slack basis, and a full pair proxy on a
planted default-sized instance (250 training feature vectors in R^8, 10 classes,
100 probes).  Run with ``python benchmarks/bench_simplex.py``.
"""
import argparse
import time

import numpy as np

from weaknesslab import fcv, simplex


def random_lps(n_lps, m, n, seed):
    rng = np.random.Generator(np.random.PCG64(seed))
    for _ in range(n_lps):
        A = rng.uniform(-1, 2, (m, n))
        cols = np.vstack([A.T, np.eye(m)])
        cost = np.concatenate([rng.uniform(-2, 1, n), np.zeros(m)])
        yield cols, rng.uniform(0.5, 3, m), cost, np.arange(n, n + m, dtype=np.int64)


def bench_random(kernel, n_lps, m, n, seed):
    pivots = 0
    t0 = time.perf_counter()
    for cols, rhs, cost, basis in random_lps(n_lps, m, n, seed):
        pivots += kernel(cols, rhs, cost, basis, 50 * (m + n))[4]
    return time.perf_counter() - t0, pivots


def planted_instance(seed, n_train=250, n_probe=100, d=8, K=10):
    rng = np.random.Generator(np.random.PCG64(seed))
    W, b = rng.standard_normal((K, d)), rng.standard_normal(K)
    f = np.maximum(rng.standard_normal((n_train, d)), 0)
    y = np.argmax(f @ W.T + b, axis=1)
    return fcv.FeatureMatrix(f, y, np.maximum(rng.standard_normal((n_probe, d)), 0), K)


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.split("\n")[0])
    p.add_argument("--lps", type=int, default=50)
    p.add_argument("--m", type=int, default=82)
    p.add_argument("--n", type=int, default=120)
    p.add_argument("--probes", type=int, default=100)
    p.add_argument("--seed", type=int, default=0)
    args = p.parse_args(argv)

    print(f"kernels available: {sorted(simplex.KERNELS)} (default {simplex.BACKEND})")
    fm = planted_instance(args.seed, n_probe=args.probes)
    results = {}
    for name in sorted(simplex.KERNELS):
        kernel = simplex.get_kernel(name)
        secs, pivots = bench_random(kernel, args.lps, args.m, args.n, args.seed)
        pp = fcv.pair_proxy(fm, kernel=name)
        results[name] = (secs, pp.seconds, pp.total)
        print(f"{name:>7}: random LPs {args.lps} x ({args.m}x{args.m + args.n}) {secs:7.3f} s, "
              f"{pivots / secs:9.0f} pivots/s | pair proxy {pp.seconds:7.3f} s "
              f"({pp.n_lps} LPs, {pp.n_shortcut} pool hits, total {pp.total})")
    if len(results) == 2:
        (cs, cp, ct), (ps, pp_s, pt) = results["cython"], results["python"]
        assert ct == pt, "kernels disagree on the pair proxy"
        print(f"speed-up: random LPs {ps / cs:.1f}x, pair proxy {pp_s / cp:.1f}x")


if __name__ == "__main__":
    main()
