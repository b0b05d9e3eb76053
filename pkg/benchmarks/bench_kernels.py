"""Benchmark the numba kernels against the numpy/scipy fallback.

Runs the same crossing-probability and cluster-survey workloads through
both backends, checks the counts agree bit for bit, and prints a timing
table.  Usage:

    python benchmarks/bench_kernels.py [--size 32] [--trials 2000]
"""

import argparse
import time

from hyperperc import _kernels, hypermap, ncpart, percsim as ps


def time_backend(name, fn, repeats=3):
    _kernels.set_backend(name)
    fn()  # warm-up (JIT compile / scipy import)
    best = float("inf")
    for _ in range(repeats):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--size", type=int, default=32)
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--seed", type=int, default=7)
    args = ap.parse_args()

    tri = hypermap.builtin("tri")
    window = ps.Window(tri, args.size, args.size)
    torus = ps.Window(tri, args.size, args.size, "torus")
    vectors = {0: ncpart.competition_vector(0.5)}
    rect = ps.default_rect(window)

    workloads = {
        "crossing": lambda: ps.estimate_crossing(
            window, vectors, rect, "h", args.trials, args.seed).hits,
        "survey": lambda: tuple(ps.cluster_survey(
            torus, vectors, args.trials, args.seed).sizes.tolist()),
    }

    backends = _kernels.available_backends()
    print(f"size={args.size}x{args.size} cells, trials={args.trials}, "
          f"backends={backends}")
    print(f"{'workload':<10} " + " ".join(f"{b:>12}" for b in backends)
          + "   speedup")
    for wname, fn in workloads.items():
        times = {}
        outs = {}
        for b in backends:
            times[b], outs[b] = time_backend(b, fn)
        assert len(set(outs.values())) == 1, "backends disagree!"
        ratio = (times.get("numpy", times[backends[0]])
                 / times.get("numba", times[backends[0]]))
        print(f"{wname:<10} "
              + " ".join(f"{times[b] * 1e3:>10.1f}ms" for b in backends)
              + f"   {ratio:>6.1f}x")
    _kernels.set_backend(None)


if __name__ == "__main__":
    main()
