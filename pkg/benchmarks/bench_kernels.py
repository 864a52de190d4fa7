"""Time the SMD kernels under the numba and numpy backends.

The backend is fixed at import time, so each backend runs in its own
subprocess with ``SMDRATE_DISABLE_NUMBA`` set accordingly. Compile time is
excluded by a warm-up call.

    python benchmarks/bench_kernels.py [--N 100000] [--repeats 3]
"""
import argparse
import json
import os
import subprocess
import sys
import time

CASES = [
    ("phase-retrieval", "euclidean"),
    ("phase-retrieval", "entropy"),
    ("sparse-ncvx-regression", "euclidean"),
    ("entropy-toy", "entropy"),
]


def worker(N, repeats):
    import numpy as np

    from smdrate import backend, make_benchmark
    from smdrate.kernels import abs_quad_values
    from smdrate.smd import RunConfig, Schedule, smd_run

    out = {"backend": backend(), "timings": {}}
    for name, geo in CASES:
        b = make_benchmark(name, geometry=geo)
        run = lambda n: smd_run(b.objective, b.geometry,
                                RunConfig(n, Schedule.constant(0.05), b.x0, seed=1, store="light"))
        run(10)
        best = np.inf
        for _ in range(repeats):
            t = time.perf_counter()
            tr = run(N)
            best = min(best, time.perf_counter() - t)
        out["timings"][f"smd {name}/{geo}"] = best
        out.setdefault("checksums", {})[f"{name}/{geo}"] = float(np.sum(tr.x_R))
    b = make_benchmark("phase-retrieval")
    P = np.random.default_rng(0).standard_normal((N, b.geometry.dim))
    abs_quad_values(b.objective.structure.A, b.objective.structure.b, P[:10])
    best = np.inf
    for _ in range(repeats):
        t = time.perf_counter()
        abs_quad_values(b.objective.structure.A, b.objective.structure.b, P)
        best = min(best, time.perf_counter() - t)
    out["timings"]["batched phase-retrieval values"] = best
    return out


def run_backend(disable, N, repeats):
    env = dict(os.environ, SMDRATE_DISABLE_NUMBA="1" if disable else "0")
    cmd = [sys.executable, __file__, "--worker", "--N", str(N), "--repeats", str(repeats)]
    res = subprocess.run(cmd, env=env, capture_output=True, text=True, check=True)
    return json.loads(res.stdout)


def main():
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--N", type=int, default=100_000)
    p.add_argument("--repeats", type=int, default=3)
    p.add_argument("--worker", action="store_true", help=argparse.SUPPRESS)
    args = p.parse_args()
    if args.worker:
        json.dump(worker(args.N, args.repeats), sys.stdout)
        return
    fast = run_backend(False, args.N, args.repeats)
    slow = run_backend(True, args.N, args.repeats)
    print(f"N = {args.N}, best of {args.repeats}")
    print(f"{'case':45s} {fast['backend']:>10s} {slow['backend']:>10s} {'speedup':>8s}")
    for key, t_fast in fast["timings"].items():
        t_slow = slow["timings"][key]
        print(f"{key:45s} {t_fast:10.4f} {t_slow:10.4f} {t_slow / t_fast:8.1f}x")
    for key, v in fast["checksums"].items():
        w = slow["checksums"][key]
        print(f"checksum {key}: |diff| = {abs(v - w):.2e}")


if __name__ == "__main__":
    main()
