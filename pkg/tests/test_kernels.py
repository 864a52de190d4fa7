import json
import os
import subprocess
import sys

import numpy as np
import pytest

from smdrate import kernels
from smdrate._accel import USE_NUMBA, backend
from smdrate.benchmarks import make_benchmark
from smdrate.smd import RunConfig, Schedule, smd_run

CASES = [("phase-retrieval", "euclidean"), ("phase-retrieval", "entropy"),
         ("sparse-ncvx-regression", "euclidean"), ("entropy-toy", "entropy")]

RUN_SNIPPET = """
import json, sys
import numpy as np
from smdrate import backend, make_benchmark
from smdrate.smd import RunConfig, Schedule, smd_run
out = {"backend": backend(), "x": {}}
for name, geo in json.loads(sys.argv[1]):
    b = make_benchmark(name, geometry=geo)
    tr = smd_run(b.objective, b.geometry, RunConfig(500, Schedule.constant(0.2), b.x0, seed=2, backend="kernel"))
    out["x"][name + "/" + geo] = tr.all_iterates[-1].tolist()
print(json.dumps(out))
"""


def _inputs(rng, n=6, m=15, N=50):
    A = rng.standard_normal((m, n))
    b = (A @ rng.standard_normal(n)) ** 2
    return A, b, np.full(N, 0.05), rng.integers(0, m, N)


def test_backend_flag_in_process():
    assert backend() == ("numba" if USE_NUMBA else "numpy")


def test_loop_and_vectorized_versions_agree():
    rng = np.random.default_rng(0)
    A, b, alphas, idx = _inputs(rng)
    x0 = rng.standard_normal(6) * 0.3
    for fn_loop, fn_np, args in [
        (kernels._pr_smd_euclid_loop, kernels._pr_smd_euclid_np, (A, b, x0, alphas, idx, 1.0, 0.01)),
        (kernels._pr_smd_euclid_loop, kernels._pr_smd_euclid_np, (A, b, x0, alphas, idx, np.inf, 0.0)),
        (kernels._pr_smd_entropy_loop, kernels._pr_smd_entropy_np, (A, b, np.full(6, 1 / 6), alphas, idx, 1e-12)),
        (kernels._cauchy_smd_box_loop, kernels._cauchy_smd_box_np,
         (A, b[:15], x0, alphas, idx, -np.ones(6), np.ones(6), 0.05)),
    ]:
        X1, g1 = fn_loop(*args)
        X2, g2 = fn_np(*args)
        assert np.max(np.abs(X1 - X2)) <= 1e-12 and np.max(np.abs(g1 - g2)) <= 1e-12
    c = rng.uniform(0, 1, 5)
    signs = rng.choice([-1.0, 1.0], (50, 5))
    X1, _ = kernels._toy_smd_loop(c, 0.5, np.full(5, 0.2), alphas, signs, 1e-12)
    X2, _ = kernels._toy_smd_np(c, 0.5, np.full(5, 0.2), alphas, signs, 1e-12)
    assert np.max(np.abs(X1 - X2)) <= 1e-12


def test_exported_kernels_match_reference_loops():
    rng = np.random.default_rng(1)
    A, b, alphas, idx = _inputs(rng)
    x0 = rng.standard_normal(6) * 0.3
    X1, _ = kernels.pr_smd_euclid(A, b, x0, alphas, idx, 1.0, 0.0)
    X2, _ = kernels._pr_smd_euclid_np(A, b, x0, alphas, idx, 1.0, 0.0)
    assert np.max(np.abs(X1 - X2)) <= 1e-12
    P = rng.standard_normal((40, 6))
    v = kernels.abs_quad_values(A, b, P)
    ref = np.mean(np.abs((P @ A.T) ** 2 - b), axis=1)
    assert np.allclose(v, ref, rtol=1e-13, atol=0)


@pytest.mark.skipif(not USE_NUMBA, reason="numba not active in this process")
def test_numpy_fallback_in_subprocess_matches_numba():
    env = dict(os.environ, SMDRATE_DISABLE_NUMBA="1")
    res = subprocess.run([sys.executable, "-c", RUN_SNIPPET, json.dumps(CASES)], env=env,
                         capture_output=True, text=True, check=True)
    doc = json.loads(res.stdout)
    assert doc["backend"] == "numpy"
    for name, geo in CASES:
        b = make_benchmark(name, geometry=geo)
        tr = smd_run(b.objective, b.geometry, RunConfig(500, Schedule.constant(0.2), b.x0, seed=2, backend="kernel"))
        other = np.array(doc["x"][f"{name}/{geo}"])
        assert np.max(np.abs(tr.all_iterates[-1] - other)) <= 1e-12
