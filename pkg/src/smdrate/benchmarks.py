"""Benchmark problem instances and their JSON serialization.

Three families:

``phase-retrieval``
    f(x) = (1/m) sum_i |<a_i, x>^2 - b_i| with a planted signal, b_i =
    <a_i, x*>^2 exactly, r = 0, so T_min = T(x*) = 0. Euclidean setup on an
    l2 ball of radius ``radius * ||x*||`` (default 1.25), or the entropy
    setup with x* in the simplex.
``sparse-ncvx-regression``
    f(x) = (1/m) sum_i log(1 + (<a_i, x> - b_i)^2), r = lam ||x||_1 on a box.
    T_min is not known.
``entropy-toy``
    f(x) = -sum_i x_i log x_i + <c, x> on the simplex, entropy setup. f + omega
    is linear so rho = 1 exactly; T_min = min_i c_i at a vertex. The oracle
    adds Rademacher noise of size ``sigma`` to c.

Constants come from the generated data:

* phase retrieval: rho = 2 lambda_max(A^T A) / m. Writing f = ||g(x)||_1 with
  g_i(x) = (<a_i, x>^2 - b_i) / m, the outer l1 norm is 1-Lipschitz and
  ||g(x) - g(y) - grad g(y)(x - y)||_1 = (x-y)^T A^T A (x-y) / m
  <= (2 lambda_max(A^T A) / m) * 1/2 ||x - y||^2, giving L_g. The same value
  is valid for the entropy setup because grad^2 omega >= I on the simplex.
  L^2 is the exact maximum over X of E||G||_*^2 (a convex quadratic in x).
* Cauchy loss: phi'' >= -1/4, so rho = lambda_max(A^T A) / (4m); |phi'| <= 1 so
  E||G||^2 <= mean_i ||a_i||^2.
"""
import json
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.special import xlogy

from . import kernels
from .geometry import DEFAULT_BOUNDARY_EPS, FeasibleSet, Geometry, entropy, euclidean
from .objective import BOUNDED_MOMENT, SRC, CompositeObjective, StochasticOracle, deterministic_oracle
from .regularizer import Regularizer

SCHEMA_VERSION = 1
BENCHMARKS = ("phase-retrieval", "sparse-ncvx-regression", "entropy-toy")
DEFAULT_GEOMETRY = {
    "phase-retrieval": "euclidean",
    "sparse-ncvx-regression": "euclidean",
    "entropy-toy": "entropy",
}
# phase retrieval: ball radius in units of ||x*||; regression: box half-width
DEFAULT_RADIUS = {"phase-retrieval": 1.25, "sparse-ncvx-regression": 2.0, "entropy-toy": 1.0}
SUPPORTED_GEOMETRIES = {
    "phase-retrieval": ("euclidean", "entropy"),
    "sparse-ncvx-regression": ("euclidean",),
    "entropy-toy": ("entropy",),
}


@dataclass(frozen=True)
class PhaseRetrievalData:
    A: np.ndarray
    b: np.ndarray

    @property
    def m(self):
        return self.A.shape[0]

    def value(self, x):
        u = self.A @ x
        return float(np.mean(np.abs(u * u - self.b)))

    def value_batch(self, X):
        return kernels.abs_quad_values(self.A, self.b, np.ascontiguousarray(X, dtype=float))

    def subgrad(self, x):
        u = self.A @ x
        w = np.sign(u * u - self.b) * 2.0 * u
        return (self.A.T @ w) / self.m

    def draw(self, rng, size):
        return rng.integers(0, self.m, size=size)

    def grad(self, x, i):
        a_i = self.A[i]
        u = float(a_i @ x)
        return np.sign(u * u - self.b[i]) * 2.0 * u * a_i


@dataclass(frozen=True)
class CauchyRegressionData:
    A: np.ndarray
    b: np.ndarray

    @property
    def m(self):
        return self.A.shape[0]

    def value(self, x):
        r = self.A @ x - self.b
        return float(np.mean(np.log1p(r * r)))

    def value_batch(self, X):
        R = np.atleast_2d(X) @ self.A.T - self.b
        return np.log1p(R * R).mean(axis=1)

    def smooth_grad(self, x):
        r = self.A @ x - self.b
        return self.A.T @ (2.0 * r / (1.0 + r * r)) / self.m

    subgrad = smooth_grad

    def draw(self, rng, size):
        return rng.integers(0, self.m, size=size)

    def grad(self, x, i):
        a_i = self.A[i]
        r = float(a_i @ x) - self.b[i]
        return (2.0 * r / (1.0 + r * r)) * a_i

    def smoothness(self):
        # |phi''| <= 2
        return 2.0 * float(np.linalg.eigvalsh(self.A.T @ self.A)[-1]) / self.m


@dataclass(frozen=True)
class EntropyToyData:
    c: np.ndarray
    sigma: float

    def value(self, x):
        return float(-np.sum(xlogy(x, x)) + self.c @ x)

    def value_batch(self, X):
        X = np.atleast_2d(X)
        return -xlogy(X, X).sum(axis=1) + X @ self.c

    def subgrad(self, x):
        return -np.log(x) - 1.0 + self.c

    def draw(self, rng, size):
        return (2.0 * rng.integers(0, 2, size=(size, self.c.size)) - 1.0)

    def grad(self, x, s):
        return -np.log(x) - 1.0 + self.c + self.sigma * s


@dataclass(frozen=True)
class Benchmark:
    """A problem instance: objective, geometry and replay metadata."""

    name: str
    params: dict
    objective: CompositeObjective
    geometry: Geometry
    x0: np.ndarray
    T_min: Optional[float]
    T_min_source: Optional[str]
    x_star: Optional[np.ndarray] = None
    meta: dict = field(default_factory=dict)

    @property
    def rho(self):
        return self.objective.rho

    @property
    def L(self):
        return self.objective.L

    def to_dict(self):
        return benchmark_to_dict(self)


def _objective_from_data(data, dim, rho, L, reg, mode, name):
    return CompositeObjective(
        dim=dim,
        f_value=data.value,
        f_value_batch=data.value_batch,
        f_subgrad=data.subgrad,
        oracle=StochasticOracle(data.draw, data.grad, name),
        rho=rho,
        L=L,
        reg=reg,
        oracle_mode=mode,
        name=name,
        structure=data,
    )


def _phase_retrieval(n, m, seed, geometry, radius, mode, boundary_eps, data=None):
    rng = np.random.default_rng(seed)
    if data is None:
        A = rng.standard_normal((m, n))
        if geometry == "euclidean":
            x_star = rng.standard_normal(n)
            x_star /= np.linalg.norm(x_star)
        else:
            x_star = rng.dirichlet(np.ones(n))
        b = (A @ x_star) ** 2
        if geometry == "euclidean":
            d = rng.standard_normal(n)
            x0 = d / np.linalg.norm(d) * np.linalg.norm(x_star)
        else:
            x0 = np.full(n, 1.0 / n)
    else:
        A, b, x_star, x0 = data
    pr = PhaseRetrievalData(A, b)
    rho = 2.0 * float(np.linalg.eigvalsh(A.T @ A)[-1]) / m
    if geometry == "euclidean":
        R = radius * float(np.linalg.norm(x_star))
        fs = FeasibleSet.ball(n, R)
        geom = euclidean(n, fs)
        # max_{||x|| <= R} (4/m) sum_i ||a_i||^2 <a_i, x>^2
        Q = 4.0 * (A.T * np.sum(A * A, axis=1)) @ A / m
        L = R * float(np.sqrt(np.linalg.eigvalsh(Q)[-1]))
        meta = {"radius": R}
    else:
        geom = entropy(n, boundary_eps)
        # convex quadratic x^T Q x is maximized over the simplex at a vertex
        Q = 4.0 * (A.T * np.max(np.abs(A), axis=1) ** 2) @ A / m
        L = float(np.sqrt(np.max(np.diag(Q))))
        meta = {}
    obj = _objective_from_data(pr, n, rho, L, Regularizer.zero(), mode, "phase-retrieval")
    meta.update({"lambda_max_AtA_over_m": rho / 2.0})
    return obj, geom, x0, 0.0, "planted", x_star, meta, (A, b)


def _sparse_regression(n, m, seed, lam, radius, mode, data=None):
    rng = np.random.default_rng(seed)
    if data is None:
        A = rng.standard_normal((m, n))
        x_star = np.zeros(n)
        k = max(1, n // 5)
        support = rng.choice(n, size=k, replace=False)
        x_star[support] = rng.choice([-1.0, 1.0], size=k)
        b = A @ x_star + 0.1 * rng.standard_normal(m)
        x0 = np.zeros(n)
    else:
        A, b, x_star, x0 = data
    cr = CauchyRegressionData(A, b)
    rho = float(np.linalg.eigvalsh(A.T @ A)[-1]) / (4.0 * m)
    L = float(np.sqrt(np.mean(np.sum(A * A, axis=1))))
    fs = FeasibleSet.box(-radius * np.ones(n), radius * np.ones(n))
    geom = euclidean(n, fs)
    obj = _objective_from_data(cr, n, rho, L, Regularizer.l1(lam), mode, "sparse-ncvx-regression")
    return obj, geom, x0, None, None, x_star, {"box_halfwidth": radius}, (A, b)


def _entropy_toy(n, seed, sigma, mode, boundary_eps, data=None):
    rng = np.random.default_rng(seed)
    c = rng.uniform(0.0, 1.0, n) if data is None else data[0]
    toy = EntropyToyData(c, sigma)
    geom = entropy(n, boundary_eps)
    # on the clipped simplex |-log x_j - 1 + c_j| <= -log(eps) - 1 + max c
    gmax = max(-np.log(boundary_eps) - 1.0 + float(c.max()), float(np.max(np.abs(c - 1.0))))
    L = gmax + sigma
    obj = _objective_from_data(toy, n, 1.0, L, Regularizer.zero(), mode, "entropy-toy")
    x0 = np.full(n, 1.0 / n)
    return obj, geom, x0, float(c.min()), "analytic", None, {}, (c,)


def make_benchmark(name, *, n=10, m=30, seed=0, geometry=None, lam=0.05, sigma=0.5,
                   radius=None, oracle_mode=BOUNDED_MOMENT, boundary_eps=DEFAULT_BOUNDARY_EPS,
                   _data=None):
    """Build a benchmark instance; the seed fixes all generated data.

    In ``SRC`` mode the recorded L is the stochastic-relative-continuity
    constant. For the shipped setups it is certified by the bounded-moment
    value because D(y, x) >= 1/2 ||y - x||^2.
    """
    if name not in BENCHMARKS:
        raise ValueError(f"unknown benchmark {name!r}; choose from {BENCHMARKS}")
    geometry = geometry or DEFAULT_GEOMETRY[name]
    if geometry not in SUPPORTED_GEOMETRIES[name]:
        raise ValueError(f"{name} does not support the {geometry} geometry")
    if oracle_mode not in (BOUNDED_MOMENT, SRC):
        raise ValueError(f"unknown oracle mode {oracle_mode!r}")
    if n < 1 or (name != "entropy-toy" and m < 1):
        raise ValueError("invalid dimensions")
    if name == "entropy-toy" and n < 2:
        raise ValueError("entropy-toy needs n >= 2")
    if radius is None:
        radius = DEFAULT_RADIUS[name]
    params = {"n": int(n), "seed": int(seed), "geometry": geometry, "oracle_mode": oracle_mode}
    if name == "phase-retrieval":
        out = _phase_retrieval(n, m, seed, geometry, radius, oracle_mode, boundary_eps, _data)
        params.update(m=int(m), radius=float(radius))
    elif name == "sparse-ncvx-regression":
        out = _sparse_regression(n, m, seed, lam, radius, oracle_mode, _data)
        params.update(m=int(m), lam=float(lam), radius=float(radius))
    else:
        out = _entropy_toy(n, seed, sigma, oracle_mode, boundary_eps, _data)
        params.update(sigma=float(sigma))
    if geometry == "entropy":
        params["boundary_eps"] = float(boundary_eps)
    obj, geom, x0, T_min, src, x_star, meta, raw = out
    meta = dict(meta)
    meta["raw"] = raw
    return Benchmark(name, params, obj, geom, np.asarray(x0, dtype=float), T_min, src, x_star, meta)


# ---------------------------------------------------------------- JSON schema


def benchmark_to_dict(bench):
    """Serialize to the documented JSON layout (floats round-trip exactly)."""
    raw = bench.meta["raw"]
    if bench.name == "entropy-toy":
        data = {"c": raw[0].tolist()}
    else:
        data = {"A": raw[0].tolist(), "b": raw[1].tolist()}
    return {
        "schema": "smdrate.benchmark",
        "version": SCHEMA_VERSION,
        "name": bench.name,
        "params": dict(bench.params),
        "data": data,
        "x0": bench.x0.tolist(),
        "x_star": None if bench.x_star is None else bench.x_star.tolist(),
        "constants": {
            "rho": bench.rho,
            "L": bench.L,
            "T_min": bench.T_min,
            "T_min_source": bench.T_min_source,
        },
        "feasible_set": _fs_dict(bench.geometry.feasible_set),
    }


def _fs_dict(fs):
    d = {"kind": fs.kind, "dim": fs.dim}
    if fs.kind == "box":
        d.update(lower=fs.lower.tolist(), upper=fs.upper.tolist())
    if fs.kind in ("ball", "simplex"):
        d["radius"] = fs.radius
    if fs.kind == "ball":
        d["norm"] = fs.norm
    if fs.kind == "simplex":
        d["boundary_eps"] = fs.boundary_eps
    return d


def benchmark_from_dict(d):
    if d.get("schema") != "smdrate.benchmark":
        raise ValueError("not a smdrate benchmark document")
    if d.get("version") != SCHEMA_VERSION:
        raise ValueError(f"unsupported schema version {d.get('version')}")
    p = dict(d["params"])
    name = d["name"]
    x0 = np.array(d["x0"], dtype=float)
    x_star = None if d.get("x_star") is None else np.array(d["x_star"], dtype=float)
    if name == "entropy-toy":
        data = (np.array(d["data"]["c"], dtype=float),)
    else:
        data = (np.array(d["data"]["A"], dtype=float), np.array(d["data"]["b"], dtype=float), x_star, x0)
    kwargs = {k: v for k, v in p.items() if k in ("n", "m", "seed", "geometry", "lam", "sigma",
                                                   "radius", "oracle_mode", "boundary_eps")}
    return make_benchmark(name, _data=data, **kwargs)


def save_benchmark(bench, path):
    with open(path, "w") as fh:
        json.dump(benchmark_to_dict(bench), fh, indent=1)


def load_benchmark(path):
    with open(path) as fh:
        return benchmark_from_dict(json.load(fh))


# ------------------------------------------------------- deterministic helpers


def convex_quadratic(center, *, geometry=None, name="quadratic"):
    """T(x) = 1/2 ||x - c||^2 with an exact (zero-variance) oracle; rho = 0.

    Used for sanity runs and closed-form prox checks.
    """
    c = np.asarray(center, dtype=float)
    n = c.size
    geometry = geometry or euclidean(n)
    obj = CompositeObjective(
        dim=n,
        f_value=lambda x: 0.5 * float(np.sum((x - c) ** 2)),
        f_value_batch=lambda X: 0.5 * np.sum((np.atleast_2d(X) - c) ** 2, axis=1),
        f_subgrad=lambda x: x - c,
        oracle=deterministic_oracle(lambda x: x - c),
        rho=0.0,
        L=1.0,
        name=name,
        structure=QuadraticData(c),
    )
    return obj, geometry


@dataclass(frozen=True)
class QuadraticData:
    center: np.ndarray

    def smooth_grad(self, x):
        return x - self.center

    def smoothness(self):
        return 1.0
