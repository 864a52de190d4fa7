"""Proximal stochastic mirror descent, its deterministic variant and run traces.

One run performs

    x_{t+1} = argmin_{x in X} <G(x_t, xi_t), x> + r(x) + D(x, x_t) / alpha_t

for t = 0..N-1 and returns x_R with P(R = i) = alpha_i / sum_t alpha_t.

Randomness comes from three sub-streams of the master seed, labelled
``oracle``, ``step`` and ``output``. All oracle samples are drawn up front, so
the compiled kernels in :mod:`smdrate.kernels` and the generic Python loop
replay the same samples. The output index is drawn before the iterations
start; it depends only on the schedule.
"""
import csv
import io
import json
import time
from dataclasses import dataclass, field
from typing import Optional

import numpy as np

from . import kernels
from ._accel import backend as accel_backend
from .errors import DegenerateGapError, DivergenceError, InconsistentInputsError, StepSolverError
from .geometry import mirror_step
from .stationarity import bregman_prox

STREAMS = {"oracle": 0, "step": 1, "output": 2}
OUTPUT_RULES = ("weighted-random", "argmin-delta")


def substream(seed, label):
    """Generator for the named sub-stream of a master seed."""
    return np.random.default_rng(np.random.SeedSequence(int(seed), spawn_key=(STREAMS[label],)))


# ---------------------------------------------------------------- schedules


@dataclass(frozen=True)
class Schedule:
    """Stepsize rule.

    ``constant``: alpha_t = c / sqrt(N). ``sqrt-decay``: alpha_t = c / sqrt(t + 1).
    ``list``: explicit values (length must equal N).
    """

    kind: str
    c: float = 1.0
    values: Optional[tuple] = None

    def __post_init__(self):
        if self.kind not in ("constant", "sqrt-decay", "list"):
            raise ValueError(f"unknown schedule {self.kind!r}")
        if self.kind == "list":
            if not self.values:
                raise ValueError("list schedule needs values")
            _validate(np.asarray(self.values, dtype=float))
        elif not (np.isfinite(self.c) and self.c > 0):
            raise ValueError("schedule constant c must be positive and finite")

    @classmethod
    def constant(cls, c):
        return cls("constant", float(c))

    @classmethod
    def sqrt_decay(cls, c):
        return cls("sqrt-decay", float(c))

    @classmethod
    def from_list(cls, values):
        return cls("list", values=tuple(float(v) for v in values))

    def alphas(self, N):
        if N < 1:
            raise ValueError("N must be >= 1")
        if self.kind == "constant":
            a = np.full(N, self.c / np.sqrt(N))
        elif self.kind == "sqrt-decay":
            a = self.c / np.sqrt(np.arange(1, N + 1, dtype=float))
        else:
            a = np.asarray(self.values, dtype=float)
            if a.size != N:
                raise ValueError(f"list schedule has {a.size} values, N = {N}")
        return _validate(a)

    def as_dict(self):
        d = {"kind": self.kind}
        if self.kind == "list":
            d["values"] = list(self.values)
        else:
            d["c"] = self.c
        return d


def _validate(a):
    if not np.all(np.isfinite(a)) or np.any(a <= 0):
        raise ValueError("stepsizes must be positive and finite")
    if np.any(np.diff(a) > 0):
        raise ValueError("stepsizes must be non-increasing")
    return a


# ------------------------------------------------------------- output rule


def sample_output_index(alphas, rng):
    return int(sample_output_indices(alphas, rng, 1)[0])


def sample_output_indices(alphas, rng, size):
    """Inverse-CDF draws of R with P(R = i) = alpha_i / sum(alpha)."""
    alphas = np.asarray(alphas, dtype=float)
    cdf = np.cumsum(alphas)
    cdf /= cdf[-1]
    u = rng.random(size)
    return np.minimum(np.searchsorted(cdf, u, side="right"), alphas.size - 1)


# ------------------------------------------------------------ config/trace


@dataclass(frozen=True)
class RunConfig:
    N: int
    schedule: Schedule
    x0: np.ndarray
    seed: int = 0
    record_every: int = 1
    output_rule: str = "weighted-random"
    store: str = "all"
    backend: str = "auto"

    def __post_init__(self):
        if int(self.N) < 1:
            raise ValueError("N must be >= 1")
        if int(self.record_every) < 1:
            raise ValueError("record_every must be >= 1")
        if self.output_rule not in OUTPUT_RULES:
            raise ValueError(f"output_rule must be one of {OUTPUT_RULES}")
        if self.store not in ("all", "light"):
            raise ValueError("store must be 'all' or 'light'")
        if self.backend not in ("auto", "kernel", "python"):
            raise ValueError("backend must be 'auto', 'kernel' or 'python'")
        self.schedule.alphas(int(self.N))

    def as_dict(self):
        return {
            "N": int(self.N),
            "schedule": self.schedule.as_dict(),
            "x0": np.asarray(self.x0, dtype=float).tolist(),
            "seed": int(self.seed),
            "record_every": int(self.record_every),
            "output_rule": self.output_rule,
            "store": self.store,
            "backend": self.backend,
        }


@dataclass
class Trace:
    """History of one run.

    ``record_idx`` lists the iterations whose points are kept in ``iterates``
    (every ``record_every``-th one, plus N). ``alphas`` and ``gnorms`` cover
    every iteration. ``objective`` holds T at the recorded points (empty in
    light mode).
    """

    config: RunConfig
    alphas: np.ndarray
    gnorms: np.ndarray
    record_idx: np.ndarray
    iterates: np.ndarray
    objective: np.ndarray
    R: int
    x_R: np.ndarray
    wall_time: float
    engine: str
    deltas: Optional[np.ndarray] = None
    all_iterates: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def x_final(self):
        return self.iterates[-1] if len(self.iterates) else None

    def rows(self):
        n = self.x_R.size
        header = ["t", "alpha", "gnorm", "objective"] + [f"x{j}" for j in range(n)]
        if self.deltas is not None:
            header.insert(4, "delta")
        out = [header]
        N = self.alphas.size
        for k, t in enumerate(self.record_idx):
            t = int(t)
            row = [t, repr(float(self.alphas[t])) if t < N else "",
                   repr(float(self.gnorms[t])) if t < N else "",
                   repr(float(self.objective[k])) if len(self.objective) else ""]
            if self.deltas is not None:
                row.append(repr(float(self.deltas[k])) if k < len(self.deltas) else "")
            row += [repr(float(v)) for v in self.iterates[k]]
            out.append(row)
        return out

    def to_csv(self, path=None):
        buf = io.StringIO()
        csv.writer(buf, lineterminator="\n").writerows(self.rows())
        text = buf.getvalue()
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text

    def summary(self):
        return {
            "config": self.config.as_dict(),
            "R": int(self.R),
            "x_R": self.x_R.tolist(),
            "alpha_sum": float(self.alphas.sum()),
            "wall_time": self.wall_time,
            "engine": self.engine,
        }

    def to_json(self, path=None):
        text = json.dumps(self.summary(), indent=1)
        if path is not None:
            with open(path, "w") as fh:
                fh.write(text)
        return text


# ---------------------------------------------------------------- the runs


def _kernel_for(obj, geom):
    """Return a callable (x0, alphas, xi) -> (X, gnorm) or None."""
    s = obj.structure
    name = type(s).__name__
    fs = geom.feasible_set
    reg = obj.reg
    l1 = reg.weight if reg.kind == "l1" else 0.0
    if reg.kind not in ("zero", "l1"):
        return None
    if name == "PhaseRetrievalData":
        if geom.kind == "euclidean" and (fs.kind == "whole" or (fs.kind == "ball" and fs.norm == "l2")):
            radius = np.inf if fs.kind == "whole" else float(fs.radius)
            return lambda x0, a, xi: kernels.pr_smd_euclid(s.A, s.b, x0, a, xi, radius, l1)
        if geom.kind == "entropy":
            eps = fs.boundary_eps
            return lambda x0, a, xi: kernels.pr_smd_entropy(s.A, s.b, x0, a, xi, eps)
    if name == "CauchyRegressionData" and geom.kind == "euclidean" and fs.kind in ("whole", "box"):
        lo = np.full(geom.dim, -np.inf) if fs.kind == "whole" else fs.lower
        hi = np.full(geom.dim, np.inf) if fs.kind == "whole" else fs.upper
        return lambda x0, a, xi: kernels.cauchy_smd_box(s.A, s.b, x0, a, xi, lo, hi, l1)
    if name == "EntropyToyData" and geom.kind == "entropy":
        eps = fs.boundary_eps
        return lambda x0, a, xi: kernels.toy_smd(s.c, s.sigma, x0, a, xi, eps)
    return None


def _prepare_x0(geom, x0):
    x0 = np.asarray(x0, dtype=float)
    if x0.shape != (geom.dim,):
        raise ValueError(f"x0 has shape {x0.shape}, expected ({geom.dim},)")
    if not geom.feasible_set.contains(x0, tol=1e-9):
        raise ValueError("x0 is not feasible")
    return geom.interior(x0)


def _record_indices(N, every):
    idx = np.arange(0, N + 1, every)
    if idx[-1] != N:
        idx = np.append(idx, N)
    return idx


def _python_loop(obj, geom, x0, alphas, xi, keep_all, R):
    N = alphas.size
    X = np.empty((N + 1, x0.size)) if keep_all else None
    gn = np.empty(N)
    x = x0.copy()
    x_R = x0.copy() if R == 0 else None
    if keep_all:
        X[0] = x
    for t in range(N):
        g = np.asarray(obj.oracle.grad(x, xi[t]), dtype=float)
        gn[t] = geom.dual_norm(g)
        try:
            x = mirror_step(geom, x, g, alphas[t], obj.reg)
        except StepSolverError as exc:
            exc.iteration = t
            raise
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite iterate at t = {t + 1}")
        if keep_all:
            X[t + 1] = x
        if t + 1 == R:
            x_R = x.copy()
    return X, gn, x, x_R


def smd_run(obj, geom, cfg):
    """Run proximal SMD as configured; see :class:`Trace`."""
    if obj.dim != geom.dim:
        raise ValueError("objective and geometry dimensions differ")
    if cfg.output_rule != "weighted-random":
        raise ValueError("smd_run uses the weighted-random output rule")
    N = int(cfg.N)
    alphas = cfg.schedule.alphas(N)
    x0 = _prepare_x0(geom, cfg.x0)
    R = sample_output_index(alphas, substream(cfg.seed, "output"))
    xi = obj.oracle.draw(substream(cfg.seed, "oracle"), N)
    kern = None if cfg.backend == "python" else _kernel_for(obj, geom)
    if cfg.backend == "kernel" and kern is None:
        raise ValueError("no compiled kernel for this objective/geometry pair")
    keep_all = cfg.store == "all"
    t0 = time.perf_counter()
    if kern is not None:
        X, gn = kern(x0, alphas, np.ascontiguousarray(xi))
        if not np.all(np.isfinite(X)):
            raise DivergenceError("non-finite iterate")
        x_R = X[R].copy()
        engine = f"kernel-{accel_backend()}"
    else:
        X, gn, x_last, x_R = _python_loop(obj, geom, x0, alphas, xi, keep_all, R)
        engine = "python"
    wall = time.perf_counter() - t0
    if keep_all:
        ridx = _record_indices(N, int(cfg.record_every))
        its = X[ridx]
        objective = obj.value_batch(its)
        all_its = X
    else:
        ridx = np.array([N])
        its = (X[N] if X is not None else x_last)[None, :]
        objective = np.array([])
        all_its = None
    return Trace(cfg, alphas, gn, ridx, its, objective, R, x_R, wall, engine, all_iterates=all_its)


def deterministic_md_run(obj, geom, cfg, rho_hat=None, prox_opts=None):
    """Mirror descent with the exact subgradient; x_R minimizes Delta over recorded iterates.

    Delta = Delta_{1/rho_hat} with rho_hat = 2 rho by default. Only iterates
    0..N-1 at multiples of ``record_every`` are candidates.
    """
    if obj.f_subgrad is None:
        raise ValueError("deterministic run needs an exact subgradient")
    N = int(cfg.N)
    alphas = cfg.schedule.alphas(N)
    x = _prepare_x0(geom, cfg.x0)
    rho_hat = 2.0 * obj.rho if rho_hat is None else float(rho_hat)
    every = int(cfg.record_every)
    t0 = time.perf_counter()
    X = np.empty((N + 1, x.size))
    X[0] = x
    gn = np.empty(N)
    for t in range(N):
        g = np.asarray(obj.f_subgrad(x), dtype=float)
        gn[t] = geom.dual_norm(g)
        try:
            x = mirror_step(geom, x, g, alphas[t], obj.reg)
        except StepSolverError as exc:
            exc.iteration = t
            raise
        if not np.all(np.isfinite(x)):
            raise DivergenceError(f"non-finite iterate at t = {t + 1}")
        X[t + 1] = x
    cand = np.arange(0, N, every)
    deltas = np.array([
        bregman_prox(obj, geom, 1.0 / rho_hat, X[t], **(prox_opts or {})).bregman_stat for t in cand
    ])
    R = int(cand[int(np.argmin(deltas))])
    wall = time.perf_counter() - t0
    return Trace(cfg, alphas, gn, cand, X[cand], obj.value_batch(X[cand]), R, X[R].copy(), wall,
                 "python-deterministic", deltas=deltas, all_iterates=X)


# --------------------------------------------------------------- constants


def corollary_stepsize(T_env_x0, T_min, rho, L):
    """c = sqrt((T_{1/(2 rho)}(x0) - T_min) / (rho L^2))."""
    if not (rho > 0 and L > 0):
        raise ValueError("rho and L must be positive")
    gap = float(T_env_x0) - float(T_min)
    if gap < 0:
        raise InconsistentInputsError(f"envelope at x0 is below T_min by {-gap:.3g}")
    if gap == 0:
        raise DegenerateGapError("zero optimality gap gives c = 0; the method would not move")
    return float(np.sqrt(gap / (rho * L * L)))


def theorem_rhs(rho, rho_hat, L, T_env_x0, T_min, alphas, r_x0=0.0):
    """Upper bound on E Delta_{1/rho_hat}(x_R) for a non-increasing schedule.

    (rho_hat / (rho_hat - rho)) * (gap + rho_hat alpha_0 r(x0)
    + rho_hat L^2 / 2 * sum alpha_t^2) / sum alpha_t
    """
    if not rho_hat > rho:
        raise ValueError("rho_hat must exceed rho")
    a = np.asarray(alphas, dtype=float)
    gap = float(T_env_x0) - float(T_min)
    num = gap + rho_hat * a[0] * r_x0 + 0.5 * rho_hat * L * L * float(np.sum(a * a))
    return rho_hat / (rho_hat - rho) * num / float(np.sum(a))


def constant_step_rhs(rho, L, c, N, T_env_x0, T_min, r_x0=0.0):
    """The bound above for alpha_t = c / sqrt(N) and rho_hat = 2 rho."""
    gap = float(T_env_x0) - float(T_min)
    return 2.0 * ((gap + rho * c * c * L * L) / (c * np.sqrt(N)) + 2.0 * rho * r_x0 / N)
