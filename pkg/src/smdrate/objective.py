"""Composite objectives T = f + r and relative-weak-convexity tooling.

``f`` is accessed through an unbiased stochastic subgradient oracle and,
where available, an exact value/subgradient pair used for certification and
for proximal computations. ``rho`` and ``L`` are recorded on the objective;
nothing here mutates them.
"""
from dataclasses import dataclass, field, replace
from typing import Any, Callable, Optional

import numpy as np

from .errors import InvalidProbeError
from .geometry import Geometry
from .regularizer import Regularizer

BOUNDED_MOMENT = "bounded-moment"
SRC = "SRC"
RHO_FLOOR = 1e-12


@dataclass(frozen=True)
class StochasticOracle:
    """Unbiased subgradient oracle G(x, xi).

    Randomness is split from evaluation: ``draw(rng, size)`` produces a batch
    of samples xi, and ``grad(x, xi)`` evaluates G at one of them. A run can
    therefore pre-draw all of its samples from one stream and replay them in
    either the Python loop or a compiled kernel.
    """

    draw: Callable[[np.random.Generator, int], Any]
    grad: Callable[[np.ndarray, Any], np.ndarray]
    description: str = ""

    def sample(self, x, rng):
        xi = self.draw(rng, 1)
        return self.grad(x, xi[0])

    def sample_many(self, x, rng, size):
        xi = self.draw(rng, size)
        return np.array([self.grad(x, xi[k]) for k in range(size)])


@dataclass(frozen=True)
class CompositeObjective:
    """T(x) = f(x) + r(x) with certified constants.

    ``f_value`` is exact for the shipped benchmarks. ``f_subgrad`` returns a
    deterministic element of the subdifferential and is required by the
    certificates, the deterministic variant and the generic proximal solver.
    ``structure`` optionally carries problem data that unlocks specialised
    solvers and compiled SMD kernels.
    """

    dim: int
    f_value: Callable[[np.ndarray], float]
    oracle: StochasticOracle
    rho: float
    L: float
    reg: Regularizer = field(default_factory=Regularizer.zero)
    f_subgrad: Optional[Callable[[np.ndarray], np.ndarray]] = None
    f_value_batch: Optional[Callable[[np.ndarray], np.ndarray]] = None
    oracle_mode: str = BOUNDED_MOMENT
    name: str = "objective"
    structure: Any = None

    def __post_init__(self):
        if self.oracle_mode not in (BOUNDED_MOMENT, SRC):
            raise ValueError(f"oracle_mode must be {BOUNDED_MOMENT!r} or {SRC!r}")
        if not self.rho >= 0 or not self.L > 0:
            raise ValueError("need rho >= 0 and L > 0")

    def value(self, x):
        return float(self.f_value(x)) + self.reg.value(x)

    def value_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        if self.f_value_batch is not None:
            fv = np.asarray(self.f_value_batch(X), dtype=float)
        else:
            fv = np.array([self.f_value(x) for x in X])
        return fv + self.reg.value_batch(X)

    def with_rho(self, rho):
        return replace(self, rho=float(rho))

    def with_mode(self, oracle_mode, L=None):
        return replace(self, oracle_mode=oracle_mode, L=self.L if L is None else float(L))


def rwc_subgradient(f_plus, geom, rho, x):
    """Subgradient of f from one of f + rho*omega: g = f_plus - rho grad omega(x)."""
    f_plus = np.asarray(f_plus, dtype=float)
    if rho == 0:
        return f_plus.copy()
    return f_plus - rho * geom.grad_omega(geom.interior(x))


def compose_subgradient(outer_subgrad, jacobian_apply, y):
    """Subgradient of f(g(y)): grad g(y)^T w for w in the outer subdifferential.

    ``jacobian_apply(y, w)`` must return grad g(y)^T w.
    """
    return np.asarray(jacobian_apply(y, np.asarray(outer_subgrad, dtype=float)), dtype=float)


def composition_modulus(outer_lipschitz, inner_smoothness, floor=RHO_FLOOR):
    """Weak-convexity modulus L_f * L_g of a convex-Lipschitz outer map composed
    with a relatively smooth inner map. Linear inner maps give 0, floored so
    that downstream 1/rho stays finite."""
    return max(float(outer_lipschitz) * float(inner_smoothness), floor)


def blend_geometry(geom1, rho1, geom2, rho2):
    """Geometry for (rho1 w1 + rho2 w2) / (rho1 + rho2) on the shared set.

    Both DGFs must be 1-strongly convex with respect to a common norm; the
    blended norm is taken from ``geom1``.
    """
    if geom1.dim != geom2.dim:
        raise ValueError("dimension mismatch")
    tot = rho1 + rho2
    w1, w2 = rho1 / tot, rho2 / tot
    fs = geom1.feasible_set if geom1.feasible_set.kind != "whole" else geom2.feasible_set
    kind = "entropy" if "entropy" in (geom1.kind, geom2.kind) else geom1.kind

    def div(x, y):
        return w1 * geom1.divergence_fn(x, y) + w2 * geom2.divergence_fn(x, y)

    hess = None
    if geom1.hess_apply is not None and geom2.hess_apply is not None:
        def hess(z, v):
            return w1 * geom1.hess_apply(z, v) + w2 * geom2.hess_apply(z, v)

    return Geometry(
        kind=kind,
        dim=geom1.dim,
        feasible_set=fs,
        omega=lambda x: w1 * geom1.omega(x) + w2 * geom2.omega(x),
        grad_omega=lambda x: w1 * geom1.grad_omega(x) + w2 * geom2.grad_omega(x),
        norm=geom1.norm,
        dual_norm=geom1.dual_norm,
        divergence_fn=div,
        hess_apply=hess,
        description=f"blend({w1:.3g} * {geom1.kind}, {w2:.3g} * {geom2.kind})",
    )


def sum_objective(obj1, obj2, name=None):
    """f1 + f2 with rho1 + rho2 (to be used with the blended geometry).

    Oracles are summed sample-wise on independent draws; the second moment
    bound uses (L1 + L2).
    """
    if obj1.dim != obj2.dim:
        raise ValueError("dimension mismatch")
    if not (obj1.reg.is_zero and obj2.reg.is_zero):
        raise ValueError("sum rule is implemented for the smooth/nonsmooth f parts only")

    def draw(rng, size):
        return list(zip(obj1.oracle.draw(rng, size), obj2.oracle.draw(rng, size)))

    def grad(x, xi):
        return obj1.oracle.grad(x, xi[0]) + obj2.oracle.grad(x, xi[1])

    sub = None
    if obj1.f_subgrad is not None and obj2.f_subgrad is not None:
        def sub(x):
            return obj1.f_subgrad(x) + obj2.f_subgrad(x)

    return CompositeObjective(
        dim=obj1.dim,
        f_value=lambda x: obj1.f_value(x) + obj2.f_value(x),
        f_subgrad=sub,
        oracle=StochasticOracle(draw, grad, "sum"),
        rho=obj1.rho + obj2.rho,
        L=obj1.L + obj2.L,
        name=name or f"{obj1.name}+{obj2.name}",
    )


def max_objective(objs, name="max"):
    """Pointwise max of finitely many components sharing one DGF; rho = max rho_i.

    The oracle returns the exact subgradient of an active component (it is
    deterministic).
    """
    objs = list(objs)
    if not objs:
        raise ValueError("need at least one component")
    if any(o.f_subgrad is None for o in objs):
        raise ValueError("components need exact subgradients")

    def value(x):
        return max(o.f_value(x) for o in objs)

    def sub(x):
        vals = [o.f_value(x) for o in objs]
        return objs[int(np.argmax(vals))].f_subgrad(x)

    return CompositeObjective(
        dim=objs[0].dim,
        f_value=value,
        f_subgrad=sub,
        oracle=deterministic_oracle(sub),
        rho=max(o.rho for o in objs),
        L=max(o.L for o in objs),
        name=name,
    )


def deterministic_oracle(subgrad, description="exact subgradient"):
    return StochasticOracle(
        draw=lambda rng, size: [None] * size,
        grad=lambda x, xi: np.asarray(subgrad(x), dtype=float),
        description=description,
    )


# ---------------------------------------------------------------- certificates


@dataclass
class RWCCertificate:
    rho: float
    n_pairs: int
    max_wc_violation: float
    max_midpoint_violation: float
    n_violations: int
    tol: float

    @property
    def ok(self):
        return self.n_violations == 0

    def as_dict(self):
        return {
            "rho": self.rho,
            "n_pairs": self.n_pairs,
            "max_wc_violation": self.max_wc_violation,
            "max_midpoint_violation": self.max_midpoint_violation,
            "n_violations": self.n_violations,
            "tol": self.tol,
            "ok": self.ok,
        }


def _probe_pairs(geom, n_pairs, rng):
    """Pairs (y, x) in X mixing global pairs with short segments.

    Base points are drawn at several shrink factors around the center of X so
    that curvature near the center is probed as well as near the boundary.
    """
    fs = geom.feasible_set
    scales = np.array([1.0, 0.5, 0.2, 0.05])
    ys, xs = [], []
    for k in range(n_pairs):
        s = scales[k % scales.size]
        y = fs.sample(rng, 1, scale=s)[0]
        w = fs.sample(rng, 1, scale=s)[0]
        t = 10.0 ** rng.uniform(-4, 0)
        x = y + t * (w - y)
        ys.append(geom.interior(y))
        xs.append(geom.interior(x))
    return np.array(ys), np.array(xs)


def certify_rwc(obj, geom, n_pairs, rng, rho=None, tol=1e-8):
    """Randomized check that f + rho*omega is convex on X.

    Two tests per pair: the subgradient inequality
    f(x) >= f(y) + <g, x - y> - rho D(x, y) with g the exact subgradient at y,
    and midpoint convexity of f + rho*omega. Violations above ``tol`` are
    counted; nothing is raised and rho is never changed.
    """
    if obj.f_subgrad is None:
        raise ValueError("certify_rwc needs an exact subgradient")
    if n_pairs < 1:
        raise ValueError("n_pairs must be >= 1")
    rho = obj.rho if rho is None else float(rho)
    ys, xs = _probe_pairs(geom, n_pairs, rng)
    div = geom.divergence_fn
    max_wc = -np.inf
    max_mid = -np.inf
    bad = 0
    for y, x in zip(ys, xs):
        fy = obj.f_value(y)
        fx = obj.f_value(x)
        g = obj.f_subgrad(y)
        wc = fy + float(np.dot(g, x - y)) - rho * div(x, y) - fx
        m = geom.interior(0.5 * (x + y))
        mid = (obj.f_value(m) + rho * geom.omega(m)) - 0.5 * (
            fx + rho * geom.omega(x) + fy + rho * geom.omega(y)
        )
        max_wc = max(max_wc, wc)
        max_mid = max(max_mid, mid)
        if wc > tol or mid > tol:
            bad += 1
    return RWCCertificate(rho, n_pairs, float(max_wc), float(max_mid), bad, tol)


@dataclass
class MomentReport:
    points: int
    draws: int
    max_second_moment: float
    bound: float
    slack: float

    @property
    def ok(self):
        return self.max_second_moment <= self.bound * (1 + self.slack)


def second_moment_check(obj, geom, rng, n_points=20, n_draws=10_000, slack=0.05):
    """Empirical max over random x of E ||G(x, xi)||_*^2 against L^2."""
    pts = geom.feasible_set.sample(rng, n_points)
    worst = 0.0
    for x in pts:
        x = geom.interior(x)
        G = obj.oracle.sample_many(x, rng, n_draws)
        m2 = float(np.mean([geom.dual_norm(gk) ** 2 for gk in G]))
        worst = max(worst, m2)
    return MomentReport(n_points, n_draws, worst, obj.L ** 2, slack)


@dataclass
class BiasReport:
    max_abs_dev: float
    max_allowed: float

    @property
    def ok(self):
        return self.max_abs_dev <= self.max_allowed


def oracle_bias_check(obj, x, rng, n_draws=100_000, n_sigma=3.0):
    """Compare the oracle mean at x with the exact subgradient.

    Passes when the dual-norm-agnostic aggregate
    sum_i |mean_i - g_i| <= n_sigma * sum_i std_i / sqrt(n_draws).
    """
    G = obj.oracle.sample_many(x, rng, n_draws)
    g = obj.f_subgrad(x)
    dev = np.abs(G.mean(axis=0) - g)
    allowed = n_sigma * G.std(axis=0, ddof=1) / np.sqrt(n_draws)
    return BiasReport(float(dev.sum()), float(allowed.sum()))


@dataclass
class SRCReport:
    estimate: float
    half_width: float
    bound: float
    max_ratio: float
    min_divergence_ratio: float
    n_probes: int
    slack: float

    @property
    def exceeds(self):
        return self.estimate > self.bound * (1 + self.slack)


def src_moment_check(obj, geom, x, n_draws, rng, probes=None, n_probes=200, slack=0.05):
    """Estimate E[M(x, xi)^2] with M = ||G||_* * max_y ||y - x|| / sqrt(2 D(y, x)).

    The max runs over ``probes`` (random points of X when not given). Also
    reports the smallest divergence ratio D(y, x) / (1/2 ||y - x||^2), which
    is >= 1 for any 1-strongly convex DGF.
    """
    x = geom.interior(np.asarray(x, dtype=float))
    if probes is None:
        probes = geom.feasible_set.sample(rng, n_probes)
    probes = np.atleast_2d(np.asarray(probes, dtype=float))
    ratios = []
    for y in probes:
        d = y - x
        nrm = geom.norm(d)
        if nrm == 0.0:
            continue
        D = geom.divergence_fn(y, x)
        ratios.append(D / (0.5 * nrm ** 2))
    if not ratios:
        raise InvalidProbeError("every probe coincides with x")
    ratios = np.array(ratios)
    max_ratio = float(1.0 / ratios.min())  # max_y ||y-x||^2 / (2 D(y,x))
    G = obj.oracle.sample_many(x, rng, n_draws)
    m2 = np.array([geom.dual_norm(gk) ** 2 for gk in G]) * max_ratio
    est = float(m2.mean())
    hw = float(1.96 * m2.std(ddof=1) / np.sqrt(n_draws)) if n_draws > 1 else 0.0
    return SRCReport(est, hw, obj.L ** 2, max_ratio, float(ratios.min()), len(ratios), slack)
