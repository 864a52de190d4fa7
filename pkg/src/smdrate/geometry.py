"""Distance-generating functions, Bregman divergences and mirror steps.

Two setups ship:

* Euclidean: omega = 1/2 ||x||_2^2 with the l2 norm (self-dual), on the whole
  space, a box, an l2/l1 ball or a scaled simplex.
* Entropy: omega = sum x_i log x_i on the unit simplex with the l1 norm and
  l-infinity dual norm. Strong convexity w.r.t. ||.||_1 is Pinsker's
  inequality. The gradient log x + 1 diverges on the boundary, so points are
  clipped to x_i >= boundary_eps and renormalized before it is evaluated.
"""
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np
from scipy.special import logsumexp, xlogy

from .errors import BoundaryPointError, NumericOverflowError, StepSolverError
from .regularizer import Regularizer

DEFAULT_BOUNDARY_EPS = 1e-12


def project_simplex(v, radius=1.0):
    """Euclidean projection onto {x >= 0, sum x = radius} (sort-based)."""
    v = np.asarray(v, dtype=float)
    u = np.sort(v)[::-1]
    css = np.cumsum(u) - radius
    idx = np.arange(1, v.size + 1)
    cond = u - css / idx > 0
    k = idx[cond][-1]
    theta = css[cond][-1] / k
    return np.maximum(v - theta, 0.0)


def project_l1_ball(v, radius=1.0):
    v = np.asarray(v, dtype=float)
    if np.abs(v).sum() <= radius:
        return v.copy()
    return np.sign(v) * project_simplex(np.abs(v), radius)


@dataclass(frozen=True)
class FeasibleSet:
    """Closed convex set X.

    ``kind`` is one of ``whole``, ``box``, ``simplex``, ``ball``. Boxes carry
    per-coordinate ``lower``/``upper`` arrays; simplices and balls a
    ``radius``; balls also a ``norm`` (``"l2"`` or ``"l1"``).
    """

    kind: str
    dim: int
    lower: Optional[np.ndarray] = None
    upper: Optional[np.ndarray] = None
    radius: float = 1.0
    norm: str = "l2"
    boundary_eps: float = DEFAULT_BOUNDARY_EPS

    def __post_init__(self):
        if self.dim < 1:
            raise ValueError("dimension must be positive")
        if self.kind not in ("whole", "box", "simplex", "ball"):
            raise ValueError(f"unknown feasible set kind {self.kind!r}")
        if self.kind == "box":
            lo = np.broadcast_to(np.asarray(self.lower, dtype=float), (self.dim,)).copy()
            hi = np.broadcast_to(np.asarray(self.upper, dtype=float), (self.dim,)).copy()
            if np.any(lo > hi):
                raise ValueError("empty box: lower > upper")
            object.__setattr__(self, "lower", lo)
            object.__setattr__(self, "upper", hi)
        if self.kind in ("simplex", "ball") and not self.radius > 0:
            raise ValueError("radius must be positive")
        if self.kind == "ball" and self.norm not in ("l2", "l1"):
            raise ValueError("ball norm must be 'l2' or 'l1'")
        if not self.boundary_eps > 0:
            raise ValueError("boundary_eps must be positive")

    @classmethod
    def whole(cls, dim):
        return cls("whole", dim)

    @classmethod
    def box(cls, lower, upper, dim=None):
        if dim is None:
            dim = np.size(lower) if np.ndim(lower) else np.size(upper)
        return cls("box", int(dim), lower=lower, upper=upper)

    @classmethod
    def simplex(cls, dim, radius=1.0, boundary_eps=DEFAULT_BOUNDARY_EPS):
        return cls("simplex", dim, radius=float(radius), boundary_eps=boundary_eps)

    @classmethod
    def ball(cls, dim, radius, norm="l2"):
        return cls("ball", dim, radius=float(radius), norm=norm)

    def project(self, v):
        v = np.asarray(v, dtype=float)
        if self.kind == "whole":
            return v.copy()
        if self.kind == "box":
            return np.clip(v, self.lower, self.upper)
        if self.kind == "simplex":
            return project_simplex(v, self.radius)
        if self.norm == "l1":
            return project_l1_ball(v, self.radius)
        nrm = np.linalg.norm(v)
        if nrm <= self.radius:
            return v.copy()
        return v * (self.radius / nrm)

    def contains(self, x, tol=1e-9):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,) or not np.all(np.isfinite(x)):
            return False
        if self.kind == "whole":
            return True
        if self.kind == "box":
            return bool(np.all(x >= self.lower - tol) and np.all(x <= self.upper + tol))
        if self.kind == "simplex":
            return bool(np.all(x >= -tol) and abs(x.sum() - self.radius) <= tol * max(1.0, self.radius) * self.dim)
        if self.norm == "l1":
            return bool(np.abs(x).sum() <= self.radius * (1 + tol))
        return bool(np.linalg.norm(x) <= self.radius * (1 + tol))

    def center(self):
        if self.kind in ("whole", "ball"):
            return np.zeros(self.dim)
        if self.kind == "box":
            lo = np.where(np.isfinite(self.lower), self.lower, 0.0)
            hi = np.where(np.isfinite(self.upper), self.upper, 0.0)
            return np.clip(0.5 * (lo + hi), self.lower, self.upper)
        return np.full(self.dim, self.radius / self.dim)

    def sample(self, rng, size, scale=1.0):
        """Random points of X (uniform for bounded kinds).

        ``scale`` shrinks the sample toward :meth:`center`; the whole space
        uses a standard normal scaled by ``scale``.
        """
        d = self.dim
        if self.kind == "whole":
            return scale * rng.standard_normal((size, d))
        if self.kind == "box":
            lo = np.where(np.isfinite(self.lower), self.lower, -1.0)
            hi = np.where(np.isfinite(self.upper), self.upper, 1.0)
            pts = rng.uniform(lo, hi, size=(size, d))
        elif self.kind == "simplex":
            pts = self.radius * rng.dirichlet(np.ones(d), size=size)
        elif self.norm == "l2":
            dirs = rng.standard_normal((size, d))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            rad = self.radius * rng.random(size) ** (1.0 / d)
            pts = dirs * rad[:, None]
        else:
            signs = rng.choice([-1.0, 1.0], size=(size, d))
            mags = rng.dirichlet(np.ones(d + 1), size=size)[:, :d]
            pts = self.radius * signs * mags
        if scale != 1.0:
            c = self.center()
            pts = c + scale * (pts - c)
        return pts


@dataclass(frozen=True)
class Geometry:
    """A distance-generating function omega on a feasible set.

    Immutable; safe to share between workers.
    """

    kind: str
    dim: int
    feasible_set: FeasibleSet
    omega: Callable
    grad_omega: Callable
    norm: Callable
    dual_norm: Callable
    divergence_fn: Optional[Callable] = None
    hess_apply: Optional[Callable] = None
    description: str = field(default="", compare=False)

    def interior(self, x):
        """Move x into the region where grad_omega is finite.

        For the entropy setup coordinates below ``boundary_eps`` are clipped
        and the point renormalized; the Euclidean setup is unchanged.
        """
        x = np.asarray(x, dtype=float)
        if self.kind == "entropy":
            eps = self.feasible_set.boundary_eps
            if np.any(x < eps):
                x = np.maximum(x, eps)
                x = x / x.sum()
            return x
        return x

    def divergence(self, x, y):
        return bregman_divergence(self, x, y)


def euclidean(dim, feasible_set=None):
    if feasible_set is None:
        feasible_set = FeasibleSet.whole(dim)
    if feasible_set.dim != dim:
        raise ValueError("feasible set dimension mismatch")
    return Geometry(
        kind="euclidean",
        dim=dim,
        feasible_set=feasible_set,
        omega=lambda x: 0.5 * float(np.dot(x, x)),
        grad_omega=lambda x: np.array(x, dtype=float),
        norm=lambda v: float(np.linalg.norm(v)),
        dual_norm=lambda v: float(np.linalg.norm(v)),
        divergence_fn=lambda x, y: 0.5 * float(np.sum((np.asarray(x) - np.asarray(y)) ** 2)),
        hess_apply=lambda z, v: np.array(v, dtype=float),
        description="omega = 1/2 ||x||_2^2, l2 norm",
    )


def _entropy_div(x, y):
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    return float(np.sum(xlogy(x, x) - xlogy(x, y)) - x.sum() + y.sum())


def entropy(dim, boundary_eps=DEFAULT_BOUNDARY_EPS):
    """Negative entropy on the unit simplex (l1 norm, l-infinity dual)."""
    fs = FeasibleSet.simplex(dim, 1.0, boundary_eps=boundary_eps)
    return Geometry(
        kind="entropy",
        dim=dim,
        feasible_set=fs,
        omega=lambda x: float(np.sum(xlogy(x, x))),
        grad_omega=lambda x: np.log(x) + 1.0,
        norm=lambda v: float(np.sum(np.abs(v))),
        dual_norm=lambda v: float(np.max(np.abs(v))),
        divergence_fn=_entropy_div,
        hess_apply=lambda z, v: np.asarray(v, dtype=float) / np.asarray(z, dtype=float),
        description="omega = sum x log x on the simplex, l1 norm",
    )


def make_geometry(name, dim, feasible_set=None, boundary_eps=DEFAULT_BOUNDARY_EPS):
    if name == "euclidean":
        return euclidean(dim, feasible_set)
    if name == "entropy":
        if feasible_set is not None and feasible_set.kind != "simplex":
            raise ValueError("entropy geometry lives on the unit simplex")
        return entropy(dim, boundary_eps)
    raise ValueError(f"unknown geometry {name!r}")


def _check_interior(geom, y, what="y"):
    y = np.asarray(y, dtype=float)
    if y.shape != (geom.dim,):
        raise ValueError(f"{what} has shape {y.shape}, expected ({geom.dim},)")
    if not geom.feasible_set.contains(y, tol=1e-8):
        raise BoundaryPointError(f"{what} is not in the feasible set")
    if geom.kind == "entropy":
        y = geom.interior(y)
    return y


def bregman_divergence(geom, x, y):
    """D(x, y) = omega(x) - omega(y) - <grad omega(y), x - y>.

    ``y`` must be interior; entropy points within ``boundary_eps`` of the
    boundary are clipped first. Tiny negative values from rounding are
    returned as 0.
    """
    x = np.asarray(x, dtype=float)
    y = _check_interior(geom, y)
    if geom.divergence_fn is not None:
        d = geom.divergence_fn(x, y)
    else:
        d = geom.omega(x) - geom.omega(y) - float(np.dot(geom.grad_omega(y), x - y))
    if not np.isfinite(d):
        raise NumericOverflowError(f"Bregman divergence is not finite ({d})")
    return max(d, 0.0)


def three_point_residual(geom, x, y, z):
    """D(x,y) + D(y,z) - D(x,z) - <grad omega(z) - grad omega(y), x - y>.

    Identically zero for any DGF; useful as a numerical diagnostic.
    """
    x = np.asarray(x, dtype=float)
    y = _check_interior(geom, y, "y")
    z = _check_interior(geom, z, "z")
    # unclamped divergences: the identity is exact, clamping would bias it
    div = geom.divergence_fn or (
        lambda a, b: geom.omega(a) - geom.omega(b) - float(np.dot(geom.grad_omega(b), a - b))
    )
    lhs = div(x, y) + div(y, z)
    rhs = div(x, z) + float(np.dot(geom.grad_omega(z) - geom.grad_omega(y), x - y))
    res = lhs - rhs
    if not np.isfinite(res):
        raise NumericOverflowError("three-point residual is not finite")
    return res


def linear_step(geom, v, kappa, reg=None, *, method="auto", max_iter=500, tol=1e-10):
    """argmin_{x in X} { <v, x> + r(x) + kappa * omega(x) }.

    Every mirror step reduces to this form; so do the inner iterations of the
    generic proximal solver in :mod:`smdrate.stationarity`.
    """
    reg = reg or Regularizer.zero()
    v = np.asarray(v, dtype=float)
    if method == "auto":
        if geom.kind == "euclidean":
            x = reg.prox(-v / kappa, 1.0 / kappa, geom.feasible_set)
            if x is not None:
                return x
        elif geom.kind == "entropy" and (reg.is_zero or reg.kind == "l1"):
            s = -v / kappa
            return geom.interior(np.exp(s - logsumexp(s)))
    # generic route: the same problem written as a mirror step from the point
    # whose mirror image is -v / kappa is not available for every geometry,
    # so solve the strongly convex step objective directly
    lin = v

    def grad_h(x):
        return lin + kappa * geom.grad_omega(x)

    def h(x):
        return float(np.dot(lin, x)) + kappa * geom.omega(x)

    x0 = geom.feasible_set.center()
    if geom.kind == "entropy":
        x0 = geom.interior(x0)
    return _generic_step(geom, h, grad_h, reg, x0, kappa, max_iter, tol)


def mirror_step(geom, x_t, g, alpha, reg=None, *, method="auto", max_iter=500, tol=1e-10):
    """argmin_{x in X} { <g, x> + r(x) + (1/alpha) D(x, x_t) }.

    Closed forms: Euclidean with r in {0, l1} on whole space/box/l2 ball/simplex
    (gradient step then soft-threshold/projection) and entropy with r = 0 on the
    simplex (multiplicative weights). Other pairs, or ``method="generic"``, use
    a proximal-gradient solver on the step objective; failure to converge within
    ``max_iter`` raises :class:`StepSolverError`.
    """
    if not alpha > 0:
        raise ValueError("alpha must be positive")
    reg = reg or Regularizer.zero()
    g = np.asarray(g, dtype=float)
    if not np.all(np.isfinite(g)):
        raise NumericOverflowError("non-finite subgradient passed to mirror_step")
    x_t = np.asarray(x_t, dtype=float)
    if geom.kind == "entropy":
        x_t = geom.interior(x_t)
    if method == "auto":
        if geom.kind == "euclidean":
            x = reg.prox(x_t - alpha * g, alpha, geom.feasible_set)
            if x is not None:
                return x
        elif geom.kind == "entropy" and (reg.is_zero or reg.kind == "l1"):
            s = -alpha * g
            s = s - s.max()
            w = x_t * np.exp(s)
            return geom.interior(w / w.sum())
    elif method != "generic":
        raise ValueError(f"unknown method {method!r}")
    grad_w = geom.grad_omega(x_t)

    def h(x):
        return float(np.dot(g, x)) + geom.divergence_fn(x, x_t) / alpha

    def grad_h(x):
        return g + (geom.grad_omega(x) - grad_w) / alpha

    return _generic_step(geom, h, grad_h, reg, x_t.copy(), 1.0 / alpha, max_iter, tol)


def _generic_step(geom, h, grad_h, reg, x0, kappa, max_iter, tol):
    """Proximal gradient (Euclidean metric) on h + r over X with backtracking.

    When r has no exact prox, r is handled by projected subgradient steps of
    length 2 / (kappa (k + 2)).
    """
    fs = geom.feasible_set
    x = geom.interior(np.array(x0, dtype=float))
    has_prox = reg.prox(x, 0.0, fs) is not None
    eta = 1.0 / kappa
    if geom.kind == "entropy":
        # local smoothness of kappa * omega is kappa / min(x)
        eta *= float(np.min(x))
    best, best_val = x.copy(), h(x) + reg.value(x)
    step_norm = np.inf
    for k in range(max_iter):
        hx = h(x)
        gh = grad_h(x)
        if fs.kind == "simplex":
            # constant shifts leave the projection unchanged but cost precision at large eta
            gh = gh - gh.mean()
        if has_prox:
            eta = min(2.0 * eta, 1e6 / kappa)
            for _ in range(80):
                y = geom.interior(reg.prox(x - eta * gh, eta, fs))
                d = y - x
                if h(y) <= hx + float(np.dot(gh, d)) + float(np.dot(d, d)) / (2 * eta):
                    break
                eta *= 0.5
        else:
            step = min(eta, 2.0 / (kappa * (k + 2)))
            y = geom.interior(fs.project(x - step * (gh + reg.subgradient(x))))
        step_norm = float(np.linalg.norm(y - x))
        x = y
        val = h(x) + reg.value(x)
        if val < best_val:
            best, best_val = x.copy(), val
        if step_norm < tol:
            return x
    raise StepSolverError(
        f"mirror-step solver did not converge in {max_iter} iterations",
        best=best,
        residual=step_norm,
    )
