"""Bregman proximal point, Moreau envelope and the stationarity measures.

For lam * rho < 1 the subproblem

    min_{x in X}  Phi(x) = T(x) + (1/lam) D(x, z)

is (1/lam - rho)-strongly convex relative to omega and has a unique solution
x_hat. From it:

    envelope     T_lam(z) = Phi(x_hat)
    grad_map     G_lam(z) = (z - x_hat) / lam
    bregman_stat Delta_lam(z) = (D(z, x_hat) + D(x_hat, z)) / lam^2

Solvers, picked by :func:`bregman_prox` from the objective's ``structure``:

* ``closed-form``: the entropy toy, x_hat is a softmax.
* ``newton``: the absolute-quadratic (phase retrieval) loss. The kinks are
  smoothed with sqrt(c^2 + eps^2) - eps and eps is driven to 1e-13 by
  continuation, each level solved by damped Newton. The l2-ball constraint is
  handled by a root search on its multiplier; the simplex by a KKT system.
* ``pg``: smooth f plus l1 in the Euclidean setup, proximal gradient with
  backtracking.
* ``generic``: works for any objective with an exact subgradient. Mirror
  descent on Phi with steps 2 / ((1/lam - rho)(k + 2)) and (k+1)-weighted
  averaging, stopped when the Bregman distance between successive averages
  falls below ``tol``.
"""
from dataclasses import dataclass, field

import numpy as np
from scipy.optimize import brentq
from scipy.special import logsumexp

from .errors import IllPosedProxError, ProxSolverError, UnsupportedDiagnosticError
from .geometry import _check_interior, linear_step

GENERIC_MAX_ITER = 20_000
GENERIC_TOL = 1e-10
EPS_LEVELS = tuple(10.0 ** -k for k in range(0, 14))


@dataclass
class ProxResult:
    prox_point: np.ndarray
    envelope: float
    grad_map: np.ndarray
    bregman_stat: float
    solver_iters: int
    residual: float
    lam: float
    z: np.ndarray
    method: str
    info: dict = field(default_factory=dict)

    @property
    def grad_map_sq(self):
        return float(self.grad_map @ self.grad_map)

    def as_dict(self):
        return {
            "lambda": self.lam,
            "z": self.z.tolist(),
            "prox_point": self.prox_point.tolist(),
            "envelope": self.envelope,
            "grad_map": self.grad_map.tolist(),
            "bregman_stat": self.bregman_stat,
            "solver_iters": self.solver_iters,
            "residual": self.residual,
            "method": self.method,
        }


def prox_objective(obj, geom, lam, z, x):
    """Phi(x) = T(x) + D(x, z) / lam."""
    return obj.value(x) + geom.divergence(x, z) / lam


def _finish(obj, geom, lam, z, x, iters, residual, method, info=None):
    fs = geom.feasible_set
    if not fs.contains(x, tol=1e-9):
        x = fs.project(x)
    x = geom.interior(x)
    d_xz = geom.divergence(x, z)
    d_zx = geom.divergence(z, x)
    return ProxResult(
        prox_point=x,
        envelope=obj.value(x) + d_xz / lam,
        grad_map=(z - x) / lam,
        bregman_stat=(d_zx + d_xz) / lam ** 2,
        solver_iters=int(iters),
        residual=float(residual),
        lam=float(lam),
        z=z,
        method=method,
        info=info or {},
    )


def _auto_method(obj, geom):
    s = obj.structure
    name = type(s).__name__
    if name == "EntropyToyData" and geom.kind == "entropy" and obj.reg.is_zero:
        return "closed-form"
    if name == "PhaseRetrievalData" and obj.reg.is_zero:
        fs = geom.feasible_set
        if geom.kind == "entropy" or fs.kind == "whole" or (fs.kind == "ball" and fs.norm == "l2"):
            return "newton"
    if (hasattr(s, "smooth_grad") and hasattr(s, "smoothness") and geom.kind == "euclidean"
            and obj.reg.kind in ("zero", "l1")
            and obj.reg.prox(np.zeros(geom.dim), 1.0, geom.feasible_set) is not None):
        return "pg"
    return "generic"


def bregman_prox(obj, geom, lam, z, *, method="auto", tol=None, max_iter=None, x_init=None):
    """Solve min_x T(x) + D(x, z)/lam and return a :class:`ProxResult`.

    ``x_init`` warm-starts the iterative solvers (default z). ``tol`` and
    ``max_iter`` default to 1e-10 and 2e4 for the generic solver and to
    solver-specific values otherwise. Raises :class:`IllPosedProxError`
    when lam * rho >= 1 and :class:`ProxSolverError` on non-convergence.
    """
    lam = float(lam)
    if not lam > 0:
        raise IllPosedProxError("lambda must be positive")
    if lam * obj.rho >= 1.0:
        raise IllPosedProxError(f"lambda * rho = {lam * obj.rho:.6g} >= 1; prox is not well posed")
    z = _check_interior(geom, np.asarray(z, dtype=float), "z")
    if method == "auto":
        method = _auto_method(obj, geom)
    x0 = z.copy() if x_init is None else geom.interior(np.asarray(x_init, dtype=float))
    if method == "closed-form":
        x = _toy_closed_form(obj.structure, geom, lam, z)
        return _finish(obj, geom, lam, z, x, 0, 0.0, method)
    if method == "newton":
        x, iters, res, info = _pr_newton(obj, geom, lam, z, x0, tol or 1e-13, max_iter or 200)
        return _finish(obj, geom, lam, z, x, iters, res, method, info)
    if method == "pg":
        x, iters, res = _prox_gradient(obj, geom, lam, z, x0, tol or 1e-14, max_iter or 100_000)
        return _finish(obj, geom, lam, z, x, iters, res, method)
    if method == "generic":
        x, iters, res = _generic_prox(obj, geom, lam, z, x0, GENERIC_TOL if tol is None else tol,
                                      GENERIC_MAX_ITER if max_iter is None else max_iter)
        return _finish(obj, geom, lam, z, x, iters, res, method)
    raise ValueError(f"unknown prox method {method!r}")


def stationarity_at(obj, geom, rho_hat, z, **opts):
    """(G_lam(z), Delta_lam(z)) with lam = 1 / rho_hat."""
    if not rho_hat > obj.rho:
        raise IllPosedProxError(f"rho_hat = {rho_hat} must exceed rho = {obj.rho}")
    res = bregman_prox(obj, geom, 1.0 / rho_hat, z, **opts)
    return res.grad_map, res.bregman_stat


def envelope_value(obj, geom, lam, z, **opts):
    return bregman_prox(obj, geom, lam, z, **opts).envelope


def envelope_gradient_diag(obj, geom, lam, z, result=None, **opts):
    """grad T_lam(z) = hess omega(z) (z - x_hat) / lam.

    Needs ``geom.hess_apply``. In the Euclidean setup this equals G_lam(z).
    """
    if geom.hess_apply is None:
        raise UnsupportedDiagnosticError("geometry has no Hessian-apply callback")
    if result is None:
        result = bregman_prox(obj, geom, lam, z, **opts)
    return geom.hess_apply(result.z, result.z - result.prox_point) / lam


# --------------------------------------------------------------- closed form


def _toy_closed_form(toy, geom, lam, z):
    # stationarity: (1/lam - 1) log x = log(z)/lam - c + const
    mu = 1.0 / lam - 1.0
    s = (np.log(z) / lam - toy.c) / mu
    return geom.interior(np.exp(s - logsumexp(s)))


# ------------------------------------------------- smoothing Newton (|quad|)


def _huber_parts(c, eps):
    r = np.sqrt(c * c + eps * eps)
    val = c * c / (r + eps)
    d1 = c / r
    d2 = eps * eps / r ** 3
    return val, d1, d2


class _SmoothedPR:
    """Phi_eps(x) = mean psi_eps(<a_i,x>^2 - b_i) + D(x, z)/lam + nu/2 ||x||^2."""

    def __init__(self, pr, geom, lam, z, nu=0.0):
        self.A, self.b, self.m = pr.A, pr.b, pr.A.shape[0]
        self.geom, self.lam, self.z, self.nu = geom, lam, z, nu
        self.gz = geom.grad_omega(z)

    def value(self, x, eps):
        u = self.A @ x
        v, _, _ = _huber_parts(u * u - self.b, eps)
        return float(v.mean()) + self.geom.divergence_fn(x, self.z) / self.lam + 0.5 * self.nu * float(x @ x)

    def derivs(self, x, eps):
        u = self.A @ x
        _, d1, d2 = _huber_parts(u * u - self.b, eps)
        g = self.A.T @ (2.0 * u * d1) / self.m + (self.geom.grad_omega(x) - self.gz) / self.lam + self.nu * x
        w = 4.0 * u * u * d2 + 2.0 * d1
        H = (self.A.T * w) @ self.A / self.m + self.nu * np.eye(x.size)
        if self.geom.kind == "entropy":
            H[np.diag_indices_from(H)] += 1.0 / (self.lam * x)
        else:
            H[np.diag_indices_from(H)] += 1.0 / self.lam
        return g, H


def _newton_level(P, x, eps, max_iter, simplex):
    n = x.size
    F = P.value(x, eps)
    g = None
    for k in range(max_iter):
        g, H = P.derivs(x, eps)
        if simplex:
            K = np.zeros((n + 1, n + 1))
            K[:n, :n] = H
            K[:n, n] = K[n, :n] = 1.0
            sol = np.linalg.solve(K, np.concatenate([-g, [0.0]]))
            d = sol[:n]
            d -= d.mean()  # keep exactly on the hyperplane
        else:
            d = np.linalg.solve(H, -g)
        dec = -float(g @ d)
        tmax = 1.0
        if simplex:
            neg = d < 0
            if np.any(neg):
                tmax = min(1.0, 0.99 * float(np.min(-x[neg] / d[neg])))
        if dec <= 1e-14 * (1.0 + abs(F)) and tmax == 1.0:
            # in the quadratic regime the full step is as good as it gets
            x = x + d
            return x, F, k + 1, True, dec
        t = tmax
        while t > 1e-12:
            xn = x + t * d
            Fn = P.value(xn, eps)
            if Fn <= F - 1e-4 * t * dec:
                break
            t *= 0.5
        else:
            return x, F, k + 1, dec <= 1e-10 * (1.0 + abs(F)), dec
        x, F = xn, Fn
        if np.max(np.abs(t * d)) <= 1e-16 * (1.0 + np.max(np.abs(x))):
            return x, F, k + 1, True, dec
    return x, F, max_iter, False, dec


def _continuation(P, x, tol, max_iter, simplex):
    total = 0
    ok, dec = False, np.inf
    for eps in EPS_LEVELS:
        x, _, it, ok, dec = _newton_level(P, x, eps, max_iter, simplex)
        total += it
        if eps <= tol:
            break
    return x, total, ok, dec


def _pr_newton(obj, geom, lam, z, x0, tol, max_iter):
    pr = obj.structure
    fs = geom.feasible_set
    simplex = geom.kind == "entropy"
    if simplex:
        x0 = geom.interior(x0)
    P = _SmoothedPR(pr, geom, lam, z)
    x, iters, ok, dec = _continuation(P, x0.copy(), tol, max_iter, simplex)
    info = {"multiplier": 0.0}
    if not simplex and fs.kind == "ball" and np.linalg.norm(x) > fs.radius * (1 + 1e-13):
        R = fs.radius
        cache = {}

        def excess(nu):
            Pn = _SmoothedPR(pr, geom, lam, z, nu)
            cache[nu] = _continuation(Pn, fs.project(x0), tol, max_iter, False)
            xn = cache[nu][0]
            return float(np.linalg.norm(xn)) - R

        hi = 1.0 / lam
        while excess(hi) > 0:
            hi *= 4.0
            if hi > 1e12:
                raise ProxSolverError("ball multiplier search failed", best=fs.project(x))
        nu = brentq(excess, 0.0, hi, xtol=1e-15, rtol=4 * np.finfo(float).eps)
        if nu not in cache:
            excess(nu)
        x, it, ok, dec = cache[nu]
        iters += it
        info["multiplier"] = nu
        x = fs.project(x)
    if simplex:
        x = geom.interior(x / x.sum())
    # Newton decrement of the last smoothed level; the smoothed gradient
    # itself stays O(1) along active kinks
    res = float(np.sqrt(max(dec, 0.0)))
    if not ok:
        raise ProxSolverError("smoothing Newton did not converge", best=x, residual=res)
    return x, iters, res, info


# ------------------------------------------------- proximal gradient (smooth)


def _prox_gradient(obj, geom, lam, z, x0, tol, max_iter):
    s = obj.structure
    fs = geom.feasible_set
    reg = obj.reg

    def F(x):
        d = x - z
        return obj.f_value(x) + float(d @ d) / (2 * lam)

    def gradF(x):
        return s.smooth_grad(x) + (x - z) / lam

    eta = 1.0 / (s.smoothness() + 1.0 / lam)
    x = fs.project(x0)
    Fx = F(x)
    step = np.inf
    for k in range(max_iter):
        g = gradF(x)
        while True:
            y = reg.prox(x - eta * g, eta, fs)
            d = y - x
            Fy = F(y)
            if Fy <= Fx + float(g @ d) + float(d @ d) / (2 * eta) + 1e-15 * abs(Fx):
                break
            eta *= 0.5
        step = float(np.max(np.abs(d)))
        x, Fx = y, Fy
        if step <= tol * (1.0 + float(np.max(np.abs(x)))):
            return x, k + 1, step / eta
    raise ProxSolverError("proximal gradient did not converge", best=x, residual=step / eta)


# ----------------------------------------------------- generic mirror descent


def _generic_prox(obj, geom, lam, z, x0, tol, max_iter):
    if obj.f_subgrad is None:
        raise ProxSolverError("generic prox solver needs an exact subgradient of f")
    rho = obj.rho
    mu = 1.0 / lam - rho
    gz = geom.grad_omega(z)
    x = geom.interior(x0)
    avg = x.copy()
    wsum = 0.0
    gap = np.inf
    for k in range(max_iter):
        gx = geom.grad_omega(x)
        inv_eta = 0.5 * mu * (k + 2)
        v = obj.f_subgrad(x) + rho * gx - gz / lam - inv_eta * gx
        x = geom.interior(linear_step(geom, v, mu + inv_eta, obj.reg))
        w = k + 1.0
        wsum += w
        new_avg = geom.interior(avg + (w / wsum) * (x - avg))
        gap = geom.divergence_fn(new_avg, avg) if k > 0 else np.inf
        avg = new_avg
        if gap < tol:
            return avg, k + 1, gap
    raise ProxSolverError(f"generic prox solver did not converge in {max_iter} iterations",
                          best=avg, residual=gap)
