import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from smdrate.errors import BoundaryPointError, NumericOverflowError, StepSolverError
from smdrate.geometry import (
    FeasibleSet,
    bregman_divergence,
    entropy,
    euclidean,
    linear_step,
    mirror_step,
    project_simplex,
    three_point_residual,
)
from smdrate.regularizer import Regularizer

# KL values from a 40-digit mpmath evaluation of sum x log(x / y)
KL_09_01_VS_HALF = 0.3680642071684970699106821
KL_3D = 0.01006775677534443671025639

finite = st.floats(-5, 5, allow_nan=False)


def simplex_points(n):
    w = arrays(float, n, elements=st.floats(0.05, 1.0))
    return w.map(lambda v: v / v.sum())


# ------------------------------------------------------------- divergences


def test_euclidean_divergence_example():
    g = euclidean(2)
    assert bregman_divergence(g, np.array([1.0, 0.0]), np.zeros(2)) == 0.5


def test_entropy_divergence_zero_on_diagonal():
    g = entropy(2)
    assert bregman_divergence(g, np.array([0.5, 0.5]), np.array([0.5, 0.5])) == 0.0


def test_entropy_divergence_matches_high_precision_kl():
    g = entropy(2)
    d = bregman_divergence(g, np.array([0.9, 0.1]), np.array([0.5, 0.5]))
    assert d == pytest.approx(KL_09_01_VS_HALF, rel=1e-14)
    d3 = bregman_divergence(entropy(3), np.array([0.2, 0.3, 0.5]), np.array([0.25, 0.25, 0.5]))
    assert d3 == pytest.approx(KL_3D, rel=1e-13)


def test_divergence_rejects_points_outside_the_set():
    g = entropy(3)
    with pytest.raises(BoundaryPointError):
        bregman_divergence(g, np.array([0.2, 0.3, 0.5]), np.array([0.6, 0.6, -0.2]))
    gb = euclidean(2, FeasibleSet.ball(2, 1.0))
    with pytest.raises(BoundaryPointError):
        bregman_divergence(gb, np.zeros(2), np.array([2.0, 0.0]))


@pytest.mark.filterwarnings("ignore::RuntimeWarning")
def test_divergence_overflow_is_reported():
    g = euclidean(2)
    with pytest.raises(NumericOverflowError):
        bregman_divergence(g, np.array([1e300, 1e300]), np.zeros(2))


def test_entropy_clips_boundary_points():
    g = entropy(3)
    d = bregman_divergence(g, np.array([0.5, 0.5, 0.0]), np.array([1.0, 0.0, 0.0]))
    assert np.isfinite(d) and d > 0


@given(arrays(float, 4, elements=finite), arrays(float, 4, elements=finite))
def test_euclidean_strong_convexity_floor(x, y):
    g = euclidean(4)
    assert g.divergence(x, y) >= 0.5 * np.sum((x - y) ** 2) - 1e-12


@given(simplex_points(5), simplex_points(5))
def test_entropy_strong_convexity_floor(x, y):
    # Pinsker: KL(x || y) >= 1/2 ||x - y||_1^2
    g = entropy(5)
    assert g.divergence(x, y) >= 0.5 * np.sum(np.abs(x - y)) ** 2 - 1e-12


@given(simplex_points(4), simplex_points(4), simplex_points(4))
def test_three_point_identity_entropy(x, y, z):
    assert abs(three_point_residual(entropy(4), x, y, z)) <= 1e-10


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=finite), arrays(float, 3, elements=finite))
def test_three_point_identity_euclidean(x, y, z):
    assert abs(three_point_residual(euclidean(3), x, y, z)) <= 1e-10 * max(1.0, np.sum(x * x + y * y + z * z))


def test_three_point_residual_exact_zero_on_diagonal():
    x = np.array([0.2, 0.3, 0.5])
    assert three_point_residual(entropy(3), x, x, x) == 0.0
    assert three_point_residual(euclidean(3), x, x, x) == 0.0


@pytest.mark.parametrize("geom", [euclidean(4), entropy(4)], ids=["euclidean", "entropy"])
def test_grad_omega_matches_finite_differences(geom):
    rng = np.random.default_rng(0)
    for _ in range(10):
        x = rng.dirichlet(np.ones(4)) if geom.kind == "entropy" else rng.standard_normal(4)
        h = 1e-6
        fd = np.array([(geom.omega(x + h * e) - geom.omega(x - h * e)) / (2 * h) for e in np.eye(4)])
        assert np.allclose(fd, geom.grad_omega(x), atol=1e-7)


@pytest.mark.parametrize("geom", [euclidean(5), entropy(5)], ids=["euclidean", "entropy"])
def test_dual_norm_holder(geom):
    rng = np.random.default_rng(1)
    for _ in range(200):
        g, v = rng.standard_normal(5), rng.standard_normal(5)
        assert g @ v <= geom.dual_norm(g) * geom.norm(v) + 1e-12


# ------------------------------------------------------------- mirror step


def test_mirror_step_euclidean_closed_form_example():
    x = mirror_step(euclidean(2), np.array([1.0, 1.0]), np.array([1.0, 0.0]), 0.5)
    assert np.array_equal(x, [0.5, 1.0])


def test_mirror_step_entropy_zero_gradient_is_fixed_point():
    x_t = np.array([0.2, 0.3, 0.5])
    assert np.allclose(mirror_step(entropy(3), x_t, np.zeros(3), 0.7), x_t, rtol=0, atol=1e-15)


def test_mirror_step_l1_matches_brute_force_grid():
    rng = np.random.default_rng(2)
    g = euclidean(2)
    reg = Regularizer.l1(0.3)
    step = 1e-4
    for _ in range(5):
        x_t, grad = rng.standard_normal(2), rng.standard_normal(2)
        alpha = 0.5
        x = mirror_step(g, x_t, grad, alpha, reg)
        # the step objective is separable, so a 1-D grid per coordinate suffices
        for j in range(2):
            t = np.arange(-4.0, 4.0, step)
            vals = t * grad[j] + 0.3 * np.abs(t) + 0.5 * (t - x_t[j]) ** 2 / alpha
            assert abs(t[np.argmin(vals)] - x[j]) <= 1e-4


@pytest.mark.parametrize("fs", [FeasibleSet.box(-np.ones(3), np.ones(3)), FeasibleSet.whole(3),
                                FeasibleSet.ball(3, 0.5)], ids=["box", "whole", "ball"])
def test_closed_form_matches_generic_euclidean(fs):
    rng = np.random.default_rng(3)
    g = euclidean(3, fs)
    reg = Regularizer.l1(0.2)
    for _ in range(20):
        x_t = fs.project(rng.standard_normal(3))
        grad = 3 * rng.standard_normal(3)
        a = mirror_step(g, x_t, grad, 0.4, reg)
        b = mirror_step(g, x_t, grad, 0.4, reg, method="generic", max_iter=500)
        assert np.max(np.abs(a - b)) <= 1e-6


def test_closed_form_matches_generic_entropy():
    rng = np.random.default_rng(4)
    g = entropy(4)
    for _ in range(20):
        x_t = rng.dirichlet(np.ones(4))
        grad = rng.standard_normal(4)
        a = mirror_step(g, x_t, grad, 0.3)
        b = mirror_step(g, x_t, grad, 0.3, method="generic", max_iter=500)
        assert np.max(np.abs(a - b)) <= 1e-6


@given(simplex_points(4), arrays(float, 4, elements=st.floats(-50, 50)), st.floats(1e-3, 10))
def test_mirror_step_stays_feasible_entropy(x_t, grad, alpha):
    x = mirror_step(entropy(4), x_t, grad, alpha)
    assert np.all(x > 0) and abs(x.sum() - 1) <= 1e-12


@given(arrays(float, 3, elements=finite), arrays(float, 3, elements=st.floats(-50, 50)), st.floats(1e-3, 10))
def test_mirror_step_stays_feasible_ball(x_t, grad, alpha):
    fs = FeasibleSet.ball(3, 1.0)
    x = mirror_step(euclidean(3, fs), fs.project(x_t), grad, alpha, Regularizer.l1(0.1))
    assert np.linalg.norm(x) <= 1.0 + 1e-12


def test_mirror_step_three_point_inequality():
    # phi(x) + D(x, x_t)/alpha >= phi(x+) + D(x+, x_t)/alpha + D(x, x+)/alpha
    rng = np.random.default_rng(5)
    g = entropy(5)
    x_t = rng.dirichlet(np.ones(5))
    grad = rng.standard_normal(5)
    alpha = 0.8
    xp = mirror_step(g, x_t, grad, alpha)
    for x in rng.dirichlet(np.ones(5), size=50):
        lhs = grad @ x + g.divergence(x, x_t) / alpha
        rhs = grad @ xp + g.divergence(xp, x_t) / alpha + g.divergence(x, xp) / alpha
        assert lhs >= rhs - 1e-10


def test_generic_solver_budget_exhaustion_carries_best_iterate():
    g = entropy(4)
    with pytest.raises(StepSolverError) as info:
        mirror_step(g, np.array([0.1, 0.2, 0.3, 0.4]), np.array([5.0, -3.0, 1.0, 0.0]), 2.0,
                    method="generic", max_iter=2)
    assert info.value.best is not None and np.isfinite(info.value.residual)


def test_linear_step_entropy_is_softmax():
    v = np.array([1.0, 2.0, 0.5])
    x = linear_step(entropy(3), v, 2.0)
    w = np.exp(-v / 2.0)
    assert np.allclose(x, w / w.sum(), atol=1e-15)


def test_project_simplex_kkt():
    rng = np.random.default_rng(6)
    for _ in range(50):
        v = 3 * rng.standard_normal(6)
        p = project_simplex(v)
        assert abs(p.sum() - 1) < 1e-12 and np.all(p >= 0)
        # optimality: <v - p, q - p> <= 0 for vertices q
        for q in np.eye(6):
            assert (v - p) @ (q - p) <= 1e-10
