import numpy as np
import pytest

from smdrate.benchmarks import (
    BENCHMARKS,
    benchmark_from_dict,
    benchmark_to_dict,
    convex_quadratic,
    load_benchmark,
    make_benchmark,
    save_benchmark,
)
from smdrate.errors import InvalidProbeError
from smdrate.geometry import FeasibleSet, entropy, euclidean
from smdrate.objective import (
    SRC,
    CompositeObjective,
    StochasticOracle,
    blend_geometry,
    certify_rwc,
    compose_subgradient,
    composition_modulus,
    deterministic_oracle,
    max_objective,
    oracle_bias_check,
    rwc_subgradient,
    second_moment_check,
    src_moment_check,
    sum_objective,
)

SHIPPED = [("phase-retrieval", "euclidean"), ("phase-retrieval", "entropy"),
           ("sparse-ncvx-regression", "euclidean"), ("entropy-toy", "entropy")]


def _neg_half_sq(n):
    return CompositeObjective(
        dim=n,
        f_value=lambda x: -0.5 * float(x @ x),
        f_subgrad=lambda x: -np.asarray(x, dtype=float),
        oracle=deterministic_oracle(lambda x: -np.asarray(x, dtype=float)),
        rho=1.0, L=1.0, name="neg-half-sq",
    )


def _neg_entropy(n):
    # -sum x log x, concave; adding omega = sum x log x gives 0
    return CompositeObjective(
        dim=n,
        f_value=lambda x: -float(np.sum(x * np.log(x))),
        f_subgrad=lambda x: -np.log(x) - 1.0,
        oracle=deterministic_oracle(lambda x: -np.log(x) - 1.0),
        rho=1.0, L=30.0, name="neg-entropy",
    )


# ------------------------------------------------------------- calculus rules


def test_rwc_subgradient_example():
    g = rwc_subgradient(np.array([1.0, 2.0]), euclidean(2), 0.5, np.array([2.0, -2.0]))
    assert np.array_equal(g, [0.0, 3.0])
    assert np.array_equal(rwc_subgradient(np.array([1.0, 2.0]), euclidean(2), 0.0, np.zeros(2)), [1.0, 2.0])


def test_rwc_subgradient_entropy():
    x = np.array([0.25, 0.75])
    g = rwc_subgradient(np.zeros(2), entropy(2), 2.0, x)
    assert np.allclose(g, -2.0 * (np.log(x) + 1.0), atol=1e-15)


def test_compose_subgradient_matches_phase_retrieval():
    b = make_benchmark("phase-retrieval", n=4, m=7, seed=3)
    A, y = b.meta["raw"]
    x = np.random.default_rng(0).standard_normal(4)
    r = (A @ x) ** 2 - y
    w = np.sign(r) / A.shape[0]
    jac_t = lambda x, w: (2 * (A @ x)[:, None] * A).T @ w
    g = compose_subgradient(w, jac_t, x)
    assert np.allclose(g, b.objective.f_subgrad(x), atol=1e-13)


def test_phase_retrieval_subgradient_matches_finite_differences_off_kinks():
    b = make_benchmark("phase-retrieval", n=5, m=12, seed=1)
    rng = np.random.default_rng(2)
    f = b.objective.f_value
    for _ in range(10):
        x = rng.standard_normal(5)
        h = 1e-7
        fd = np.array([(f(x + h * e) - f(x - h * e)) / (2 * h) for e in np.eye(5)])
        assert np.allclose(fd, b.objective.f_subgrad(x), atol=1e-5)


def test_composition_modulus():
    assert composition_modulus(2.0, 3.0) == 6.0
    assert composition_modulus(1.0, 0.0) == 1e-12


def test_sum_rule_with_blended_geometry_on_simplex():
    n = 4
    f = sum_objective(_neg_half_sq(n), _neg_entropy(n))
    assert f.rho == 2.0
    geom = blend_geometry(euclidean(n, FeasibleSet.simplex(n)), 1.0, entropy(n), 1.0)
    rng = np.random.default_rng(0)
    assert certify_rwc(f, geom, 400, rng).ok
    assert not certify_rwc(f, geom, 400, rng, rho=1.0).ok


def test_blended_geometry_is_strongly_convex_in_l2():
    n = 4
    geom = blend_geometry(euclidean(n, FeasibleSet.simplex(n)), 1.0, entropy(n), 3.0)
    rng = np.random.default_rng(1)
    for x, y in zip(rng.dirichlet(np.ones(n), 100), rng.dirichlet(np.ones(n), 100)):
        assert geom.divergence_fn(x, y) >= 0.5 * np.sum((x - y) ** 2) - 1e-14


def test_max_rule():
    a = make_benchmark("phase-retrieval", n=3, m=6, seed=0).objective
    b = make_benchmark("phase-retrieval", n=3, m=6, seed=1).objective
    f = max_objective([a, b])
    assert f.rho == max(a.rho, b.rho)
    x = np.array([0.3, -0.2, 0.5])
    assert f.f_value(x) == max(a.f_value(x), b.f_value(x))
    geom = euclidean(3, FeasibleSet.ball(3, 1.5))
    assert certify_rwc(f, geom, 300, np.random.default_rng(0)).ok


def test_sum_rule_refuses_regularized_parts():
    b = make_benchmark("sparse-ncvx-regression", n=3, m=5)
    with pytest.raises(ValueError):
        sum_objective(b.objective, b.objective)


# ------------------------------------------------------------- certificates


@pytest.mark.parametrize("name,geo", SHIPPED)
def test_shipped_constants_certify(name, geo):
    b = make_benchmark(name, geometry=geo)
    cert = certify_rwc(b.objective, b.geometry, 500, np.random.default_rng(0))
    assert cert.ok, cert.as_dict()


@pytest.mark.parametrize("name,geo", [("phase-retrieval", "euclidean"), ("entropy-toy", "entropy")])
def test_understated_rho_is_caught(name, geo):
    b = make_benchmark(name, geometry=geo)
    cert = certify_rwc(b.objective, b.geometry, 500, np.random.default_rng(0), rho=b.rho / 10)
    assert cert.n_violations > 0


def test_certificate_does_not_mutate_rho():
    b = make_benchmark("entropy-toy")
    certify_rwc(b.objective, b.geometry, 50, np.random.default_rng(0), rho=0.1)
    assert b.objective.rho == 1.0


def test_certify_rwc_input_errors():
    b = make_benchmark("entropy-toy")
    with pytest.raises(ValueError):
        certify_rwc(b.objective, b.geometry, 0, np.random.default_rng(0))
    no_sub = CompositeObjective(dim=2, f_value=lambda x: 0.0,
                                oracle=deterministic_oracle(lambda x: np.zeros(2)), rho=0.0, L=1.0)
    with pytest.raises(ValueError):
        certify_rwc(no_sub, euclidean(2), 5, np.random.default_rng(0))


@pytest.mark.parametrize("name,geo", SHIPPED)
def test_second_moment_within_L(name, geo):
    b = make_benchmark(name, geometry=geo)
    rep = second_moment_check(b.objective, b.geometry, np.random.default_rng(0), n_points=5, n_draws=2000)
    assert rep.ok


@pytest.mark.parametrize("name,geo", SHIPPED)
def test_oracle_is_unbiased(name, geo):
    b = make_benchmark(name, geometry=geo)
    x = b.geometry.interior(b.geometry.feasible_set.sample(np.random.default_rng(1), 1, scale=0.5)[0])
    rep = oracle_bias_check(b.objective, x, np.random.default_rng(2), n_draws=20_000)
    assert rep.ok, (rep.max_abs_dev, rep.max_allowed)


def test_src_check_reports_divergence_ratio_at_least_one():
    b = make_benchmark("phase-retrieval", geometry="entropy", oracle_mode=SRC)
    rep = src_moment_check(b.objective, b.geometry, b.x0, 2000, np.random.default_rng(0))
    assert rep.min_divergence_ratio >= 1.0 - 1e-12
    assert not rep.exceeds


def test_src_check_flags_overstated_claim():
    b = make_benchmark("phase-retrieval", geometry="entropy", oracle_mode=SRC)
    small = b.objective.with_mode(SRC, L=1e-3)
    rep = src_moment_check(small, b.geometry, b.x0, 500, np.random.default_rng(0))
    assert rep.exceeds


def test_src_check_rejects_degenerate_probes():
    b = make_benchmark("entropy-toy")
    with pytest.raises(InvalidProbeError):
        src_moment_check(b.objective, b.geometry, b.x0, 10, np.random.default_rng(0), probes=[b.x0])


def test_oracle_sample_many_shape():
    b = make_benchmark("phase-retrieval", n=4, m=9)
    G = b.objective.oracle.sample_many(b.x0, np.random.default_rng(0), 7)
    assert G.shape == (7, 4)
    assert isinstance(b.objective.oracle, StochasticOracle)


# ------------------------------------------------------------- benchmarks


def test_phase_retrieval_constants_recomputed():
    b = make_benchmark("phase-retrieval", n=6, m=15, seed=4)
    A, y = b.meta["raw"]
    m = 15
    assert b.rho == pytest.approx(2 * np.linalg.norm(A, 2) ** 2 / m, rel=1e-12)
    assert b.T_min == 0.0 and b.objective.value(b.x_star) == pytest.approx(0.0, abs=1e-14)
    # L^2 >= E||G||^2 at random points of the ball, and is attained on the boundary
    R = b.geometry.feasible_set.radius
    rng = np.random.default_rng(0)
    worst = 0.0
    for _ in range(200):
        d = rng.standard_normal(6)
        x = R * d / np.linalg.norm(d)
        worst = max(worst, np.mean([np.sum((2 * (a @ x) * a) ** 2) for a in A]))
    assert worst <= b.L ** 2 * (1 + 1e-12)
    assert worst >= 0.5 * b.L ** 2


def test_sparse_regression_constants_recomputed():
    b = make_benchmark("sparse-ncvx-regression", n=5, m=11, seed=2, lam=0.1)
    A, _ = b.meta["raw"]
    assert b.rho == pytest.approx(np.linalg.eigvalsh(A.T @ A).max() / (4 * 11), rel=1e-12)
    assert b.L == pytest.approx(np.sqrt(np.mean(np.sum(A ** 2, axis=1))), rel=1e-12)
    assert b.T_min is None
    assert b.objective.reg.weight == 0.1


def test_entropy_toy_minimum_is_smallest_cost():
    b = make_benchmark("entropy-toy", n=5, seed=3)
    c = b.meta["raw"][0]
    assert b.T_min == c.min() and b.rho == 1.0
    v = np.eye(5)[np.argmin(c)]
    assert b.objective.value(b.geometry.interior(v)) == pytest.approx(c.min(), abs=1e-9)


def test_same_seed_same_data():
    a = make_benchmark("phase-retrieval", seed=7)
    b = make_benchmark("phase-retrieval", seed=7)
    assert np.array_equal(a.meta["raw"][0], b.meta["raw"][0]) and np.array_equal(a.x0, b.x0)


@pytest.mark.parametrize("kwargs", [
    {"name": "nope"},
    {"name": "entropy-toy", "geometry": "euclidean"},
    {"name": "phase-retrieval", "oracle_mode": "weird"},
    {"name": "entropy-toy", "n": 1},
])
def test_make_benchmark_rejects_bad_arguments(kwargs):
    with pytest.raises(ValueError):
        make_benchmark(**kwargs)


@pytest.mark.parametrize("name,geo", SHIPPED)
def test_json_round_trip(tmp_path, name, geo):
    b = make_benchmark(name, geometry=geo, seed=5)
    path = tmp_path / "b.json"
    save_benchmark(b, path)
    c = load_benchmark(path)
    assert c.rho == b.rho and c.L == b.L and c.T_min == b.T_min
    assert np.array_equal(c.x0, b.x0)
    x = b.geometry.interior(b.geometry.feasible_set.sample(np.random.default_rng(0), 1)[0])
    assert c.objective.value(x) == b.objective.value(x)
    assert benchmark_to_dict(c) == benchmark_to_dict(b)


def test_json_schema_errors():
    d = benchmark_to_dict(make_benchmark("entropy-toy"))
    with pytest.raises(ValueError):
        benchmark_from_dict({**d, "schema": "other"})
    with pytest.raises(ValueError):
        benchmark_from_dict({**d, "version": 99})


def test_convex_quadratic_is_convex():
    obj, geom = convex_quadratic(np.array([1.0, -1.0]))
    assert obj.rho == 0.0
    assert certify_rwc(obj, geom, 50, np.random.default_rng(0)).ok


def test_benchmark_names_listed():
    assert set(BENCHMARKS) == {n for n, _ in SHIPPED}
