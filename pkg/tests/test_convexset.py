import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.optimize import minimize

from paretoprox.convexset import (
    Ball, Box, InfeasiblePointError, Polyhedron, WholeSpace, distance_subdiff_estimate_check,
    estimate_distance_subgradients, set_from_dict,
)

SIMPLEX = Polyhedron([[1.0, 1.0], [-1.0, 0.0], [0.0, -1.0]], [1.0, 0.0, 0.0])


def sets():
    return [Box([-1.0, -1.0], [1.0, 1.0]), Ball([0.0, 0.0], 1.0), SIMPLEX,
            Polyhedron([[1.0, 2.0], [-1.0, 0.5], [0.0, -1.0], [1.0, -1.0]], [2.0, 1.0, 1.0, 1.5])]


def test_projection_examples():
    assert np.array_equal(Box([-1, -1], [1, 1]).project([2.0, 0.0]), [1.0, 0.0])
    assert np.allclose(Ball([0, 0], 1).project([3.0, 4.0]), [0.6, 0.8])
    assert np.allclose(SIMPLEX.project([1.0, 1.0]), [0.5, 0.5], atol=1e-12)


def test_distance_examples():
    assert Box([0.0], [1.0]).distance([2.0]) == 1.0
    assert np.isclose(Ball([0, 0], 1).distance([3.0, 4.0]), 4.0)
    assert SIMPLEX.distance([0.2, 0.3]) == 0.0


def test_normal_cone_examples():
    box = Box([-1, -1], [1, 1])
    rays = box.normal_cone([1.0, 1.0]).rays
    assert sorted(map(tuple, rays)) == [(0.0, 1.0), (1.0, 0.0)]
    assert np.allclose(Ball([0, 0], 1).normal_cone([1.0, 0.0]).rays, [[1.0, 0.0]])
    assert box.normal_cone([0.0, 0.0]).is_trivial
    assert WholeSpace(2).normal_cone([5.0, 5.0]).is_trivial


def test_normal_cone_rejects_outside_points():
    with pytest.raises(InfeasiblePointError):
        Box([0.0], [1.0]).normal_cone([2.0])


def test_invalid_sets():
    with pytest.raises(ValueError):
        Box([1.0], [0.0])
    with pytest.raises(ValueError):
        Ball([0.0], 0.0)
    with pytest.raises(ValueError):
        Polyhedron([[1.0], [-1.0]], [-1.0, -1.0])


def test_polyhedron_bounding_box():
    lo, hi = SIMPLEX.bounding_box()
    assert np.allclose(lo, [0, 0]) and np.allclose(hi, [1, 1])


@settings(max_examples=60, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_projection_optimality_and_nonexpansive(seed):
    rng = np.random.default_rng(seed)
    for S in sets():
        x = rng.normal(scale=3.0, size=2)
        z = rng.normal(scale=3.0, size=2)
        px, pz = S.project(x), S.project(z)
        assert S.distance(px) <= 1e-12
        for y in S.sample(100, rng):
            assert (x - px) @ (y - px) <= 1e-10
        assert np.linalg.norm(px - pz) <= np.linalg.norm(x - z) + 1e-12
        assert np.allclose(S.project(px), px, atol=1e-14)


def test_polyhedron_projection_against_slsqp():
    rng = np.random.default_rng(7)
    for _ in range(40):
        A = rng.normal(size=(5, 3))
        b = np.abs(rng.normal(size=5)) + 0.1
        S = Polyhedron(A, b)
        x = rng.normal(scale=3.0, size=3)
        ref = minimize(lambda y: 0.5 * np.sum((y - x) ** 2), np.zeros(3), jac=lambda y: y - x,
                       constraints=[{"type": "ineq", "fun": lambda y: b - A @ y, "jac": lambda y: -A}],
                       method="SLSQP", options={"ftol": 1e-14})
        assert np.linalg.norm(S.project(x) - ref.x) <= 1e-6


@settings(max_examples=40, deadline=None)
@given(st.integers(0, 2 ** 31 - 1))
def test_normal_rays_are_fixed_by_projection(seed):
    rng = np.random.default_rng(seed)
    for S in sets():
        x = S.project(rng.normal(scale=3.0, size=2))
        cone = S.normal_cone(x)
        for v in cone.rays:
            # normal cone inequality on samples and the projection fixed point
            assert np.all((S.sample(50, rng) - x) @ v <= 1e-10)
            assert np.linalg.norm(S.project(x + 1e-3 * v) - x) <= 1e-9


def test_distance_subdiff_examples():
    assert distance_subdiff_estimate_check(Ball([0, 0], 1), [1.0, 0.0])
    est = estimate_distance_subgradients(Ball([0, 0], 1), [1.0, 0.0])
    assert np.all(est[:, 0] >= -1e-6) and np.allclose(est[:, 1], 0, atol=1e-6)
    assert distance_subdiff_estimate_check(Box([-1, -1], [1, 1]), [0.0, 0.0])
    assert np.allclose(estimate_distance_subgradients(Box([-1, -1], [1, 1]), [0.0, 0.0]), 0)
    assert distance_subdiff_estimate_check(Box([0.0], [1.0]), [1.0])
    est = estimate_distance_subgradients(Box([0.0], [1.0]), [1.0])
    assert np.all((est >= -1e-12) & (est <= 1 + 1e-12))


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 31 - 1), st.floats(1e-3, 1e3))
def test_scaled_distance_subgradients_are_normal(seed, lam):
    rng = np.random.default_rng(seed)
    for S in sets():
        x = S.project(rng.normal(scale=3.0, size=2))
        cone = S.normal_cone(x)
        for u in estimate_distance_subgradients(S, x, samples=16, seed=seed):
            assert cone.distance(lam * u) <= 1e-8 * max(1.0, lam)


def test_set_round_trip():
    for S in sets() + [WholeSpace(3)]:
        T = set_from_dict(S.to_dict())
        assert T.to_dict() == S.to_dict()
