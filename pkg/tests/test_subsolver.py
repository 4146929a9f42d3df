import numpy as np
import pytest
from scipy.optimize import minimize_scalar

from paretoprox.convexset import Box
from paretoprox.funcspace import MaxOf, NormSqShift, Smooth, VectorFunction, eval_vector
from paretoprox.subsolver import SubproblemSpec, dominance_defect, scalarized_value, solve


def test_one_dimensional_prox_point(x_squared):
    spec = SubproblemSpec(VectorFunction([x_squared]), Box([-10.0], [10.0]), [1.0], 2.0, [1.0])
    res = solve(spec)
    assert res.accepted
    assert abs(res.point[0] - 0.5) <= 1e-9
    assert abs(res.weak_pareto_defect - 0.5) <= 1e-9


def test_dominance_defect_examples(x_squared):
    spec = SubproblemSpec(VectorFunction([x_squared]), Box([-10.0], [10.0]), [1.0], 2.0, [1.0])
    assert dominance_defect(spec, [1.0]) == 0.0
    assert dominance_defect(spec, [0.5]) == pytest.approx(0.5, abs=1e-15)
    assert dominance_defect(spec, [1.5]) < 0


def test_critical_anchor_is_returned(x_squared):
    spec = SubproblemSpec(VectorFunction([x_squared]), Box([-10.0], [10.0]), [0.0], 1.0, [1.0])
    res = solve(spec)
    assert res.accepted and res.point[0] == 0.0


def test_two_objective_step_stays_in_descent_set(two_parabolas):
    e = np.full(2, 2 ** -0.5)
    spec = SubproblemSpec(two_parabolas, Box([-2.0], [2.0]), [0.0], 1.0, e)
    res = solve(spec)
    assert res.accepted
    assert -1.0 <= res.point[0] <= 1.0
    assert np.all(eval_vector(two_parabolas, res.point) <= np.ones(2) + 1e-9)
    assert res.weak_pareto_defect >= -1e-9


def test_spec_validation(x_squared):
    F = VectorFunction([x_squared])
    S = Box([-1.0], [1.0])
    with pytest.raises(ValueError):
        SubproblemSpec(F, S, [0.0], 0.0, [1.0])
    with pytest.raises(ValueError):
        SubproblemSpec(F, S, [0.0], 1.0, [0.5])
    with pytest.raises(ValueError):
        SubproblemSpec(F, S, [2.0], 1.0, [1.0])
    with pytest.raises(ValueError):
        SubproblemSpec(F, S, [0.5], 1.0, [1.0], anchor_values=[1.0])
    spec = SubproblemSpec(F, S, [0.5], 1.0, [1.0])
    with pytest.raises(ValueError):
        solve(spec, starts=0)


def test_deterministic(two_parabolas):
    e = np.full(2, 2 ** -0.5)
    spec = SubproblemSpec(two_parabolas, Box([-2.0], [2.0]), [-1.7], 1.0, e)
    a, b = solve(spec, starts=4, seed=3), solve(spec, starts=4, seed=3)
    assert a.point.tobytes() == b.point.tobytes()
    assert a.scalarization_weights.tobytes() == b.scalarization_weights.tobytes()


def _descent_interval(spec, lo, hi):
    xs = np.linspace(lo, hi, 200001)
    V = np.array([[f.value(np.array([t])) for t in xs] for f in spec.F.components])
    ok = np.all(V <= spec.anchor_values[:, None] + 1e-12, axis=0)
    return xs[ok].min(), xs[ok].max()


CONVEX_CASES = [
    (VectorFunction([Smooth(NormSqShift([0.0], 1.0, 0.0))]), [-10.0, 10.0], 3.0, 1.0),
    (VectorFunction([Smooth(NormSqShift([1.0], 1.0, 0.0)), Smooth(NormSqShift([-1.0], 1.0, 0.0))]),
     [-2.0, 2.0], -1.8, 1.0),
    (VectorFunction([Smooth(NormSqShift([1.0], 1.0, 0.0)), Smooth(NormSqShift([-1.0], 1.0, 0.0))]),
     [-2.0, 2.0], 1.9, 0.5),
    (VectorFunction([MaxOf([NormSqShift([1.0], 1.0, 0.0), NormSqShift([0.5], 2.0, -0.3)]),
                     Smooth(NormSqShift([-1.0], 1.0, 0.0))]), [-2.0, 2.0], 1.5, 1.0),
]


@pytest.mark.parametrize("F,box,anchor,lam", CONVEX_CASES)
def test_matches_scalar_prox_on_convex_problems(F, box, anchor, lam):
    e = np.full(F.m, F.m ** -0.5)
    spec = SubproblemSpec(F, Box([box[0]], [box[1]]), [anchor], lam, e)
    res = solve(spec)
    z = res.scalarization_weights
    lo, hi = _descent_interval(spec, *box)
    ref = minimize_scalar(lambda t: scalarized_value(spec, z, [t]), bounds=(lo, hi),
                          method="bounded", options={"xatol": 1e-12})
    assert abs(res.point[0] - ref.x) <= 1e-5


def test_subgradient_method_close_to_smooth(x_squared):
    spec = SubproblemSpec(VectorFunction([x_squared]), Box([-10.0], [10.0]), [1.0], 2.0, [1.0])
    res = solve(spec, method="subgradient", steps=5000)
    assert res.accepted
    assert abs(res.point[0] - 0.5) <= 1e-2
    assert res.weak_pareto_defect >= -1e-9
    with pytest.raises(ValueError):
        solve(spec, method="newton")
