"""
Fixed-point search tests. Analytic maps exercise the Newton solver; the
default compass cycle is solved directly and the wobbling cycles are
covered by the slow tests.
"""

import math

import numpy as np
import pytest

from errors import MapUndefinedError, NoConvergenceError
from limit_cycle_search import (
    LimitCycle,
    PoincareMap,
    SectionState,
    contraction_rate,
    find_fixed_point,
    iterate_map,
    map_jacobian,
    newton_fixed_point,
    preferred_cycle,
    resonance_order,
    same_cycle,
    seed_compass_cycle,
    wobble_seeds,
)
from walkers import create_walker
from walkers.walker_types import HybridState, ModelParams, SimConfig

A = np.array([[0.5, 0.2, 0.0], [-0.1, 0.3, 0.1], [0.0, 0.4, -0.6]])
B = np.array([1.0, -2.0, 0.5])


def linear_map(z):
    return A @ z + B


def test_newton_solves_linear_map():
    result = newton_fixed_point(linear_map, np.zeros(3), tol=1e-12)
    expected = np.linalg.solve(np.eye(3) - A, B)
    assert np.allclose(result.z, expected, atol=1e-10)
    assert result.residual <= 1e-12
    assert np.allclose(result.jacobian, A, atol=1e-6)


def test_newton_on_nonlinear_contraction():
    def sine_map(z):
        return 0.5 * np.sin(z) + np.array([0.3, -0.2])

    result = newton_fixed_point(sine_map, np.zeros(2), tol=1e-12)
    assert np.allclose(sine_map(result.z), result.z, atol=1e-12)
    assert result.iterations <= 10


def test_exact_guess_needs_no_iterations():
    fixed = np.linalg.solve(np.eye(3) - A, B)
    result = newton_fixed_point(linear_map, fixed, tol=1e-8)
    assert result.iterations == 0


def test_map_without_fixed_point_does_not_converge():
    with pytest.raises(NoConvergenceError) as info:
        newton_fixed_point(lambda z: z + 1.0, np.zeros(2), tol=1e-10, max_iter=5)
    assert info.value.residual == pytest.approx(1.0)


def test_map_jacobian_of_quadratic():
    def quadratic(z):
        return np.array([z[0] ** 2 + z[1], 3.0 * z[0] * z[1]])

    z = np.array([1.5, -0.5])
    expected = np.array([[3.0, 1.0], [-1.5, 4.5]])
    assert np.allclose(map_jacobian(quadratic, z), expected, atol=1e-8)
    assert np.allclose(map_jacobian(quadratic, z, step_scale=100.0), expected, atol=1e-6)


def test_section_embedding_round_trip():
    poincare = PoincareMap(create_walker(ModelParams()))
    assert poincare.names == ("theta1", "dtheta1", "dtheta2", "x", "dx")
    z = np.array([-0.15, 0.9, 0.4, 0.01, -0.2])
    state = poincare.embed(z)
    assert state.theta2 == pytest.approx(2.0 * state.theta1)
    assert np.allclose(poincare.project(state), z)


def test_section_includes_phase_without_reset():
    poincare = PoincareMap(create_walker(ModelParams(phase_reset=False)))
    assert poincare.dimension == 6
    assert poincare.embed([-0.1, 1.0, 0.0, 0.0, 0.0, 2.5]).phi == 2.5
    compass = PoincareMap(create_walker(ModelParams(), "compass"))
    assert compass.dimension == 3


def test_section_state_access():
    state = SectionState.from_array([-0.1, 0.8, 0.2], ("theta1", "dtheta1", "dtheta2"))
    assert state.get("dtheta1") == 0.8
    assert state.get("x") == 0.0
    assert state.to_dict()["theta1"] == -0.1
    with pytest.raises(ValueError):
        SectionState.from_array([1.0], ("theta1", "dtheta1"))


def test_map_undefined_without_forward_motion():
    poincare = PoincareMap(create_walker(ModelParams().passive()), SimConfig(max_stride_time=3.0))
    with pytest.raises(MapUndefinedError) as info:
        poincare([-0.05, 0.0, 0.0, 0.0, 0.0])
    assert info.value.iterate is not None


def test_iterate_map_is_map_composition():
    params = ModelParams(omega=3.0)
    poincare = PoincareMap(create_walker(params, "compass"))
    z = np.array([-0.0968, 0.4887, 0.0091])
    points = iterate_map(z, 2, params, kind="compass")
    assert len(points) == 3
    assert np.array_equal(points[0], z)
    assert np.array_equal(points[2], poincare(poincare(z)))


def test_default_compass_cycle_is_found():
    params = ModelParams()
    cycle = seed_compass_cycle(params)
    assert cycle.kind == "compass"
    assert cycle.residual <= 1e-10
    assert cycle.period > 0.0
    assert cycle.fixed_point.get("theta1") < 0.0
    poincare = PoincareMap(create_walker(params, "compass"))
    z = cycle.fixed_point.as_array()
    assert np.max(np.abs(poincare(z) - z)) <= 1e-8
    assert len(cycle.eigenvalues) == 3


def make_compass(params, period, theta1=-0.2):
    return LimitCycle(
        fixed_point=SectionState.from_array([theta1, 1.0, 0.5], ("theta1", "dtheta1", "dtheta2")),
        period=period,
        eigenvalues=np.array([0.5, 0.1, 0.0]),
        stable=True,
        residual=0.0,
        params=params,
        kind="compass",
    )


def test_wobble_seeds_follow_stride_harmonics():
    params = ModelParams(k=4.0, alpha=0.25)
    seeds = wobble_seeds(make_compass(params, 2.0), params)
    order = resonance_order(2.0, params)
    assert order == pytest.approx(2.0 * 4.0 / (2.0 * math.pi))
    # Harmonics 1 and 2 bracket the order 1.27; 1 is closer and comes first.
    assert len(seeds) == 9
    assert seeds[0].get("x") == 0.0 and seeds[0].get("dx") == 0.0
    assert seeds[1].get("dx") == pytest.approx(0.05 * 2.0 * math.pi / 2.0)
    assert seeds[5].get("dx") == pytest.approx(0.05 * 2.0 * 2.0 * math.pi / 2.0)
    assert seeds[2].get("x") == pytest.approx(0.05)
    assert all(seed.get("theta1") == -0.2 for seed in seeds)


def test_wobble_seeds_below_first_resonance():
    params = ModelParams(k=0.5, alpha=0.25)
    seeds = wobble_seeds(make_compass(params, 1.0), params)
    assert resonance_order(1.0, params) < 1.0
    assert len(seeds) == 5
    assert seeds[1].get("dx") == pytest.approx(0.05 * 2.0 * math.pi)


def test_preferred_cycle_and_identity():
    params = ModelParams()
    unstable = LimitCycle(make_compass(params, 1.0).fixed_point, 1.0, np.array([1.3]), False, 0.0, params)
    weak = LimitCycle(make_compass(params, 1.0, -0.1).fixed_point, 1.0, np.array([0.9]), True, 0.0, params)
    strong = LimitCycle(make_compass(params, 1.0, -0.3).fixed_point, 1.0, np.array([0.4]), True, 0.0, params)
    assert preferred_cycle([unstable, weak, strong]) is strong
    assert preferred_cycle([unstable, weak]) is weak
    assert preferred_cycle([unstable]) is unstable
    with pytest.raises(ValueError):
        preferred_cycle([])
    nudged = LimitCycle(
        SectionState.from_array([-0.2 + 1e-8, 1.0, 0.5], ("theta1", "dtheta1", "dtheta2")),
        1.0, np.array([1.3]), False, 0.0, params,
    )
    assert same_cycle(unstable, nudged)
    assert not same_cycle(unstable, weak)


@pytest.mark.slow
def test_wobbling_cycle_closure_and_contraction():
    params = ModelParams(k=6.0, alpha=0.25, omega=3.0)
    compass = seed_compass_cycle(params)
    cycle = find_fixed_point(wobble_seeds(compass, params)[0], params)
    trajectory = PoincareMap(create_walker(params)).stride(cycle.fixed_point, record=True)
    post = trajectory.post_impact
    z = cycle.fixed_point.as_array()
    assert np.allclose([post.theta1, post.dtheta1, post.dtheta2, post.x, post.dx], z, atol=1e-8)
    assert post.theta2 == pytest.approx(2.0 * post.theta1, abs=1e-8)
    if cycle.stable:
        assert contraction_rate(cycle) < 1.0


def test_initial_state_helper():
    state = PoincareMap(create_walker(ModelParams(), "compass")).embed([-0.1, 1.0, 0.5])
    assert state == HybridState(theta1=-0.1, theta2=-0.2, dtheta1=1.0, dtheta2=0.5)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
