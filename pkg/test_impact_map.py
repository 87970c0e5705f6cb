"""
Touchdown map checks: relabeling, momentum balance, dissipation and a
comparison with the impulse solution in floating-base coordinates.
"""

import math

import numpy as np
import pytest

from errors import InvalidEventError
from walkers.compass_walker import CompassWalker
from walkers.walker_types import HybridState, ModelParams
from walkers.wobbling_walker import WobblingMassWalker


def touchdown_state(rng, walker_kind="wobbling"):
    """Random pre-impact state with the swing tip on the ground and descending."""
    theta1 = rng.uniform(0.1, 0.35)
    dtheta1 = rng.uniform(0.2, 1.5)
    dtheta2 = rng.uniform(-1.0, 2.0 * dtheta1)
    if walker_kind == "compass":
        return HybridState(theta1=theta1, theta2=2.0 * theta1, dtheta1=dtheta1, dtheta2=dtheta2)
    return HybridState(
        theta1=theta1,
        theta2=2.0 * theta1,
        x=rng.uniform(-0.1, 0.1),
        dtheta1=dtheta1,
        dtheta2=dtheta2,
        dx=rng.uniform(-0.5, 0.5),
        phi=rng.uniform(0.0, 6.0),
    )


def floating_base_impact(state, params, with_wobble=True):
    """Post-impact rates from the impulse equations of the unpinned walker.

    Coordinates: hip (xh, yh), absolute leg angles beta1 (old stance) and
    beta2 (old swing), and the wobble offset x. The new contact point is
    pinned by an impulse; no other external impulse acts. The wobble hangs
    on the hip point, so the state must have x = 0: an offset wobble would
    need the couple its slide exerts on the hip, which this model lacks.
    """
    beta1 = state.theta1
    beta2 = state.theta1 - state.theta2
    n = 5 if with_wobble else 4

    def point(cols):
        J = np.zeros((2, n))
        for (row, col), value in cols.items():
            J[row, col] = value
        return J

    hip = point({(0, 0): 1.0, (1, 1): 1.0})
    stance_tip = point({(0, 0): 1.0, (1, 1): 1.0, (0, 2): -math.cos(beta1), (1, 2): math.sin(beta1)})
    swing_tip = point({(0, 0): 1.0, (1, 1): 1.0, (0, 3): -math.cos(beta2), (1, 3): math.sin(beta2)})
    parts = [(params.mu, stance_tip), (params.mu, swing_tip)]
    if with_wobble:
        wobble = point({(0, 0): 1.0, (1, 1): 1.0, (0, 4): 1.0})
        parts += [(1.0 - params.alpha, hip), (params.alpha, wobble)]
    else:
        parts.append((1.0, hip))
    M = sum(m * J.T @ J for m, J in parts)

    c1, s1 = math.cos(state.theta1), math.sin(state.theta1)
    rates = [c1 * state.dtheta1, -s1 * state.dtheta1, state.dtheta1, state.dtheta1 - state.dtheta2]
    if with_wobble:
        rates.append(state.dx)
    rates = np.array(rates)

    system = np.zeros((n + 2, n + 2))
    system[:n, :n] = M
    system[:n, n:] = -swing_tip.T
    system[n:, :n] = swing_tip
    rhs = np.concatenate((M @ rates, np.zeros(2)))
    post = np.linalg.solve(system, rhs)[:n]

    dtheta1 = post[3]
    dtheta2 = post[3] - post[2]
    if with_wobble:
        return np.array([dtheta1, dtheta2, post[4]])
    return np.array([dtheta1, dtheta2])


def angular_momentum_about(kinematics, point):
    total = 0.0
    for name, mass in kinematics.masses.items():
        r = kinematics.positions[name] - point
        v = kinematics.velocities[name]
        total += mass * (r[0] * v[1] - r[1] * v[0])
    return total


def test_zero_velocity_touchdown():
    """At rest the map only relabels the legs and moves the stance foot"""
    walker = WobblingMassWalker(ModelParams())
    post = walker.impact_map(HybridState(theta1=0.2, theta2=0.4, x=0.05, phi=2.0, stance_foot_x=1.0))
    assert post.theta1 == pytest.approx(-0.2)
    assert post.theta2 == pytest.approx(-0.4)
    assert post.theta2 == pytest.approx(2.0 * post.theta1)
    assert post.x == pytest.approx(0.05)
    assert np.allclose(post.dq, 0.0, atol=1e-14)
    assert post.phi == 0.0
    assert post.stance_foot_x == pytest.approx(1.0 + 2.0 * math.sin(0.2))


def test_angular_momentum_about_new_contact_is_conserved():
    rng = np.random.default_rng(1)
    for _ in range(200):
        params = ModelParams(k=rng.uniform(0.5, 30.0), alpha=rng.uniform(0.05, 0.9), mu=rng.uniform(0.05, 0.3))
        walker = WobblingMassWalker(params)
        pre = touchdown_state(rng)
        post = walker.impact_map(pre)
        pre_kin = walker.kinematics(pre)
        contact = pre_kin.positions["swing_tip"].copy()
        before = angular_momentum_about(pre_kin, contact)
        after = angular_momentum_about(walker.kinematics(post), np.zeros(2))
        assert abs(after - before) <= 1e-10


def test_wobble_keeps_horizontal_velocity():
    rng = np.random.default_rng(2)
    walker = WobblingMassWalker(ModelParams(alpha=0.3))
    for _ in range(50):
        pre = touchdown_state(rng)
        post = walker.impact_map(pre)
        v_pre = walker.kinematics(pre).velocities["wobble"][0]
        v_post = walker.kinematics(post).velocities["wobble"][0]
        assert v_post == pytest.approx(v_pre, abs=1e-12)


def test_impact_dissipates_kinetic_energy():
    rng = np.random.default_rng(4)
    for _ in range(500):
        params = ModelParams(k=rng.uniform(0.5, 30.0), alpha=rng.uniform(0.05, 0.9), mu=rng.uniform(0.05, 0.3))
        walker = WobblingMassWalker(params)
        pre = touchdown_state(rng)
        post = walker.impact_map(pre)
        assert walker.total_energy(post)[0] <= walker.total_energy(pre)[0] + 1e-12


def test_matches_floating_base_impulse_solution():
    rng = np.random.default_rng(6)
    for _ in range(100):
        params = ModelParams(alpha=rng.uniform(0.05, 0.9), mu=rng.uniform(0.05, 0.3))
        pre = touchdown_state(rng).replace(x=0.0)
        post = WobblingMassWalker(params).impact_map(pre)
        assert np.allclose(post.dq, floating_base_impact(pre, params), atol=1e-10)


def test_offset_wobble_conserves_contact_momentum():
    """Wobble off the hip point: checked against the momentum laws instead"""
    rng = np.random.default_rng(7)
    for _ in range(100):
        params = ModelParams(alpha=rng.uniform(0.05, 0.9), mu=rng.uniform(0.05, 0.3))
        walker = WobblingMassWalker(params)
        pre = touchdown_state(rng).replace(x=rng.choice([-1.0, 1.0]) * rng.uniform(0.02, 0.1))
        post = walker.impact_map(pre)
        pre_kin = walker.kinematics(pre)
        post_kin = walker.kinematics(post)
        contact = pre_kin.positions["swing_tip"].copy()
        assert abs(angular_momentum_about(post_kin, np.zeros(2)) - angular_momentum_about(pre_kin, contact)) <= 1e-10
        assert post_kin.velocities["wobble"][0] == pytest.approx(pre_kin.velocities["wobble"][0], abs=1e-12)
        assert walker.total_energy(post)[0] <= walker.total_energy(pre)[0] + 1e-12


def test_compass_matches_floating_base_impulse_solution():
    rng = np.random.default_rng(8)
    params = ModelParams(mu=0.1)
    walker = CompassWalker(params)
    for _ in range(50):
        pre = touchdown_state(rng, "compass")
        post = walker.impact_map(pre)
        expected = floating_base_impact(pre, params, with_wobble=False)
        assert np.allclose(post.dq[:2], expected, atol=1e-10)


def test_small_wobble_fraction_reduces_to_compass_impact():
    rng = np.random.default_rng(9)
    base = ModelParams(mu=0.1)
    wobbling = WobblingMassWalker(base.replace(alpha=1e-8))
    compass = CompassWalker(base)
    for _ in range(50):
        pre = touchdown_state(rng, "compass")
        full = wobbling.impact_map(pre)
        reduced = compass.impact_map(pre)
        assert np.allclose(full.dq[:2], reduced.dq[:2], atol=1e-6)


def test_rejects_state_off_the_guard():
    walker = WobblingMassWalker(ModelParams())
    with pytest.raises(InvalidEventError):
        walker.impact_map(HybridState(theta1=0.2, theta2=0.3, dtheta1=1.0))


def test_rejects_rising_swing_tip():
    walker = WobblingMassWalker(ModelParams())
    with pytest.raises(InvalidEventError):
        walker.impact_map(HybridState(theta1=0.2, theta2=0.4, dtheta1=0.5, dtheta2=2.0))


def test_phase_kept_without_reset():
    walker = WobblingMassWalker(ModelParams(phase_reset=False))
    post = walker.impact_map(HybridState(theta1=0.2, theta2=0.4, dtheta1=1.0, phi=7.0))
    assert post.phi == pytest.approx(7.0 - 2.0 * math.pi)


if __name__ == "__main__":
    pytest.main([__file__, "-v"])
