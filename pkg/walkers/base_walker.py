import logging
import math
from typing import Dict, List, Tuple

import numpy as np

from errors import InvalidEventError, NonDissipativeImpactError, SingularInertiaError
from walkers.walker_types import BodyKinematics, DynamicsTerms, HybridState, ModelParams, PointGeometry

logger = logging.getLogger(__name__)

# Guard residual accepted by the impact map; touchdowns are located far tighter.
IMPACT_GUARD_TOL = 1e-8
# Largest upward swing-tip speed still treated as "descending" (resting legs give 0).
IMPACT_DESCENT_TOL = 1e-9
# Kinetic energy may not grow by more than this at touchdown.
IMPACT_ENERGY_TOL = 1e-12


def _moment_row(arm: np.ndarray, jacobian: np.ndarray) -> np.ndarray:
    """Row r such that r @ dq is the planar cross product arm x (jacobian @ dq)."""
    return arm[0] * jacobian[1] - arm[1] * jacobian[0]


class BaseWalker:
    """Base class for planar walkers on level ground with point feet.

    Subclasses provide the mass points, their Jacobians, and the closed-form
    terms of the swing-phase equations of motion. The controller, energies,
    angular momentum and the touchdown map are built here from those pieces.
    """

    kind = "base"
    n_dof = 0
    coordinate_names: Tuple[str, ...] = ()
    section_names: Tuple[str, ...] = ()

    def __init__(self, params: ModelParams):
        """Initialize the walker with the given parameters.

        Args:
            params: Dimensionless model and controller parameters
        """
        self.params = params

    # Hooks for subclasses

    def masses(self) -> Dict[str, float]:
        raise NotImplementedError

    def point_geometry(self, q: np.ndarray) -> Dict[str, PointGeometry]:
        raise NotImplementedError

    def point_bias_accelerations(self, q: np.ndarray, dq: np.ndarray) -> Dict[str, np.ndarray]:
        """Velocity-product part of the point accelerations (dJ/dt @ dq)."""
        raise NotImplementedError

    def inertia(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def bias(self, q: np.ndarray, dq: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def conservative(self, q: np.ndarray) -> np.ndarray:
        raise NotImplementedError

    def potential_energy(self, q: np.ndarray) -> float:
        raise NotImplementedError

    def relabel(self, q: np.ndarray) -> np.ndarray:
        """Exchange stance and swing legs at touchdown."""
        q_post = np.array(q, dtype=float)
        q_post[0] = q[0] - q[1]
        q_post[1] = -q[1]
        return q_post

    def impact_constraints(
        self,
        geometry_pre: Dict[str, PointGeometry],
        dq_pre: np.ndarray,
        geometry_post: Dict[str, PointGeometry],
    ) -> List[Tuple[np.ndarray, float]]:
        """Extra linear conditions (row, value) on the post-impact velocities."""
        return []

    # Generalized coordinates

    def generalized(self, state: HybridState) -> Tuple[np.ndarray, np.ndarray]:
        """Return (q, dq) truncated to this walker's degrees of freedom."""
        return state.q[: self.n_dof], state.dq[: self.n_dof]

    def state_from(self, q, dq, phi: float = 0.0, stance_foot_x: float = 0.0) -> HybridState:
        return HybridState.from_vectors(q, dq, phi=phi, stance_foot_x=stance_foot_x)

    # Controller

    def desired_inter_leg_angle(self, phi: float) -> Tuple[float, float]:
        """Oscillator target theta2_d = gamma(1 + cos phi) - S and its time derivative."""
        p = self.params
        return p.gamma * (1.0 + math.cos(phi)) - p.stride_angle, -p.gamma * p.omega * math.sin(phi)

    def torque(self, theta2: float, dtheta2: float, phi: float) -> float:
        target, target_rate = self.desired_inter_leg_angle(phi)
        return -self.params.kp * (theta2 - target) - self.params.kd * (dtheta2 - target_rate)

    def controller_torque(self, state: HybridState) -> float:
        """Hip torque u of the PD law tracking the oscillator target."""
        return self.torque(state.theta2, state.dtheta2, state.phi)

    # Dynamics

    def input_vector(self, u: float) -> np.ndarray:
        Q = np.zeros(self.n_dof)
        Q[1] = u
        return Q

    def dynamics_terms(self, state: HybridState) -> DynamicsTerms:
        q, dq = self.generalized(state)
        inertia = self.inertia(q)
        self._check_invertible(inertia)
        return DynamicsTerms(
            inertia=inertia,
            bias=self.bias(q, dq),
            conservative=self.conservative(q),
            input=self.input_vector(self.controller_torque(state)),
        )

    def accelerations(self, q: np.ndarray, dq: np.ndarray, u: float) -> np.ndarray:
        """Solve M(q) q'' = Q - h(q, q') - v(q)."""
        rhs = self.input_vector(u) - self.bias(q, dq) - self.conservative(q)
        try:
            return np.linalg.solve(self.inertia(q), rhs)
        except np.linalg.LinAlgError as e:
            raise SingularInertiaError(f"Inertia matrix of {self.kind} walker is singular at q={q}") from e

    def state_accelerations(self, state: HybridState) -> np.ndarray:
        q, dq = self.generalized(state)
        return self.accelerations(q, dq, self.controller_torque(state))

    def _check_invertible(self, inertia: np.ndarray) -> None:
        if not np.all(np.isfinite(inertia)) or np.linalg.cond(inertia) > 1e14:
            raise SingularInertiaError(f"Inertia matrix of {self.kind} walker is not invertible")

    # Kinematics and energies

    def kinematics(self, state: HybridState) -> BodyKinematics:
        """Positions and velocities of all mass points and of the whole-body COM."""
        q, dq = self.generalized(state)
        masses = self.masses()
        geometry = self.point_geometry(q)
        positions = {name: g.position for name, g in geometry.items()}
        velocities = {name: g.jacobian @ dq for name, g in geometry.items()}
        total = sum(masses.values())
        com = sum(masses[n] * positions[n] for n in masses) / total
        com_velocity = sum(masses[n] * velocities[n] for n in masses) / total
        return BodyKinematics(positions, velocities, masses, com, com_velocity)

    def point_accelerations(self, state: HybridState, ddq: np.ndarray) -> Dict[str, np.ndarray]:
        """Accelerations of every mass point from q'' (differentiated kinematics)."""
        q, dq = self.generalized(state)
        geometry = self.point_geometry(q)
        bias = self.point_bias_accelerations(q, dq)
        return {name: g.jacobian @ ddq[: self.n_dof] + bias[name] for name, g in geometry.items()}

    def kinetic_energy(self, q: np.ndarray, dq: np.ndarray) -> float:
        return 0.5 * float(dq @ self.inertia(q) @ dq)

    def total_energy(self, state: HybridState) -> Tuple[float, float]:
        """Return (kinetic, potential), both in units of M*g*L."""
        q, dq = self.generalized(state)
        return self.kinetic_energy(q, dq), self.potential_energy(q)

    def momentum_row(self, geometry: Dict[str, PointGeometry], about: np.ndarray) -> np.ndarray:
        """Row L such that L @ dq is the whole-system angular momentum about a point."""
        masses = self.masses()
        row = np.zeros(self.n_dof)
        for name, mass in masses.items():
            g = geometry[name]
            row += mass * _moment_row(g.position - about, g.jacobian)
        return row

    def angular_momentum(self, state: HybridState, about) -> float:
        q, dq = self.generalized(state)
        return float(self.momentum_row(self.point_geometry(q), np.asarray(about, dtype=float)) @ dq)

    # Touchdown

    def impact_map(self, state: HybridState, event_tol: float = IMPACT_GUARD_TOL) -> HybridState:
        """Apply the touchdown map: relabel legs and jump the velocities.

        Post-impact velocities conserve the angular momentum of the whole
        system about the new contact and of the trailing leg tip about the
        hip; subclasses add their own continuity conditions. Positions are
        returned in the frame of the new stance foot.
        """
        q, dq = self.generalized(state)
        if abs(2.0 * q[0] - q[1]) > event_tol:
            raise InvalidEventError(f"Guard 2*theta1 - theta2 = {2.0 * q[0] - q[1]:.3e} is not at touchdown")

        geometry_pre = self.point_geometry(q)
        contact = geometry_pre["swing_tip"].position.copy()
        contact[1] = 0.0
        tip_velocity = geometry_pre["swing_tip"].jacobian @ dq
        if tip_velocity[1] > IMPACT_DESCENT_TOL:
            raise InvalidEventError(f"Swing tip is rising at touchdown (vy = {tip_velocity[1]:.3e})")

        q_post = self.relabel(q)
        geometry_post = self.point_geometry(q_post)

        rows = [self.momentum_row(geometry_post, np.zeros(2))]
        values = [float(self.momentum_row(geometry_pre, contact) @ dq)]

        # The trailing tip only receives an impulse through the hip joint.
        trailing_pre = geometry_pre["stance_tip"].position - geometry_pre["hip"].position
        trailing_post = geometry_post["swing_tip"].position - geometry_post["hip"].position
        rows.append(_moment_row(trailing_post, geometry_post["swing_tip"].jacobian))
        values.append(float(_moment_row(trailing_pre, geometry_pre["stance_tip"].jacobian) @ dq))

        for row, value in self.impact_constraints(geometry_pre, dq, geometry_post):
            rows.append(row)
            values.append(value)

        try:
            dq_post = np.linalg.solve(np.vstack(rows), np.array(values))
        except np.linalg.LinAlgError as e:
            raise SingularInertiaError(f"Impact equations of {self.kind} walker are singular") from e

        kinetic_before = self.kinetic_energy(q, dq)
        kinetic_after = self.kinetic_energy(q_post, dq_post)
        if kinetic_after > kinetic_before + IMPACT_ENERGY_TOL * max(1.0, kinetic_before):
            raise NonDissipativeImpactError(kinetic_before, kinetic_after)

        phi = 0.0 if self.params.phase_reset else math.fmod(state.phi, 2.0 * math.pi)
        logger.debug(
            f"Touchdown at theta1={q[0]:.6f}: KE {kinetic_before:.6e} -> {kinetic_after:.6e}"
        )
        return self.state_from(q_post, dq_post, phi=phi, stance_foot_x=state.stance_foot_x + contact[0])
