import math
from typing import Dict, List, Tuple

import numpy as np

from walkers.base_walker import BaseWalker
from walkers.walker_types import PointGeometry


class WobblingMassWalker(BaseWalker):
    """Compass-gait walker carrying a spring-supported wobbling mass at hip height.

    Generalized coordinates are q = (theta1, theta2, x): stance-leg angle,
    inter-leg angle and the horizontal wobble displacement relative to the hip.
    The hip carries (1 - alpha), the wobbling mass alpha and each leg tip mu.
    """

    kind = "wobbling"
    n_dof = 3
    coordinate_names = ("theta1", "theta2", "x")
    section_names = ("theta1", "dtheta1", "dtheta2", "x", "dx")

    def masses(self) -> Dict[str, float]:
        p = self.params
        return {
            "hip": 1.0 - p.alpha,
            "wobble": p.alpha,
            "swing_tip": p.mu,
            "stance_tip": p.mu,
        }

    def point_geometry(self, q: np.ndarray) -> Dict[str, PointGeometry]:
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        sp, cp = math.sin(q[0] - q[1]), math.cos(q[0] - q[1])
        x = q[2]
        return {
            "hip": PointGeometry(np.array([s1, c1]), np.array([[c1, 0.0, 0.0], [-s1, 0.0, 0.0]])),
            "wobble": PointGeometry(np.array([s1 + x, c1]), np.array([[c1, 0.0, 1.0], [-s1, 0.0, 0.0]])),
            "swing_tip": PointGeometry(
                np.array([s1 - sp, c1 - cp]),
                np.array([[c1 - cp, cp, 0.0], [-s1 + sp, -sp, 0.0]]),
            ),
            "stance_tip": PointGeometry(np.zeros(2), np.zeros((2, 3))),
        }

    def point_bias_accelerations(self, q: np.ndarray, dq: np.ndarray) -> Dict[str, np.ndarray]:
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        sp, cp = math.sin(q[0] - q[1]), math.cos(q[0] - q[1])
        w1 = dq[0] ** 2
        wp = (dq[0] - dq[1]) ** 2
        hip = np.array([-s1 * w1, -c1 * w1])
        return {
            "hip": hip,
            "wobble": hip.copy(),
            "swing_tip": np.array([-s1 * w1 + sp * wp, -c1 * w1 + cp * wp]),
            "stance_tip": np.zeros(2),
        }

    def inertia(self, q: np.ndarray) -> np.ndarray:
        p = self.params
        c1 = math.cos(q[0])
        lever = 1.0 - math.cos(q[1])
        return np.array([
            [1.0 + 2.0 * p.mu * lever, -p.mu * lever, p.alpha * c1],
            [-p.mu * lever, p.mu, 0.0],
            [p.alpha * c1, 0.0, p.alpha],
        ])

    def bias(self, q: np.ndarray, dq: np.ndarray) -> np.ndarray:
        p = self.params
        s1, s2 = math.sin(q[0]), math.sin(q[1])
        d1, d2 = dq[0], dq[1]
        return np.array([
            p.mu * s2 * (2.0 * d1 * d2 - d2 * d2),
            -p.mu * s2 * d1 * d1,
            -p.alpha * s1 * d1 * d1,
        ])

    def conservative(self, q: np.ndarray) -> np.ndarray:
        p = self.params
        s1 = math.sin(q[0])
        sp = math.sin(q[0] - q[1])
        return np.array([
            -(1.0 + p.mu) * s1 + p.mu * sp,
            -p.mu * sp,
            p.k * q[2],
        ])

    def potential_energy(self, q: np.ndarray) -> float:
        p = self.params
        c1 = math.cos(q[0])
        return (1.0 + p.mu) * c1 - p.mu * math.cos(q[0] - q[1]) + 0.5 * p.k * q[2] ** 2

    def impact_constraints(self, geometry_pre, dq_pre, geometry_post) -> List[Tuple[np.ndarray, float]]:
        # The spring is impulse-free: the wobble keeps its absolute horizontal velocity.
        row = geometry_post["wobble"].jacobian[0]
        value = float(geometry_pre["wobble"].jacobian[0] @ dq_pre)
        return [(row, value)]
