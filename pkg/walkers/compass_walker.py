import math
from typing import Dict

import numpy as np

from walkers.base_walker import BaseWalker
from walkers.walker_types import PointGeometry


class CompassWalker(BaseWalker):
    """Classical two-link compass walker: rigid hip mass 1 and leg tip masses mu.

    Serves as the baseline without a wobbling mass. Uses q = (theta1, theta2)
    with the same controller and touchdown construction as the wobbling model.
    """

    kind = "compass"
    n_dof = 2
    coordinate_names = ("theta1", "theta2")
    section_names = ("theta1", "dtheta1", "dtheta2")

    def masses(self) -> Dict[str, float]:
        return {"hip": 1.0, "swing_tip": self.params.mu, "stance_tip": self.params.mu}

    def point_geometry(self, q: np.ndarray) -> Dict[str, PointGeometry]:
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        sp, cp = math.sin(q[0] - q[1]), math.cos(q[0] - q[1])
        return {
            "hip": PointGeometry(np.array([s1, c1]), np.array([[c1, 0.0], [-s1, 0.0]])),
            "swing_tip": PointGeometry(
                np.array([s1 - sp, c1 - cp]),
                np.array([[c1 - cp, cp], [-s1 + sp, -sp]]),
            ),
            "stance_tip": PointGeometry(np.zeros(2), np.zeros((2, 2))),
        }

    def point_bias_accelerations(self, q: np.ndarray, dq: np.ndarray) -> Dict[str, np.ndarray]:
        s1, c1 = math.sin(q[0]), math.cos(q[0])
        sp, cp = math.sin(q[0] - q[1]), math.cos(q[0] - q[1])
        w1 = dq[0] ** 2
        wp = (dq[0] - dq[1]) ** 2
        return {
            "hip": np.array([-s1 * w1, -c1 * w1]),
            "swing_tip": np.array([-s1 * w1 + sp * wp, -c1 * w1 + cp * wp]),
            "stance_tip": np.zeros(2),
        }

    def inertia(self, q: np.ndarray) -> np.ndarray:
        mu = self.params.mu
        lever = 1.0 - math.cos(q[1])
        return np.array([
            [1.0 + 2.0 * mu * lever, -mu * lever],
            [-mu * lever, mu],
        ])

    def bias(self, q: np.ndarray, dq: np.ndarray) -> np.ndarray:
        mu = self.params.mu
        s2 = math.sin(q[1])
        d1, d2 = dq[0], dq[1]
        return np.array([mu * s2 * (2.0 * d1 * d2 - d2 * d2), -mu * s2 * d1 * d1])

    def conservative(self, q: np.ndarray) -> np.ndarray:
        mu = self.params.mu
        sp = math.sin(q[0] - q[1])
        return np.array([-(1.0 + mu) * math.sin(q[0]) + mu * sp, -mu * sp])

    def potential_energy(self, q: np.ndarray) -> float:
        mu = self.params.mu
        return (1.0 + mu) * math.cos(q[0]) - mu * math.cos(q[0] - q[1])
