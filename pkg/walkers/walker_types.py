"""Value types shared by the walker models, the simulator and the solvers.

All quantities are dimensionless: lengths are scaled by the leg length L, time
by tau = sqrt(L/g), masses by the upper-body mass M and torques by M*g*L.
"""

import math
from dataclasses import dataclass, field, replace
from typing import Dict, NamedTuple, Optional, Sequence

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import (
    SIM_ABS_TOL,
    SIM_EVENT_TOL,
    SIM_MAX_STEP,
    SIM_MAX_STRIDE_TIME,
    SIM_REL_TOL,
    SIM_SAMPLE_DT,
    WALKER_GAMMA,
    WALKER_KD,
    WALKER_KP,
    WALKER_MU,
    WALKER_PHASE_RESET,
    WALKER_STRIDE_ANGLE,
)


class ModelParams(BaseModel):
    """Physical and controller parameters of the walker.

    k is the spring constant K*L/(M*g), alpha the wobbling fraction of M,
    mu the leg tip mass ratio m2/M, gamma and stride_angle shape the desired
    inter-leg angle, omega is the oscillator phase velocity and kp, kd the PD
    gains of the hip actuator.
    """

    model_config = ConfigDict(frozen=True)

    k: float = Field(6.0, gt=0)
    alpha: float = Field(0.25, gt=0, lt=1)
    mu: float = Field(WALKER_MU, ge=0)
    gamma: float = WALKER_GAMMA
    stride_angle: float = WALKER_STRIDE_ANGLE
    omega: float = Field(3.0, gt=0)
    kp: float = Field(WALKER_KP, gt=0)
    kd: float = Field(WALKER_KD, ge=0)
    phase_reset: bool = WALKER_PHASE_RESET

    @property
    def total_mass(self) -> float:
        """Whole-body mass M + 2*m2 in units of M."""
        return 1.0 + 2.0 * self.mu

    def replace(self, **changes) -> "ModelParams":
        """Return a validated copy with some fields changed."""
        return ModelParams(**{**self.model_dump(), **changes})

    def passive(self) -> "ModelParams":
        """Unactuated copy (Kp = Kd = 0) for conservation checks.

        Bypasses validation on purpose: kp > 0 holds for every walking model.
        """
        return self.model_copy(update={"kp": 0.0, "kd": 0.0})


class SimConfig(BaseModel):
    """Integrator and recording settings for one stride."""

    model_config = ConfigDict(frozen=True)

    rel_tol: float = Field(SIM_REL_TOL, gt=0)
    abs_tol: float = Field(SIM_ABS_TOL, gt=0)
    event_tol: float = Field(SIM_EVENT_TOL, gt=0)
    max_stride_time: float = Field(SIM_MAX_STRIDE_TIME, gt=0)
    sample_dt: float = Field(SIM_SAMPLE_DT, gt=0)
    max_step: float = Field(SIM_MAX_STEP, gt=0)
    record: bool = True

    def replace(self, **changes) -> "SimConfig":
        return SimConfig(**{**self.model_dump(), **changes})


@dataclass(frozen=True)
class HybridState:
    """Continuous state (q, q') plus oscillator phase and contact bookkeeping.

    theta2 is the inter-leg angle; the swing leg's absolute angle is
    theta1 - theta2. The compass model keeps x = dx = 0.
    """

    theta1: float
    theta2: float
    x: float = 0.0
    dtheta1: float = 0.0
    dtheta2: float = 0.0
    dx: float = 0.0
    phi: float = 0.0
    stance_foot_x: float = 0.0

    @property
    def q(self) -> np.ndarray:
        return np.array([self.theta1, self.theta2, self.x])

    @property
    def dq(self) -> np.ndarray:
        return np.array([self.dtheta1, self.dtheta2, self.dx])

    @property
    def guard(self) -> float:
        """Touchdown guard 2*theta1 - theta2."""
        return 2.0 * self.theta1 - self.theta2

    def is_valid(self) -> bool:
        return math.cos(self.theta1) > 0.0

    def replace(self, **changes) -> "HybridState":
        return replace(self, **changes)

    @classmethod
    def from_vectors(
        cls,
        q: Sequence[float],
        dq: Sequence[float],
        phi: float = 0.0,
        stance_foot_x: float = 0.0,
    ) -> "HybridState":
        """Build a state from generalized vectors of length 2 (compass) or 3."""
        x = float(q[2]) if len(q) > 2 else 0.0
        dx = float(dq[2]) if len(dq) > 2 else 0.0
        return cls(
            theta1=float(q[0]),
            theta2=float(q[1]),
            x=x,
            dtheta1=float(dq[0]),
            dtheta2=float(dq[1]),
            dx=dx,
            phi=float(phi),
            stance_foot_x=float(stance_foot_x),
        )


@dataclass(frozen=True)
class DynamicsTerms:
    """Terms of M(q) q'' + h(q, q') + v(q) = Q."""

    inertia: np.ndarray
    bias: np.ndarray
    conservative: np.ndarray
    input: np.ndarray


class PointGeometry(NamedTuple):
    """Position of a mass point and its Jacobian d(position)/dq."""

    position: np.ndarray
    jacobian: np.ndarray


@dataclass(frozen=True)
class BodyKinematics:
    """Positions and velocities of every mass point, relative to the stance foot."""

    positions: Dict[str, np.ndarray]
    velocities: Dict[str, np.ndarray]
    masses: Dict[str, float]
    com: np.ndarray = field(default_factory=lambda: np.zeros(2))
    com_velocity: np.ndarray = field(default_factory=lambda: np.zeros(2))

    def point(self, name: str) -> Optional[np.ndarray]:
        return self.positions.get(name)
