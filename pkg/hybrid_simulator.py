import csv
import logging
import math
import os
from dataclasses import dataclass, field
from enum import Enum
from typing import List, NamedTuple, Optional

import numpy as np
from scipy.integrate import DOP853
from scipy.optimize import brentq

from errors import IntegrationFailedError
from walkers.base_walker import IMPACT_GUARD_TOL, BaseWalker
from walkers.walker_types import HybridState, SimConfig

logger = logging.getLogger(__name__)

# Column order of exported trajectories.
TRAJECTORY_COLUMNS = [
    "t", "theta1", "theta2", "x", "dtheta1", "dtheta2", "dx", "phi",
    "u", "ddtheta1", "ddtheta2", "ddx", "work", "abs_work", "stance_foot_x",
]


class Termination(str, Enum):
    COMPLETED_STRIDE = "completed_stride"
    FELL = "fell"
    TIMED_OUT = "timed_out"
    # Fixed-duration swing without touchdown detection.
    DURATION_REACHED = "duration_reached"


class TrajectorySample(NamedTuple):
    t: float
    state: HybridState
    u: float
    ddq: np.ndarray


@dataclass
class Trajectory:
    """Sampled swing phase of one stride.

    Generalized coordinates are always stored with three columns; the compass
    walker keeps the x columns at zero. work and abs_work are the running
    integrals of u*dtheta2 and |u*dtheta2| from the start of the stride. The
    last sample is the pre-impact state when the stride completed.
    """

    kind: str
    times: np.ndarray
    q: np.ndarray
    dq: np.ndarray
    phi: np.ndarray
    u: np.ndarray
    ddq: np.ndarray
    work: np.ndarray
    abs_work: np.ndarray
    stance_foot_x: float
    termination: Termination
    events: List[float] = field(default_factory=list)
    post_impact: Optional[HybridState] = None

    @property
    def completed(self) -> bool:
        return self.termination == Termination.COMPLETED_STRIDE

    @property
    def duration(self) -> float:
        return float(self.times[-1] - self.times[0])

    def __len__(self) -> int:
        return len(self.times)

    def state(self, index: int) -> HybridState:
        return HybridState.from_vectors(
            self.q[index], self.dq[index], phi=self.phi[index], stance_foot_x=self.stance_foot_x
        )

    @property
    def initial_state(self) -> HybridState:
        return self.state(0)

    @property
    def final_state(self) -> HybridState:
        return self.state(len(self.times) - 1)

    @property
    def samples(self) -> List[TrajectorySample]:
        return [
            TrajectorySample(float(self.times[i]), self.state(i), float(self.u[i]), self.ddq[i])
            for i in range(len(self.times))
        ]


class HybridSimulator:
    """Integrates the swing phase, locates touchdown and applies the impact map.

    The integrated vector is [q, dq, phi, work, abs_work]; the oscillator phase
    advances at omega and the two work integrals accumulate the actuator power.
    """

    def __init__(self, walker: BaseWalker, config: Optional[SimConfig] = None):
        """Initialize the simulator.

        Args:
            walker: Walker model providing dynamics and the impact map
            config: Integrator, event and recording settings
        """
        self.walker = walker
        self.config = config or SimConfig()
        self.n = walker.n_dof

    # Vector field

    def _rhs(self, t: float, y: np.ndarray) -> np.ndarray:
        n = self.n
        q, dq, phi = y[:n], y[n:2 * n], y[2 * n]
        u = self.walker.torque(q[1], dq[1], phi)
        ddq = self.walker.accelerations(q, dq, u)
        power = u * dq[1]
        return np.concatenate((dq, ddq, (self.walker.params.omega, power, abs(power))))

    def _pack(self, state: HybridState) -> np.ndarray:
        q, dq = self.walker.generalized(state)
        return np.concatenate((q, dq, (state.phi, 0.0, 0.0)))

    def _unpack(self, y: np.ndarray, stance_foot_x: float) -> HybridState:
        n = self.n
        return self.walker.state_from(y[:n], y[n:2 * n], phi=y[2 * n], stance_foot_x=stance_foot_x)

    def _guard(self, y: np.ndarray) -> float:
        return 2.0 * y[0] - y[1]

    def _guard_rate(self, y: np.ndarray) -> float:
        return 2.0 * y[self.n] - y[self.n + 1]

    def _has_fallen(self, y: np.ndarray) -> bool:
        return math.cos(y[0]) <= 0.0 or abs(y[0]) > 0.5 * math.pi

    # Integration

    def _make_solver(self, y0: np.ndarray, t0: float, t_bound: float) -> DOP853:
        cfg = self.config
        return DOP853(
            self._rhs, t0, y0, t_bound,
            rtol=cfg.rel_tol, atol=cfg.abs_tol, max_step=cfg.max_step,
        )

    def _step(self, solver: DOP853) -> None:
        message = solver.step()
        if solver.status == "failed" or not np.all(np.isfinite(solver.y)):
            raise IntegrationFailedError(f"Integration failed at t={solver.t:.6f}: {message}")

    def _locate_touchdown(self, dense, t_old: float, t_new: float) -> float:
        """Root of the guard inside one step, refined to the event tolerance."""
        t_event = brentq(lambda t: self._guard(dense(t)), t_old, t_new, xtol=1e-15, rtol=4.0 * np.finfo(float).eps)
        for _ in range(5):
            y = dense(t_event)
            residual = self._guard(y)
            if abs(residual) <= self.config.event_tol:
                break
            rate = self._guard_rate(y)
            if rate == 0.0:
                break
            t_event = min(max(t_event - residual / rate, t_old), t_new)
        return t_event

    def simulate_stride(self, initial: HybridState) -> Trajectory:
        """Integrate one swing phase from a post-touchdown state.

        A stride completes when the guard 2*theta1 - theta2 rises through
        zero with theta1 > 0, which is exactly the case of a descending swing
        tip ahead of the stance foot. Upward crossings with theta1 <= 0 are
        lift-off scuffs and are skipped. Downward crossings are the swing tip
        passing below ground level mid-swing and are ignored as well. A
        touchdown whose step (swing tip minus stance foot) is not positive is
        a backward stride and counts as a fall.

        Args:
            initial: State at the start of the swing phase

        Returns:
            Trajectory with its termination; post_impact is set for completed strides
        """
        cfg = self.config
        t0 = 0.0
        y0 = self._pack(initial)
        recorder = _SampleRecorder(t0, cfg.sample_dt, cfg.record)
        recorder.add(t0, y0)

        if self._has_fallen(y0):
            logger.debug(f"Stride starts in a fallen posture (theta1={initial.theta1:.4f})")
            return self._finish(recorder, initial, Termination.FELL)

        solver = self._make_solver(y0, t0, t0 + cfg.max_stride_time)
        armed = abs(self._guard(y0)) > cfg.event_tol
        termination = Termination.TIMED_OUT
        events: List[float] = []

        while solver.status == "running":
            self._step(solver)
            t_old, t_new = solver.t_old, solver.t
            dense = solver.dense_output()
            g_old = self._guard(dense(t_old))
            g_new = self._guard(dense(t_new))

            if armed and g_old < 0.0 <= g_new:
                t_event = self._locate_touchdown(dense, t_old, t_new)
                y_event = dense(t_event)
                if y_event[0] > 0.0:
                    recorder.add_step(dense, t_old, t_event, include_end=True)
                    if step_length(y_event) > 0.0:
                        events.append(t_event)
                        termination = Termination.COMPLETED_STRIDE
                    else:
                        logger.debug(f"Backward stride at t={t_event:.6f}")
                        termination = Termination.FELL
                    break
                logger.debug(f"Ignoring lift-off scuff at t={t_event:.6f}")

            recorder.add_step(dense, t_old, t_new, include_end=solver.status != "running")
            if not armed and abs(g_new) > cfg.event_tol:
                armed = True
            if self._has_fallen(solver.y):
                recorder.add(t_new, solver.y)
                termination = Termination.FELL
                break

        trajectory = self._finish(recorder, initial, termination, events)
        if termination == Termination.COMPLETED_STRIDE:
            guard_tol = max(cfg.event_tol, IMPACT_GUARD_TOL)
            trajectory.post_impact = self.walker.impact_map(trajectory.final_state, event_tol=guard_tol)
        logger.debug(f"Stride ended ({termination.value}) after {trajectory.duration:.6f}")
        return trajectory

    def simulate_n_strides(self, initial: HybridState, n: int) -> List[Trajectory]:
        """Chain up to n strides, stopping at the first one that does not complete."""
        trajectories = []
        state = initial
        for _ in range(n):
            trajectory = self.simulate_stride(state)
            trajectories.append(trajectory)
            if not trajectory.completed:
                break
            state = trajectory.post_impact
        return trajectories

    def integrate_swing(self, initial: HybridState, duration: float) -> Trajectory:
        """Integrate the swing dynamics for a fixed duration, ignoring touchdown.

        A negative duration integrates backward in time.
        """
        cfg = self.config
        y0 = self._pack(initial)
        direction = 1.0 if duration >= 0 else -1.0
        recorder = _SampleRecorder(0.0, direction * cfg.sample_dt, cfg.record)
        recorder.add(0.0, y0)
        if duration != 0.0:
            solver = self._make_solver(y0, 0.0, duration)
            while solver.status == "running":
                self._step(solver)
                recorder.add_step(
                    solver.dense_output(), solver.t_old, solver.t, include_end=solver.status != "running"
                )
        return self._finish(recorder, initial, Termination.DURATION_REACHED)

    def _finish(
        self,
        recorder: "_SampleRecorder",
        initial: HybridState,
        termination: Termination,
        events: Optional[List[float]] = None,
    ) -> Trajectory:
        n = self.n
        times = np.array(recorder.times)
        ys = np.array(recorder.values)
        count = len(times)
        q = np.zeros((count, 3))
        dq = np.zeros((count, 3))
        ddq = np.zeros((count, 3))
        u = np.zeros(count)
        q[:, :n] = ys[:, :n]
        dq[:, :n] = ys[:, n:2 * n]
        for i in range(count):
            u[i] = self.walker.torque(ys[i, 1], ys[i, n + 1], ys[i, 2 * n])
            ddq[i, :n] = self.walker.accelerations(ys[i, :n], ys[i, n:2 * n], u[i])
        return Trajectory(
            kind=self.walker.kind,
            times=times,
            q=q,
            dq=dq,
            phi=ys[:, 2 * n],
            u=u,
            ddq=ddq,
            work=ys[:, 2 * n + 1],
            abs_work=ys[:, 2 * n + 2],
            stance_foot_x=initial.stance_foot_x,
            termination=termination,
            events=list(events or []),
        )


def step_length(y: np.ndarray) -> float:
    """Horizontal swing-tip position relative to the stance foot."""
    return math.sin(y[0]) - math.sin(y[0] - y[1])


class _SampleRecorder:
    """Collects samples on the grid t0 + j*dt from the stepper's dense output."""

    def __init__(self, t0: float, dt: float, enabled: bool):
        self.t0 = t0
        self.dt = dt
        self.enabled = enabled
        self.next_index = 1
        self.times: List[float] = []
        self.values: List[np.ndarray] = []

    def add(self, t: float, y: np.ndarray) -> None:
        if self.times and t == self.times[-1]:
            return
        self.times.append(float(t))
        self.values.append(np.array(y, dtype=float))

    def add_step(self, dense, t_old: float, t_end: float, include_end: bool) -> None:
        direction = 1.0 if self.dt > 0 else -1.0
        if self.enabled:
            while True:
                t = self.t0 + self.next_index * self.dt
                if direction * (t - t_end) >= 0.0:
                    break
                self.add(t, dense(t))
                self.next_index += 1
        if include_end:
            self.add(t_end, dense(t_end))


def export_trajectory(trajectory: Trajectory, path: str) -> str:
    """Write a trajectory as CSV, one sample per row in TRAJECTORY_COLUMNS order."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="") as f:
        writer = csv.writer(f)
        writer.writerow(TRAJECTORY_COLUMNS)
        for i in range(len(trajectory)):
            row = [trajectory.times[i], *trajectory.q[i], *trajectory.dq[i], trajectory.phi[i],
                   trajectory.u[i], *trajectory.ddq[i], trajectory.work[i], trajectory.abs_work[i],
                   trajectory.stance_foot_x]
            writer.writerow([repr(float(v)) for v in row])
    return path
