"""Fall-risk, efficiency and shape metrics of one walking stride.

All functions take a recorded Trajectory (see hybrid_simulator) whose last
sample is the pre-impact state. ZMP positions are measured from the stance
foot and are positive forward.
"""

import logging
from dataclasses import asdict, dataclass
from typing import Dict, Optional, Tuple

import numpy as np
from scipy.signal import find_peaks

from errors import AmbiguousClassificationError, FreeFallSingularityError, ZeroSpeedStrideError
from hybrid_simulator import Trajectory
from walkers import create_walker
from walkers.walker_types import ModelParams

logger = logging.getLogger(__name__)

# Smallest admissible apparent gravity 1 + y_g'' (in units of g).
FREE_FALL_LIMIT = 0.1
X_RATE_BAND = 1e-6
PEAK_PROMINENCE = 1e-4
EARLY_STANCE_FRACTION = 0.25
# theta1-rate peaks expected for the single- and double-wobble groups.
EXPECTED_PEAKS = {"A": 1, "B": 2, "C": 3}


@dataclass
class ZmpProfile:
    times: np.ndarray
    d: np.ndarray
    d_multibody: np.ndarray

    @property
    def d_max(self) -> float:
        return float(np.max(np.abs(self.d)))

    @property
    def d_min_signed(self) -> float:
        return float(np.min(self.d))

    @property
    def d_max_signed(self) -> float:
        return float(np.max(self.d))

    @property
    def d_max_multibody(self) -> float:
        return float(np.max(np.abs(self.d_multibody)))


@dataclass
class Classification:
    group: str
    x_oscillations: int
    dtheta1_peaks: int
    wobble_group: str


@dataclass
class TransportCost:
    cot: float
    mean_speed: float
    work: float
    distance: float
    cot_per_distance: float


@dataclass
class GaitMetrics:
    d_max: float
    d_profile: np.ndarray
    d_min_signed: float
    d_max_signed: float
    d_max_multibody: float
    cot: float
    cot_per_distance: float
    mean_speed: float
    work: float
    positive_work: float
    group: str
    wobble_group: str
    x_oscillations: int
    dtheta1_peaks: int
    peak_wobble: float
    period: float

    def to_record(self) -> Dict:
        record = asdict(self)
        record.pop("d_profile")
        return record


def point_accelerations(trajectory: Trajectory, params: ModelParams):
    """Per-sample positions and accelerations of all mass points, from the recorded q''."""
    walker = create_walker(params, trajectory.kind)
    masses = walker.masses()
    positions = {name: np.zeros((len(trajectory), 2)) for name in masses}
    accelerations = {name: np.zeros((len(trajectory), 2)) for name in masses}
    for i in range(len(trajectory)):
        state = trajectory.state(i)
        geometry = walker.point_geometry(walker.generalized(state)[0])
        point_acc = walker.point_accelerations(state, trajectory.ddq[i])
        for name in masses:
            positions[name][i] = geometry[name].position
            accelerations[name][i] = point_acc[name]
    return masses, positions, accelerations


def com_motion(trajectory: Trajectory, params: ModelParams) -> Tuple[np.ndarray, np.ndarray]:
    """Whole-body COM positions and accelerations (wobbling mass included)."""
    masses, positions, accelerations = point_accelerations(trajectory, params)
    total = sum(masses.values())
    com = sum(m * positions[name] for name, m in masses.items()) / total
    com_acc = sum(m * accelerations[name] for name, m in masses.items()) / total
    return com, com_acc


def apparent_zmp(x_g, y_g, ax_g, ay_g):
    """ZMP of a lumped body: p = x_g - x_g'' * y_g / (1 + y_g''), with g = 1."""
    return x_g - ax_g * y_g / (1.0 + ay_g)


def zmp_distance(trajectory: Trajectory, params: ModelParams) -> ZmpProfile:
    """ZMP distance from the stance toe over the stride.

    d uses the COM form p = x_g - x_g'' * y_g / (1 + y_g''); d_multibody is
    the point where the summed moment of the per-mass apparent gravity
    m_i * (g + a_i) vanishes.

    Raises:
        FreeFallSingularityError: if 1 + y_g'' drops below FREE_FALL_LIMIT
    """
    masses, positions, accelerations = point_accelerations(trajectory, params)
    total = sum(masses.values())
    com = sum(m * positions[name] for name, m in masses.items()) / total
    com_acc = sum(m * accelerations[name] for name, m in masses.items()) / total

    apparent = 1.0 + com_acc[:, 1]
    if np.any(apparent < FREE_FALL_LIMIT):
        index = int(np.argmin(apparent))
        raise FreeFallSingularityError(
            f"Apparent gravity {apparent[index]:.3e} at t={trajectory.times[index]:.4f} is below {FREE_FALL_LIMIT}"
        )

    d = apparent_zmp(com[:, 0], com[:, 1], com_acc[:, 0], com_acc[:, 1])
    numerator = sum(
        m * (positions[n][:, 0] * (1.0 + accelerations[n][:, 1]) - positions[n][:, 1] * accelerations[n][:, 0])
        for n, m in masses.items()
    )
    d_multibody = numerator / (total * apparent)
    return ZmpProfile(trajectory.times.copy(), d, d_multibody)


def multibody_zmp(trajectory: Trajectory, params: ModelParams) -> np.ndarray:
    return zmp_distance(trajectory, params).d_multibody


def cost_of_transport(trajectory: Trajectory, params: ModelParams, positive_only: bool = False) -> TransportCost:
    """Hip work per unit weight and mean speed over one stride.

    W is the absolute work of the hip actuator, or only its positive part
    when positive_only is set. The mean speed is the COM advance divided by
    the stride time.

    Raises:
        ZeroSpeedStrideError: if the COM does not advance
    """
    com, _ = com_motion(trajectory, params)
    duration = trajectory.duration
    distance = float(com[-1, 0] - com[0, 0])
    if duration <= 0.0 or distance <= 0.0:
        raise ZeroSpeedStrideError(f"Stride advances the COM by {distance:.3e} in {duration:.3e}")
    mean_speed = distance / duration

    abs_work = float(trajectory.abs_work[-1] - trajectory.abs_work[0])
    net_work = float(trajectory.work[-1] - trajectory.work[0])
    work = 0.5 * (abs_work + net_work) if positive_only else abs_work
    weight = params.total_mass
    return TransportCost(
        cot=work / (weight * mean_speed),
        mean_speed=mean_speed,
        work=work,
        distance=distance,
        cot_per_distance=work / (weight * distance),
    )


def count_sign_changes(signal: np.ndarray, band: float = X_RATE_BAND, cyclic: bool = True) -> int:
    """Sign changes of a signal, ignoring values inside +/- band (hysteresis)."""
    signs = [1 if v > band else -1 for v in signal if abs(v) > band]
    if len(signs) < 2:
        return 0
    changes = sum(1 for a, b in zip(signs, signs[1:]) if a != b)
    if cyclic and signs[-1] != signs[0]:
        changes += 1
    return changes


def count_oscillations(rate: np.ndarray, band: float = X_RATE_BAND) -> int:
    return int(round(count_sign_changes(rate, band) / 2.0))


def count_peaks(signal: np.ndarray, prominence: float = PEAK_PROMINENCE) -> int:
    """Local maxima of a periodic signal over one period (signal tiled three times)."""
    n = len(signal)
    if n < 3:
        return 0
    peaks, _ = find_peaks(np.tile(signal, 3), prominence=prominence)
    return int(np.count_nonzero((peaks >= n) & (peaks < 2 * n)))


def classify_group(trajectory: Trajectory, strict: bool = False) -> Classification:
    """Assign a solution group from the wobble oscillations and the theta1-rate peaks.

    One oscillation is group A when the wobble moves backward in early stance
    and B when it moves forward; 2, 3 and 4 oscillations are C, D and E. When
    the peak count of an A, B or C solution disagrees with its group the
    result is "ambiguous" (or AmbiguousClassificationError when strict).
    """
    x_oscillations = count_oscillations(trajectory.dq[:, 2])
    dtheta1_peaks = count_peaks(trajectory.dq[:, 0])

    if x_oscillations == 1:
        elapsed = trajectory.times - trajectory.times[0]
        early = elapsed <= EARLY_STANCE_FRACTION * trajectory.duration
        wobble_group = "A" if float(np.mean(trajectory.dq[early, 2])) < 0.0 else "B"
    elif 2 <= x_oscillations <= 4:
        wobble_group = "CDE"[x_oscillations - 2]
    else:
        wobble_group = f"other({x_oscillations})"

    group = wobble_group
    expected = EXPECTED_PEAKS.get(wobble_group)
    if expected is not None and dtheta1_peaks != expected:
        message = (f"Group {wobble_group} from {x_oscillations} wobble oscillations, "
                   f"but theta1 rate has {dtheta1_peaks} peaks")
        if strict:
            raise AmbiguousClassificationError(message)
        logger.debug(message)
        group = "ambiguous"
    return Classification(group, x_oscillations, dtheta1_peaks, wobble_group)


def evaluate_gait(trajectory: Trajectory, params: ModelParams, positive_only: Optional[bool] = False) -> GaitMetrics:
    """Bundle ZMP, CoT and classification metrics of a recorded periodic stride."""
    zmp = zmp_distance(trajectory, params)
    transport = cost_of_transport(trajectory, params, positive_only=bool(positive_only))
    classification = classify_group(trajectory)
    abs_work = float(trajectory.abs_work[-1] - trajectory.abs_work[0])
    net_work = float(trajectory.work[-1] - trajectory.work[0])
    return GaitMetrics(
        d_max=zmp.d_max,
        d_profile=zmp.d,
        d_min_signed=zmp.d_min_signed,
        d_max_signed=zmp.d_max_signed,
        d_max_multibody=zmp.d_max_multibody,
        cot=transport.cot,
        cot_per_distance=transport.cot_per_distance,
        mean_speed=transport.mean_speed,
        work=transport.work,
        positive_work=0.5 * (abs_work + net_work),
        group=classification.group,
        wobble_group=classification.wobble_group,
        x_oscillations=classification.x_oscillations,
        dtheta1_peaks=classification.dtheta1_peaks,
        peak_wobble=float(np.max(np.abs(trajectory.q[:, 2]))),
        period=trajectory.duration,
    )
