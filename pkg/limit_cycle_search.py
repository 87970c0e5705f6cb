import logging
import math
from dataclasses import dataclass
from typing import Callable, Dict, List, Optional, Sequence, Tuple, Union

import numpy as np
from pydantic import BaseModel, ConfigDict, Field

from config import SOLVER_MAX_ITER, SOLVER_TOL
from errors import MapUndefinedError, NoConvergenceError, WalkerError
from hybrid_simulator import HybridSimulator, Trajectory
from walkers import create_walker
from walkers.base_walker import BaseWalker
from walkers.walker_types import HybridState, ModelParams, SimConfig

logger = logging.getLogger(__name__)

# Deterministic cold-start grid for the compass baseline (post-impact values).
COMPASS_SEED_THETA1 = (-0.05, -0.1, -0.15, -0.2)
COMPASS_SEED_DTHETA1 = (0.3, 0.5, 0.8, 1.1)
COMPASS_SEED_DTHETA2 = (0.0, 1.0, 2.0)
WOBBLE_SEED_AMPLITUDE = 0.05
WOBBLE_SEED_PHASES = (0.0, 0.5 * math.pi, math.pi, 1.5 * math.pi)
# Fixed points closer than this (max norm) are the same cycle.
DISTINCT_CYCLE_TOL = 1e-6


class SolverConfig(BaseModel):
    """Settings of the fixed-point search and of parameter continuation."""

    model_config = ConfigDict(frozen=True)

    tol: float = Field(SOLVER_TOL, gt=0)
    max_iter: int = Field(SOLVER_MAX_ITER, ge=1)
    jacobian_step_scale: float = Field(1.0, gt=0)
    min_continuation_step: float = Field(1e-3, gt=0)
    seed_strides: int = Field(40, ge=1)
    max_line_search: int = Field(8, ge=1)


@dataclass(frozen=True)
class SectionState:
    """Post-impact state on the Poincare section.

    The wobbling walker uses (theta1, dtheta1, dtheta2, x, dx); the compass
    walker (theta1, dtheta1, dtheta2). Without phase resetting phi is appended.
    theta2 = 2*theta1 is implied by the touchdown identity.
    """

    values: Tuple[float, ...]
    names: Tuple[str, ...]

    @classmethod
    def from_array(cls, z: Sequence[float], names: Sequence[str]) -> "SectionState":
        if len(z) != len(names):
            raise ValueError(f"Section vector has {len(z)} entries, expected {len(names)}")
        return cls(tuple(float(v) for v in z), tuple(names))

    def as_array(self) -> np.ndarray:
        return np.array(self.values)

    def __len__(self) -> int:
        return len(self.values)

    def get(self, name: str, default: float = 0.0) -> float:
        return self.values[self.names.index(name)] if name in self.names else default

    def to_dict(self) -> Dict[str, float]:
        return dict(zip(self.names, self.values))


@dataclass(frozen=True)
class LimitCycle:
    fixed_point: SectionState
    period: float
    eigenvalues: np.ndarray
    stable: bool
    residual: float
    params: ModelParams
    iterations: int = 0
    kind: str = "wobbling"

    @property
    def max_abs_eigenvalue(self) -> float:
        return float(np.max(np.abs(self.eigenvalues)))

    def to_record(self) -> Dict:
        """Field order: kind, params, fixed point, period, stability, eigenvalues, solver diagnostics."""
        return {
            "kind": self.kind,
            "params": self.params.model_dump(),
            "fixed_point": self.fixed_point.to_dict(),
            "period": self.period,
            "stable": self.stable,
            "max_abs_eigenvalue": self.max_abs_eigenvalue,
            "eigenvalues": [[float(v.real), float(v.imag)] for v in self.eigenvalues],
            "residual": self.residual,
            "iterations": self.iterations,
        }


@dataclass
class NewtonResult:
    z: np.ndarray
    image: np.ndarray
    residual: float
    iterations: int
    jacobian: np.ndarray


@dataclass
class ContinuationPoint:
    """One grid value of a continuation run; cycle is None where a gap was found."""

    value: float
    cycle: Optional[LimitCycle]
    failure: Optional[str] = None


class PoincareMap:
    """Stride-to-stride map between successive post-impact states."""

    def __init__(self, walker: BaseWalker, config: Optional[SimConfig] = None):
        self.walker = walker
        self.config = config or SimConfig()
        self.simulator = HybridSimulator(walker, self.config.replace(record=False))
        names = list(walker.section_names)
        if not walker.params.phase_reset:
            names.append("phi")
        self.names = tuple(names)

    @property
    def dimension(self) -> int:
        return len(self.names)

    def embed(self, z: Union[SectionState, Sequence[float]]) -> HybridState:
        values = dict(zip(self.names, z.values if isinstance(z, SectionState) else np.asarray(z, dtype=float)))
        theta1 = float(values["theta1"])
        return HybridState(
            theta1=theta1,
            theta2=2.0 * theta1,
            x=float(values.get("x", 0.0)),
            dtheta1=float(values["dtheta1"]),
            dtheta2=float(values["dtheta2"]),
            dx=float(values.get("dx", 0.0)),
            phi=float(values.get("phi", 0.0)),
        )

    def project(self, state: HybridState) -> np.ndarray:
        return np.array([getattr(state, name) for name in self.names])

    def section_state(self, z: Sequence[float]) -> SectionState:
        return SectionState.from_array(z, self.names)

    def stride(self, z, record: bool = False) -> Trajectory:
        """Simulate the stride starting at z (recorded when asked)."""
        simulator = HybridSimulator(self.walker, self.config) if record else self.simulator
        state = self.embed(z)
        if not state.is_valid():
            raise MapUndefinedError("Section point embeds to a collapsed state", iterate=z)
        try:
            trajectory = simulator.simulate_stride(state)
        except WalkerError as e:
            raise MapUndefinedError(f"Stride failed: {e}", iterate=np.asarray(z)) from e
        if not trajectory.completed:
            raise MapUndefinedError(
                f"Stride ended with {trajectory.termination.value}",
                iterate=np.asarray(z),
                termination=trajectory.termination.value,
            )
        return trajectory

    def __call__(self, z) -> np.ndarray:
        return self.project(self.stride(z).post_impact)

    def iterate(self, z, n: int) -> List[np.ndarray]:
        """Return [z, P(z), ..., P^n(z)]."""
        points = [np.asarray(z.values if isinstance(z, SectionState) else z, dtype=float)]
        for _ in range(n):
            points.append(self(points[-1]))
        return points


def map_jacobian(map_fn: Callable[[np.ndarray], np.ndarray], z, step_scale: float = 1.0) -> np.ndarray:
    """Central finite-difference Jacobian with step max(1e-6, 1e-6*|z_i|) times step_scale."""
    z = np.asarray(z, dtype=float)
    jacobian = np.zeros((len(z), len(z)))
    for i in range(len(z)):
        h = step_scale * max(1e-6, 1e-6 * abs(z[i]))
        forward = z.copy()
        backward = z.copy()
        forward[i] += h
        backward[i] -= h
        jacobian[:, i] = (np.asarray(map_fn(forward)) - np.asarray(map_fn(backward))) / (2.0 * h)
    return jacobian


def newton_fixed_point(
    map_fn: Callable[[np.ndarray], np.ndarray],
    guess,
    tol: float = SOLVER_TOL,
    max_iter: int = SOLVER_MAX_ITER,
    step_scale: float = 1.0,
    max_line_search: int = 8,
) -> NewtonResult:
    """Damped Newton iteration on F(z) = P(z) - z.

    The step is halved until the residual decreases. Singular Newton systems
    fall back to a least-squares step.

    Raises:
        MapUndefinedError: if the map is undefined at an accepted iterate
        NoConvergenceError: if the residual does not reach tol
    """
    z = np.asarray(guess, dtype=float).copy()
    image = np.asarray(map_fn(z), dtype=float)
    residual = float(np.linalg.norm(image - z, ord=np.inf))
    iterations = 0

    while residual > tol:
        if iterations >= max_iter:
            raise NoConvergenceError(
                f"No convergence after {max_iter} iterations (residual {residual:.3e})",
                iterate=z, residual=residual,
            )
        iterations += 1
        jacobian = map_jacobian(map_fn, z, step_scale)
        system = jacobian - np.eye(len(z))
        try:
            dz = np.linalg.solve(system, z - image)
        except np.linalg.LinAlgError:
            dz = np.linalg.lstsq(system, z - image, rcond=None)[0]

        damping = 1.0
        for _ in range(max_line_search):
            trial = z + damping * dz
            try:
                trial_image = np.asarray(map_fn(trial), dtype=float)
            except MapUndefinedError:
                damping *= 0.5
                continue
            trial_residual = float(np.linalg.norm(trial_image - trial, ord=np.inf))
            if trial_residual < residual:
                z, image, residual = trial, trial_image, trial_residual
                break
            damping *= 0.5
        else:
            raise NoConvergenceError(
                f"Line search stalled at residual {residual:.3e}", iterate=z, residual=residual
            )
        logger.debug(f"Newton iteration {iterations}: residual {residual:.3e}, damping {damping:g}")

    return NewtonResult(z, image, residual, iterations, map_jacobian(map_fn, z, step_scale))


def find_fixed_point(
    guess,
    params: ModelParams,
    sim_config: Optional[SimConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    kind: str = "wobbling",
) -> LimitCycle:
    """Find a periodic gait near guess and linearize the stride map there.

    Args:
        guess: Section vector or SectionState to start from
        params: Model parameters
        sim_config: Simulation settings
        solver_config: Newton settings
        kind: Walker model ("wobbling" or "compass")

    Returns:
        LimitCycle with eigenvalues sorted by decreasing magnitude
    """
    solver_config = solver_config or SolverConfig()
    poincare = PoincareMap(create_walker(params, kind), sim_config)
    z0 = guess.as_array() if isinstance(guess, SectionState) else np.asarray(guess, dtype=float)
    if len(z0) != poincare.dimension:
        raise ValueError(f"Guess has {len(z0)} entries, section needs {poincare.dimension}")

    result = newton_fixed_point(
        poincare, z0,
        tol=solver_config.tol,
        max_iter=solver_config.max_iter,
        step_scale=solver_config.jacobian_step_scale,
        max_line_search=solver_config.max_line_search,
    )
    eigenvalues = np.linalg.eigvals(result.jacobian)
    eigenvalues = eigenvalues[np.argsort(-np.abs(eigenvalues), kind="stable")]
    period = poincare.stride(result.z).duration
    cycle = LimitCycle(
        fixed_point=poincare.section_state(result.z),
        period=period,
        eigenvalues=eigenvalues,
        stable=bool(np.max(np.abs(eigenvalues)) < 1.0),
        residual=result.residual,
        params=params,
        iterations=result.iterations,
        kind=kind,
    )
    logger.info(
        f"Fixed point ({kind}, k={params.k:g}, alpha={params.alpha:g}, omega={params.omega:g}): "
        f"period {period:.4f}, max|lambda| {cycle.max_abs_eigenvalue:.4f}, {result.iterations} iterations"
    )
    return cycle


def continue_in_parameter(
    start: LimitCycle,
    axis: str,
    grid: Sequence[float],
    sim_config: Optional[SimConfig] = None,
    solver_config: Optional[SolverConfig] = None,
) -> List[ContinuationPoint]:
    """Natural-parameter continuation of a cycle along one ModelParams field.

    Each grid value is approached from the last converged cycle; failed
    steps are halved down to the minimum step, after which the value is
    recorded as a gap and the next value is tried from the same cycle.
    """
    solver_config = solver_config or SolverConfig()
    results = []
    current = start
    for target in grid:
        try:
            current = _continue_to(current, axis, float(target), sim_config, solver_config)
            results.append(ContinuationPoint(float(target), current))
        except (WalkerError, ValueError) as e:
            logger.warning(f"Continuation gap at {axis}={target:g}: {e}")
            results.append(ContinuationPoint(float(target), None, str(e)))
    return results


def _continue_to(
    cycle: LimitCycle,
    axis: str,
    target: float,
    sim_config: Optional[SimConfig],
    solver_config: SolverConfig,
) -> LimitCycle:
    value = float(getattr(cycle.params, axis))
    step = target - value
    guess = cycle
    while True:
        trial = target if abs(target - value) <= abs(step) else value + step
        try:
            return_cycle = find_fixed_point(
                guess.fixed_point, guess.params.replace(**{axis: trial}),
                sim_config, solver_config, kind=cycle.kind,
            )
        except (WalkerError, ValueError) as e:
            step *= 0.5
            if abs(step) < solver_config.min_continuation_step:
                raise NoConvergenceError(f"Continuation to {axis}={target:g} failed near {trial:g}: {e}") from e
            continue
        if trial == target:
            return return_cycle
        value, guess = trial, return_cycle


def seed_compass_cycle(
    params: ModelParams,
    sim_config: Optional[SimConfig] = None,
    solver_config: Optional[SolverConfig] = None,
) -> LimitCycle:
    """Cold-start the compass baseline: iterate strides from a fixed seed grid, then polish."""
    solver_config = solver_config or SolverConfig()
    poincare = PoincareMap(create_walker(params, "compass"), sim_config)
    phase = [0.0] if "phi" in poincare.names else []
    for theta1 in COMPASS_SEED_THETA1:
        for dtheta1 in COMPASS_SEED_DTHETA1:
            for dtheta2 in COMPASS_SEED_DTHETA2:
                z = np.array([theta1, dtheta1, dtheta2, *phase])
                try:
                    z = poincare.iterate(z, solver_config.seed_strides)[-1]
                    return find_fixed_point(z, params, sim_config, solver_config, kind="compass")
                except WalkerError as e:
                    logger.debug(f"Compass seed {theta1}, {dtheta1}, {dtheta2} failed: {e}")
    raise NoConvergenceError(f"No compass cycle found for omega={params.omega:g}")


def wobble_seeds(compass: LimitCycle, params: ModelParams) -> List[SectionState]:
    """Cold-start guesses for the wobbling walker built from a compass cycle.

    The first guess keeps the wobble at rest. The others put a sinusoidal
    wobble on the stride harmonics nearest the resonance order n (m = floor(n)
    and ceil(n), at least 1), i.e. angular frequency 2*pi*m/T, in four
    phases each. Harmonics closer to n come first.
    """
    names = ["theta1", "dtheta1", "dtheta2", "x", "dx"]
    if not params.phase_reset:
        names.append("phi")
    base = {name: compass.fixed_point.get(name) for name in names}
    order = resonance_order(compass.period, params)
    harmonics = sorted({max(1, math.floor(order)), max(1, math.ceil(order))}, key=lambda m: (abs(m - order), m))
    seeds = [SectionState.from_array([base[n] for n in names], names)]
    for m in harmonics:
        frequency = 2.0 * math.pi * m / compass.period
        for phase in WOBBLE_SEED_PHASES:
            guess = dict(base)
            guess["x"] = WOBBLE_SEED_AMPLITUDE * math.sin(phase)
            guess["dx"] = WOBBLE_SEED_AMPLITUDE * frequency * math.cos(phase)
            seeds.append(SectionState.from_array([guess[n] for n in names], names))
    return seeds


def resonance_order(period: float, params: ModelParams) -> float:
    """Wobble oscillations per stride, T*sqrt(k/alpha)/(2*pi)."""
    return period * math.sqrt(params.k / params.alpha) / (2.0 * math.pi)


def solve_distinct(
    guesses: Sequence[SectionState],
    params: ModelParams,
    sim_config: Optional[SimConfig] = None,
    solver_config: Optional[SolverConfig] = None,
    kind: str = "wobbling",
) -> List[Tuple[int, LimitCycle]]:
    """Solve from every guess and keep each distinct cycle once.

    Returns:
        (index of the first guess that reached it, cycle) pairs in guess order
    """
    found: List[Tuple[int, LimitCycle]] = []
    for index, guess in enumerate(guesses):
        try:
            cycle = find_fixed_point(guess, params, sim_config, solver_config, kind=kind)
        except WalkerError as e:
            logger.debug(f"Seed {index} failed: {e}")
            continue
        if not any(same_cycle(cycle, other) for _, other in found):
            found.append((index, cycle))
    return found


def same_cycle(a: LimitCycle, b: LimitCycle, tol: float = DISTINCT_CYCLE_TOL) -> bool:
    za, zb = a.fixed_point.as_array(), b.fixed_point.as_array()
    return a.kind == b.kind and len(za) == len(zb) and float(np.max(np.abs(za - zb))) <= tol


def preferred_cycle(cycles: Sequence[LimitCycle]) -> LimitCycle:
    """Stable cycles first, then the smallest max|lambda|; ties keep the earlier cycle."""
    if not cycles:
        raise ValueError("No cycles to choose from")
    return min(cycles, key=lambda c: (not c.stable, c.max_abs_eigenvalue))


def iterate_map(
    z,
    n: int,
    params: ModelParams,
    sim_config: Optional[SimConfig] = None,
    kind: str = "wobbling",
) -> List[np.ndarray]:
    """n-fold composition of the stride map, returning every intermediate point."""
    return PoincareMap(create_walker(params, kind), sim_config).iterate(z, n)


def contraction_rate(cycle: LimitCycle, perturbation: float = 1e-5, strides: int = 10,
                     sim_config: Optional[SimConfig] = None) -> float:
    """Empirical per-stride contraction of a perturbed orbit (geometric mean over the last half)."""
    z_star = cycle.fixed_point.as_array()
    start = z_star + perturbation * np.ones_like(z_star) / math.sqrt(len(z_star))
    points = iterate_map(start, strides, cycle.params, sim_config, kind=cycle.kind)
    distances = [float(np.linalg.norm(p - z_star)) for p in points]
    half = strides // 2
    return (distances[strides] / distances[half]) ** (1.0 / (strides - half))
