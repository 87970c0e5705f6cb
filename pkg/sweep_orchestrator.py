import csv
import json
import logging
import math
import os
import time
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
from typing import Any, Callable, Dict, Iterable, List, Optional, Sequence, Tuple

import numpy as np

from config import WOBBLEWALK_VERSION
from errors import NoConvergenceError, SweepConfigError, SweepIOError, WalkerError
from gait_metrics import GaitMetrics, evaluate_gait
from hybrid_simulator import Trajectory
from limit_cycle_search import (
    LimitCycle,
    PoincareMap,
    continue_in_parameter,
    preferred_cycle,
    same_cycle,
    seed_compass_cycle,
    solve_distinct,
    wobble_seeds,
)
from sweep_spec import SweepSpec
from walkers import create_walker
from walkers.walker_types import ModelParams

logger = logging.getLogger(__name__)

RESULTS_FILE = "results.csv"
BASELINE_FILE = "baseline.csv"
MANIFEST_FILE = "manifest.json"

PARAM_FIELDS = ["omega", "k", "alpha", "mu", "gamma", "stride_angle", "kp", "kd", "phase_reset"]
METRIC_FIELDS = [
    "d_max", "d_min_signed", "d_max_signed", "d_max_multibody", "cot", "cot_per_distance",
    "mean_speed", "work", "positive_work", "group", "wobble_group", "x_oscillations",
    "dtheta1_peaks", "peak_wobble",
]
SECTION_FIELDS = ["theta1", "dtheta1", "dtheta2", "x", "dx", "phi"]
RECORD_FIELDS = (
    ["kind"] + PARAM_FIELDS + ["status", "max_abs_eigenvalue", "period"]
    + METRIC_FIELDS + SECTION_FIELDS + ["residual", "iterations", "seed", "solutions", "failure"]
)


@dataclass
class ColumnJob:
    """All alpha values of one (omega, k) column; solved sequentially with continuation."""

    spec: SweepSpec
    omega: float
    k: float
    alphas: List[float]
    compass: Optional[LimitCycle] = None
    gains: Dict[str, float] = field(default_factory=dict)


@dataclass
class PointSolution:
    """Preferred cycle of a grid point and how many distinct cycles were found there."""

    cycle: LimitCycle
    metrics: Optional[GaitMetrics]
    seed: str
    metrics_failure: Optional[str] = None
    solutions: int = 1


@dataclass
class SweepResult:
    records: List[Dict[str, Any]]
    baseline: List[Dict[str, Any]] = field(default_factory=list)
    path: Optional[str] = None
    manifest: Dict[str, Any] = field(default_factory=dict)


def empty_record(params: ModelParams, kind: str = "wobbling") -> Dict[str, Any]:
    record = {name: None for name in RECORD_FIELDS}
    record.update(params.model_dump(include=set(PARAM_FIELDS)))
    record["kind"] = kind
    record["status"] = "none"
    return record


def build_record(
    cycle: Optional[LimitCycle],
    params: ModelParams,
    metrics: Optional[GaitMetrics] = None,
    seed: str = "",
    failure: Optional[str] = None,
    kind: str = "wobbling",
    solutions: Optional[int] = None,
) -> Dict[str, Any]:
    """One result row: parameters, solve status, metrics, fixed point and diagnostics."""
    record = empty_record(params, kind)
    record["seed"] = seed
    record["solutions"] = solutions
    record["failure"] = failure
    if cycle is None:
        return record
    record["status"] = "stable" if cycle.stable else "unstable"
    record["max_abs_eigenvalue"] = cycle.max_abs_eigenvalue
    record["period"] = cycle.period
    record["residual"] = cycle.residual
    record["iterations"] = cycle.iterations
    for name in SECTION_FIELDS:
        record[name] = cycle.fixed_point.get(name, 0.0)
    if metrics is not None:
        values = metrics.to_record()
        for name in METRIC_FIELDS:
            record[name] = values[name]
    return record


def record_cycle(cycle: LimitCycle, sim_config=None) -> Trajectory:
    """Recorded stride of a converged cycle (for metrics and time profiles)."""
    poincare = PoincareMap(create_walker(cycle.params, cycle.kind), sim_config)
    return poincare.stride(cycle.fixed_point, record=True)


def measure(cycle: LimitCycle, spec: Optional[SweepSpec] = None) -> Tuple[Optional[GaitMetrics], Optional[str]]:
    """Metrics of a cycle; metric failures are returned as text, not raised."""
    sim_config = spec.sim if spec else None
    positive_only = spec.positive_work if spec else False
    try:
        return evaluate_gait(record_cycle(cycle, sim_config), cycle.params, positive_only), None
    except WalkerError as e:
        logger.warning(f"Metrics failed for k={cycle.params.k:g}, alpha={cycle.params.alpha:g}: {e}")
        return None, f"metrics: {e}"


def solve_point(
    spec: SweepSpec,
    k: float,
    alpha: float,
    omega: float,
    compass: Optional[LimitCycle] = None,
    neighbor: Optional[LimitCycle] = None,
    gains: Optional[Dict[str, float]] = None,
) -> PointSolution:
    """Solve one grid point from a neighbor (when given) and from every cold seed.

    Distinct cycles are collected; the preferred one (stable first, then
    smallest max|lambda|) is measured and returned.

    Raises:
        NoConvergenceError: if every seed fails
    """
    params = spec.model_params(k, alpha, omega, **(gains or {}))
    candidates: List[Tuple[str, LimitCycle]] = []
    failures = []

    if neighbor is not None and spec.seeding.strategy == "continuation":
        point = continue_in_parameter(neighbor, "alpha", [alpha], spec.sim, spec.solver)[0]
        if point.cycle is not None and point.cycle.params == params:
            candidates.append(("neighbor", point.cycle))
        else:
            failures.append(point.failure or "neighbor parameters differ")

    if compass is None:
        compass = seed_compass_cycle(params, spec.sim, spec.solver)
    seeds = wobble_seeds(compass, params)
    if not spec.seeding.resonance_seeds:
        seeds = seeds[:1]
    for index, cycle in solve_distinct(seeds, params, spec.sim, spec.solver):
        if not any(same_cycle(cycle, other) for _, other in candidates):
            candidates.append((f"cold:{index}", cycle))

    if not candidates:
        failures.append(f"all {len(seeds)} cold seeds failed")
        raise NoConvergenceError("; ".join(failures))
    cycle = preferred_cycle([c for _, c in candidates])
    seed = next(name for name, c in candidates if c is cycle)
    if len(candidates) > 1:
        logger.info(f"{len(candidates)} distinct cycles at k={k:g}, alpha={alpha:g}, omega={omega:g}; kept {seed}")
    metrics, metrics_failure = measure(cycle, spec)
    return PointSolution(cycle, metrics, seed, metrics_failure, len(candidates))


def solve_column(job: ColumnJob) -> List[Dict[str, Any]]:
    """Solve one k-column in ascending alpha; failures become 'none' records."""
    records = []
    neighbor = None
    for alpha in job.alphas:
        params = job.spec.model_params(job.k, alpha, job.omega, **job.gains)
        if job.compass is None and neighbor is None:
            records.append(build_record(None, params, failure="no compass baseline for this omega"))
            continue
        try:
            solution = solve_point(
                job.spec, job.k, alpha, job.omega, compass=job.compass, neighbor=neighbor, gains=job.gains
            )
        except WalkerError as e:
            logger.warning(f"No cycle at omega={job.omega:g}, k={job.k:g}, alpha={alpha:g}: {e}")
            records.append(build_record(None, params, failure=str(e)))
            continue
        records.append(build_record(
            solution.cycle, params, solution.metrics,
            seed=solution.seed, failure=solution.metrics_failure, solutions=solution.solutions,
        ))
        neighbor = solution.cycle
    return records


def entrained(cycle: LimitCycle, min_period_ratio: float) -> bool:
    """True if the stride lasts at least min_period_ratio of the oscillator's half period pi/omega."""
    return cycle.period >= min_period_ratio * math.pi / cycle.params.omega


def solve_baseline(spec: SweepSpec, omega: float) -> Tuple[Optional[LimitCycle], Dict[str, float], Optional[str]]:
    """Compass baseline for one omega, with one retuning pass if the fixed parameters fail.

    The retune overrides of the spec are tried when no baseline is found, or
    when the baseline it finds is not entrained by the oscillator. An
    un-entrained baseline is kept if retuning does not produce a cycle.

    Returns:
        (cycle or None, controller overrides used, failure text)
    """
    params = spec.model_params(spec.grids.k.min, spec.grids.alpha.min, omega)
    default = None
    try:
        default = seed_compass_cycle(params, spec.sim, spec.solver)
    except WalkerError as e:
        failure = str(e)
        logger.warning(f"Compass baseline failed at omega={omega:g} with the fixed parameters: {e}")
    if spec.retune is None:
        return default, {}, None if default is not None else failure

    if default is not None:
        if entrained(default, spec.retune.min_period_ratio):
            return default, {}, None
        failure = f"baseline period {default.period:.4f} is not entrained at omega={omega:g}"
        logger.warning(f"Compass baseline at omega={omega:g} is not entrained (period {default.period:.4f})")

    gains = spec.retune.overrides()
    try:
        cycle = seed_compass_cycle(params.replace(**gains), spec.sim, spec.solver)
        logger.info(f"Compass baseline at omega={omega:g} found after retuning to {gains}")
        return cycle, gains, None
    except WalkerError as e:
        if default is not None:
            logger.warning(f"Retuning failed at omega={omega:g}; keeping the un-entrained baseline: {e}")
            return default, {}, None
        return None, gains, f"{failure}; after retuning: {e}"


def format_value(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    if isinstance(value, np.integer):
        return str(int(value))
    # One physical line per record keeps checkpoints line-addressable.
    return " ".join(str(value).split())


def parse_value(name: str, text: str) -> Any:
    if text == "":
        return None
    if name == "phase_reset":
        return text == "true"
    if name in ("kind", "status", "group", "wobble_group", "seed", "failure"):
        return text
    if name in ("x_oscillations", "dtheta1_peaks", "iterations", "solutions"):
        return int(text)
    return float(text)


def format_row(record: Dict[str, Any]) -> List[str]:
    return [format_value(record.get(name)) for name in RECORD_FIELDS]


def read_records(path: str) -> List[Dict[str, Any]]:
    """Parse a result table written by the sweep runner."""
    try:
        with open(path, "r", newline="") as f:
            reader = csv.reader(f)
            header = next(reader, None)
            if header is None:
                return []
            if header != RECORD_FIELDS:
                raise SweepConfigError(f"{path} is not a sweep result table")
            return [{name: parse_value(name, text) for name, text in zip(header, row)} for row in reader]
    except OSError as e:
        raise SweepIOError(f"Cannot read {path}: {e}") from e


def load_results(path: str) -> SweepResult:
    """Load a result table plus the baseline table and manifest stored next to it."""
    if not os.path.isfile(path):
        raise SweepConfigError(f"Result file not found: {path}")
    directory = os.path.dirname(path)
    baseline_path = os.path.join(directory, BASELINE_FILE)
    manifest_path = os.path.join(directory, MANIFEST_FILE)
    baseline = read_records(baseline_path) if os.path.isfile(baseline_path) else []
    manifest = {}
    if os.path.isfile(manifest_path):
        with open(manifest_path, "r") as f:
            manifest = json.load(f)
    return SweepResult(read_records(path), baseline, path, manifest)


class SweepRunner:
    """Runs a (k, alpha, omega) sweep column by column and checkpoints to CSV.

    Columns are handed to a worker pool but written strictly in grid order,
    so the result file does not depend on the number of workers or on the
    completion order. A resumed run keeps the complete columns already on
    disk and recomputes the rest.
    """

    def __init__(
        self,
        spec: SweepSpec,
        output_dir: Optional[str] = None,
        workers: Optional[int] = None,
        column_solver: Callable[[ColumnJob], List[Dict[str, Any]]] = solve_column,
        baseline_solver: Callable[[SweepSpec, float], Tuple] = solve_baseline,
        executor_cls=ProcessPoolExecutor,
    ):
        """Initialize the runner.

        Args:
            spec: Validated sweep specification
            output_dir: Overrides the spec's output directory
            workers: Overrides the spec's worker count
            column_solver: Solves one ColumnJob (must be picklable for process pools)
            baseline_solver: Finds the compass baseline for one omega
            executor_cls: concurrent.futures executor used when workers > 1
        """
        self.spec = spec
        self.workers = workers or spec.workers
        self.run_dir = os.path.join(output_dir or spec.output.directory, spec.output.name)
        self.column_solver = column_solver
        self.baseline_solver = baseline_solver
        self.executor_cls = executor_cls

    @property
    def results_path(self) -> str:
        return os.path.join(self.run_dir, RESULTS_FILE)

    @property
    def baseline_path(self) -> str:
        return os.path.join(self.run_dir, BASELINE_FILE)

    @property
    def manifest_path(self) -> str:
        return os.path.join(self.run_dir, MANIFEST_FILE)

    def jobs(self, baselines: Dict[float, Tuple]) -> List[ColumnJob]:
        jobs = []
        for omega in self.spec.grids.omega:
            compass, gains, _ = baselines[omega]
            for k in self.spec.k_values:
                jobs.append(ColumnJob(self.spec, omega, k, self.spec.alpha_values, compass, dict(gains)))
        return jobs

    def run_baseline(self) -> Tuple[List[Dict[str, Any]], Dict[float, Tuple]]:
        """Compass baseline rows (one per omega) and the cycles used for seeding."""
        rows = []
        baselines = {}
        for omega in self.spec.grids.omega:
            print(f"Compass baseline for omega={omega:g}")
            cycle, gains, failure = self.baseline_solver(self.spec, omega)
            baselines[omega] = (cycle, gains, failure)
            params = self.spec.model_params(self.spec.grids.k.min, self.spec.grids.alpha.min, omega, **gains)
            metrics = measure(cycle, self.spec)[0] if cycle is not None else None
            record = build_record(cycle, params, metrics, seed="compass", failure=failure, kind="compass")
            record["k"] = None
            record["alpha"] = None
            rows.append(record)
        return rows, baselines

    def run(self, resume: bool = False) -> SweepResult:
        """Run (or resume) the sweep and write results, baseline and manifest.

        Raises:
            SweepIOError: if writing fails; complete columns stay on disk
        """
        started = time.strftime("%Y-%m-%d %H:%M:%S")
        print(f"Starting sweep '{self.spec.output.name}' with {self.spec.grid_size} grid points")
        try:
            os.makedirs(self.run_dir, exist_ok=True)
        except OSError as e:
            raise SweepIOError(f"Cannot create {self.run_dir}: {e}") from e

        baseline_rows, baselines = self.run_baseline()
        self._write_table(self.baseline_path, baseline_rows)

        column_size = len(self.spec.alpha_values)
        done_columns = self._prepare_checkpoint(column_size) if resume else self._start_table()
        jobs = self.jobs(baselines)
        if done_columns:
            print(f"Resuming after {done_columns} of {len(jobs)} columns")
        pending = jobs[done_columns:]

        for index, rows in enumerate(self._map(pending), start=done_columns + 1):
            self._append_rows(rows)
            job = jobs[index - 1]
            print(f"Column {index}/{len(jobs)} done (omega={job.omega:g}, k={job.k:g})")

        records = read_records(self.results_path)
        manifest = self._write_manifest(started, baselines, len(records))
        print(f"Sweep complete. Results saved to {self.results_path}")
        return SweepResult(records, baseline_rows, self.results_path, manifest)

    def _map(self, jobs: Sequence[ColumnJob]) -> Iterable[List[Dict[str, Any]]]:
        if self.workers <= 1 or len(jobs) <= 1:
            return map(self.column_solver, jobs)
        return self._pool_map(jobs)

    def _pool_map(self, jobs):
        with self.executor_cls(max_workers=self.workers) as executor:
            # executor.map yields in submission order.
            yield from executor.map(self.column_solver, jobs)

    def _start_table(self) -> int:
        self._write_table(self.results_path, [])
        return 0

    def _prepare_checkpoint(self, column_size: int) -> int:
        """Truncate the result file to its complete columns and return their count."""
        if not os.path.isfile(self.results_path):
            return self._start_table()
        try:
            with open(self.results_path, "r", newline="") as f:
                lines = f.read().splitlines(keepends=True)
        except OSError as e:
            raise SweepIOError(f"Cannot read checkpoint {self.results_path}: {e}") from e
        if not lines or lines[0].rstrip("\r\n") != ",".join(RECORD_FIELDS):
            raise SweepConfigError(f"{self.results_path} does not match the current record layout")
        rows = [line for line in lines[1:] if line.endswith("\n")]
        done = len(rows) // column_size
        try:
            with open(self.results_path, "w", newline="") as f:
                f.writelines([lines[0]] + rows[: done * column_size])
        except OSError as e:
            raise SweepIOError(f"Cannot rewrite checkpoint {self.results_path}: {e}") from e
        return done

    def _write_table(self, path: str, records: List[Dict[str, Any]]) -> None:
        try:
            with open(path, "w", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                writer.writerow(RECORD_FIELDS)
                for record in records:
                    writer.writerow(format_row(record))
        except OSError as e:
            raise SweepIOError(f"Cannot write {path}: {e}") from e

    def _append_rows(self, records: List[Dict[str, Any]]) -> None:
        try:
            with open(self.results_path, "a", newline="") as f:
                writer = csv.writer(f, lineterminator="\n")
                for record in records:
                    writer.writerow(format_row(record))
        except OSError as e:
            raise SweepIOError(f"Cannot append to {self.results_path}: {e}") from e

    def _write_manifest(self, started: str, baselines: Dict[float, Tuple], record_count: int) -> Dict[str, Any]:
        retuning = [
            {"omega": omega, "gains": gains, "baseline_found": cycle is not None}
            for omega, (cycle, gains, _) in baselines.items() if gains
        ]
        manifest = {
            "name": self.spec.output.name,
            "spec_hash": self.spec.spec_hash(),
            "version": WOBBLEWALK_VERSION,
            "started": started,
            "finished": time.strftime("%Y-%m-%d %H:%M:%S"),
            "workers": self.workers,
            "grid_size": self.spec.grid_size,
            "records": record_count,
            "retuning": retuning,
            "files": {"results": RESULTS_FILE, "baseline": BASELINE_FILE},
            "spec": self.spec.model_dump(mode="json"),
        }
        try:
            with open(self.manifest_path, "w") as f:
                json.dump(manifest, f, indent=2)
        except OSError as e:
            raise SweepIOError(f"Cannot write {self.manifest_path}: {e}") from e
        return manifest


def run_sweep(spec: SweepSpec, output_dir: Optional[str] = None, workers: Optional[int] = None,
              resume: bool = False) -> SweepResult:
    return SweepRunner(spec, output_dir=output_dir, workers=workers).run(resume=resume)


def run_baseline_compass(spec: SweepSpec, output_dir: Optional[str] = None) -> SweepResult:
    """Compass baseline rows for every omega of the spec, written to baseline.csv."""
    runner = SweepRunner(spec, output_dir=output_dir)
    try:
        os.makedirs(runner.run_dir, exist_ok=True)
    except OSError as e:
        raise SweepIOError(f"Cannot create {runner.run_dir}: {e}") from e
    rows, _ = runner.run_baseline()
    runner._write_table(runner.baseline_path, rows)
    return SweepResult([], rows, runner.baseline_path)
