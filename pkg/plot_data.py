"""Delimited-text datasets behind the sweep figures.

fig2 is the k-alpha map of every grid point; fig5, fig6 and fig8 plot the
largest eigenvalue, d_max and CoT against k with the compass baseline as a
reference column; fig3, fig4 and fig7 are time profiles over one normalised
stride of the named solutions; fig4 adds the compass baseline of each omega.
"""

import csv
import logging
import math
import os
from typing import Any, Dict, List, Optional, Tuple

import numpy as np

from errors import SweepConfigError, SweepIOError, WalkerError
from gait_metrics import zmp_distance
from hybrid_simulator import Trajectory
from limit_cycle_search import PoincareMap
from sweep_orchestrator import PARAM_FIELDS, SweepResult
from walkers import create_walker
from walkers.walker_types import ModelParams, SimConfig

logger = logging.getLogger(__name__)

FIGURES = ("fig2", "fig3", "fig4", "fig5", "fig6", "fig7", "fig8")
# Representative solutions: (k, alpha, omega).
NAMED_SOLUTIONS = {"a": (0.5, 0.25, 3.0), "b": (6.0, 0.25, 3.0), "c": (22.5, 0.25, 3.0)}

PROFILE_COLUMNS = ["solution", "t_norm", "theta1", "theta2", "x", "dtheta1", "dtheta2", "dx", "u"]
SCALAR_FIGURES = {
    "fig5": ("max_abs_eigenvalue", "baseline_max_abs_eigenvalue"),
    "fig6": ("d_max", "baseline_d_max"),
    "fig8": ("cot", "baseline_cot"),
}


def _same(a: Optional[float], b: float) -> bool:
    return a is not None and math.isclose(a, b, rel_tol=1e-9, abs_tol=1e-12)


def find_record(records: List[Dict[str, Any]], k: float, alpha: float, omega: float) -> Optional[Dict[str, Any]]:
    for record in records:
        if record["status"] != "none" and _same(record["k"], k) and _same(record["alpha"], alpha) \
                and _same(record["omega"], omega):
            return record
    return None


def record_params(record: Dict[str, Any]) -> ModelParams:
    values = {name: record[name] for name in PARAM_FIELDS if record.get(name) is not None}
    return ModelParams(**values)


def simulate_record(record: Dict[str, Any], sim_config: Optional[SimConfig] = None) -> Trajectory:
    """Re-simulate the stored fixed point of a record for one recorded stride."""
    poincare = PoincareMap(create_walker(record_params(record), record["kind"]), sim_config)
    z = [record[name] if record.get(name) is not None else 0.0 for name in poincare.names]
    return poincare.stride(z, record=True)


def _profile_rows(label: str, trajectory: Trajectory) -> List[List[Any]]:
    rows = []
    for i in range(len(trajectory)):
        t_norm = (trajectory.times[i] - trajectory.times[0]) / trajectory.duration
        rows.append([label, t_norm, *trajectory.q[i], *trajectory.dq[i], trajectory.u[i]])
    return rows


def _named_trajectories(result: SweepResult, sim_config: Optional[SimConfig]):
    for label, (k, alpha, omega) in NAMED_SOLUTIONS.items():
        record = find_record(result.records, k, alpha, omega)
        if record is None:
            logger.info(f"Solution {label} (k={k:g}, alpha={alpha:g}, omega={omega:g}) is not in the result")
            continue
        try:
            yield label, record, simulate_record(record, sim_config)
        except WalkerError as e:
            logger.warning(f"Could not re-simulate solution {label}: {e}")


def figure_dataset(
    result: SweepResult, figure_id: str, sim_config: Optional[SimConfig] = None
) -> Tuple[List[str], List[List[Any]]]:
    """Header and rows of one figure's dataset.

    Raises:
        SweepConfigError: for an unknown figure id
    """
    if figure_id not in FIGURES:
        raise SweepConfigError(f"Unknown figure id {figure_id!r}; expected one of {', '.join(FIGURES)}")

    if figure_id == "fig2":
        columns = ["omega", "k", "alpha", "status", "group", "max_abs_eigenvalue"]
        return columns, [[r[c] for c in columns] for r in result.records]

    if figure_id in SCALAR_FIGURES:
        value, reference = SCALAR_FIGURES[figure_id]
        baseline = {r["omega"]: r.get(value) for r in result.baseline}
        columns = ["omega", "alpha", "k", "group", "status", value, reference]
        rows = [
            [r["omega"], r["alpha"], r["k"], r["group"], r["status"], r[value], baseline.get(r["omega"])]
            for r in result.records if r["status"] != "none"
        ]
        return columns, rows

    if figure_id == "fig3":
        rows = []
        for label, _, trajectory in _named_trajectories(result, sim_config):
            rows.extend(_profile_rows(label, trajectory))
        return PROFILE_COLUMNS, rows

    if figure_id == "fig4":
        rows = []
        for label, _, trajectory in _named_trajectories(result, sim_config):
            rows.extend(_profile_rows(label, trajectory))
        for record in result.baseline:
            if record["status"] == "none":
                continue
            try:
                trajectory = simulate_record(record, sim_config)
            except WalkerError as e:
                logger.warning(f"Could not re-simulate compass baseline at omega={record['omega']:g}: {e}")
                continue
            rows.extend(_profile_rows(f"compass_omega_{record['omega']:g}", trajectory))
        return PROFILE_COLUMNS, rows

    # fig7
    rows = []
    for label, record, trajectory in _named_trajectories(result, sim_config):
        try:
            profile = zmp_distance(trajectory, record_params(record))
        except WalkerError as e:
            logger.warning(f"No ZMP profile for solution {label}: {e}")
            continue
        for i in range(len(trajectory)):
            t_norm = (trajectory.times[i] - trajectory.times[0]) / trajectory.duration
            rows.append([label, t_norm, profile.d[i], profile.d_multibody[i]])
    return ["solution", "t_norm", "d", "d_multibody"], rows


def _format(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def emit_plots(result: SweepResult, figure_id: str, output_dir: str,
               sim_config: Optional[SimConfig] = None) -> str:
    """Write one figure's dataset as CSV and return its path."""
    columns, rows = figure_dataset(result, figure_id, sim_config)
    path = os.path.join(output_dir, f"{figure_id}.csv")
    try:
        os.makedirs(output_dir, exist_ok=True)
        with open(path, "w", newline="") as f:
            writer = csv.writer(f, lineterminator="\n")
            writer.writerow(columns)
            for row in rows:
                writer.writerow([_format(v) for v in row])
    except OSError as e:
        raise SweepIOError(f"Cannot write {path}: {e}") from e
    logger.info(f"Wrote {len(rows)} rows to {path}")
    return path
