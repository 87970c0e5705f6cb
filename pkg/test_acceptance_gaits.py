"""
End-to-end gait checks on the group slice (alpha = 0.25, omega = 2 and 3,
k from 0.5 to 30). One sweep is solved for the whole module; it takes
minutes, so run with --runslow.
"""

import math
import os

import numpy as np
import pytest

from limit_cycle_search import (
    PoincareMap,
    contraction_rate,
    find_fixed_point,
    iterate_map,
    map_jacobian,
)
from plot_data import find_record, record_params
from sweep_orchestrator import measure, run_sweep
from sweep_spec import SweepSpec
from walkers import create_walker

SPEC_PATH = os.path.join(os.path.dirname(os.path.abspath(__file__)), "specs", "group_slice.json")
ALPHA = 0.25
REPRESENTATIVE = {0.5: ("A", 1), 6.0: ("B", 2), 22.5: ("C", 3)}
SECTION = ("theta1", "dtheta1", "dtheta2", "x", "dx")

pytestmark = pytest.mark.slow


@pytest.fixture(scope="module")
def spec():
    return SweepSpec.load(SPEC_PATH)


@pytest.fixture(scope="module")
def sweep(spec, tmp_path_factory):
    return run_sweep(spec, output_dir=str(tmp_path_factory.mktemp("group_slice")))


def column(sweep, omega):
    rows = [r for r in sweep.records if math.isclose(r["omega"], omega) and math.isclose(r["alpha"], ALPHA)]
    return sorted(rows, key=lambda r: r["k"])


def baseline_row(sweep, omega):
    row = next(r for r in sweep.baseline if math.isclose(r["omega"], omega))
    assert row["status"] != "none", row["failure"]
    return row


def representative(sweep, k):
    record = find_record(sweep.records, k, ALPHA, 3.0)
    assert record is not None, f"no cycle at k={k:g}"
    return record


def cycle_of(record, spec, kind="wobbling"):
    names = SECTION if kind == "wobbling" else SECTION[:3]
    z = [record[name] for name in names]
    return find_fixed_point(z, record_params(record), spec.sim, spec.solver, kind=kind)


@pytest.fixture(scope="module")
def representatives(sweep, spec):
    solved = {}
    for k in REPRESENTATIVE:
        cycle = cycle_of(representative(sweep, k), spec)
        metrics, failure = measure(cycle, spec)
        assert metrics is not None, failure
        solved[k] = (cycle, metrics)
    return solved


def test_baseline_for_both_frequencies(sweep):
    for omega in (2.0, 3.0):
        row = baseline_row(sweep, omega)
        assert row["residual"] <= 1e-10
    retuned = {entry["omega"] for entry in sweep.manifest["retuning"]}
    assert all(entry["baseline_found"] for entry in sweep.manifest["retuning"])
    assert retuned <= {2.0, 3.0}


def test_groups_form_disjoint_k_bands(sweep):
    rows = [r for r in column(sweep, 3.0) if r["status"] != "none"]
    bands = []
    for row in rows:
        if not bands or bands[-1][0] != row["group"]:
            bands.append((row["group"], [row["k"]]))
        else:
            bands[-1][1].append(row["k"])
    print(f"k-bands at omega=3: {[(g, ks[0], ks[-1]) for g, ks in bands]}")
    named = [b for b in bands if b[0] in ("A", "B", "C", "D", "E")]
    assert len(named) >= 3
    for k, (group, _) in REPRESENTATIVE.items():
        assert representative(sweep, k)["group"] == group
    assert representative(sweep, 22.5)["x_oscillations"] == 2


def test_stance_rate_peaks_match_groups(sweep):
    for k, (_, peaks) in REPRESENTATIVE.items():
        assert representative(sweep, k)["dtheta1_peaks"] == peaks
    assert baseline_row(sweep, 3.0)["dtheta1_peaks"] == 1


def test_largest_eigenvalue_grows_with_stiffness(sweep):
    rows = [r for r in column(sweep, 3.0) if r["status"] == "stable"]
    for group in sorted({r["group"] for r in rows}):
        values = [r["max_abs_eigenvalue"] for r in rows if r["group"] == group]
        if len(values) < 2:
            continue
        decreases = sum(1 for a, b in zip(values, values[1:]) if b < a - 1e-9)
        assert decreases <= 0.05 * (len(values) - 1), f"group {group}: {values}"


def test_compass_is_more_stable_than_wobbling_solutions(sweep):
    compass = baseline_row(sweep, 3.0)["max_abs_eigenvalue"]
    wobbling = [r["max_abs_eigenvalue"] for r in column(sweep, 3.0) if r["status"] != "none"]
    assert wobbling
    assert compass < min(wobbling)


def test_group_a_has_largest_zmp_excursion(representatives):
    d_a = representatives[0.5][1].d_max
    assert d_a > representatives[6.0][1].d_max
    assert d_a > representatives[22.5][1].d_max


def test_zmp_moves_from_front_to_back(representatives):
    for k, (_, metrics) in representatives.items():
        d = metrics.d_profile
        quarter = len(d) // 4
        assert np.mean(d[:quarter]) > 0.0, f"k={k:g}"
        assert np.mean(d[-quarter:]) < 0.0, f"k={k:g}"


def test_wobbling_gait_is_cheaper_than_compass_at_omega_two(sweep):
    compass_cot = baseline_row(sweep, 2.0)["cot"]
    cheaper = [
        r for r in column(sweep, 2.0)
        if r["status"] == "stable" and r["group"] in ("B", "C") and r["cot"] is not None and r["cot"] < compass_cot
    ]
    assert cheaper, f"no stable B or C gait below the compass CoT {compass_cot:.4f}"


def test_wobble_amplitude_is_physical(sweep):
    for k in REPRESENTATIVE:
        record = representative(sweep, k)
        assert record["status"] == "stable"
        assert 0.01 <= record["peak_wobble"] <= 0.15, f"k={k:g}: {record['peak_wobble']}"


def test_stable_range_widens_with_frequency(sweep):
    stable = {omega: [r["k"] for r in column(sweep, omega) if r["status"] == "stable"] for omega in (2.0, 3.0)}
    print(f"Stable k count: omega=2 {len(stable[2.0])}, omega=3 {len(stable[3.0])}")
    assert len(stable[3.0]) > len(stable[2.0])


def test_residual_and_contraction(representatives):
    for k, (cycle, _) in representatives.items():
        assert cycle.residual <= 1e-10
        assert cycle.stable
        rate = contraction_rate(cycle)
        assert abs(rate - cycle.max_abs_eigenvalue) <= 0.1 * cycle.max_abs_eigenvalue, f"k={k:g}: {rate}"


def test_fixed_point_holds_over_five_strides(spec, representatives):
    for k, (cycle, _) in representatives.items():
        z = cycle.fixed_point.as_array()
        points = iterate_map(z, 5, cycle.params, spec.sim)
        drift = float(np.max(np.abs(points[-1] - z)))
        assert drift <= 5.0 * max(cycle.residual, 1e-12), f"k={k:g}: {drift:.3e}"


def test_jacobian_is_insensitive_to_step(spec, representatives):
    for k, (cycle, _) in representatives.items():
        poincare = PoincareMap(create_walker(cycle.params), spec.sim)
        jacobian = map_jacobian(poincare, cycle.fixed_point.as_array(), step_scale=0.5 * spec.solver.jacobian_step_scale)
        halved = float(np.max(np.abs(np.linalg.eigvals(jacobian))))
        assert abs(halved - cycle.max_abs_eigenvalue) <= 1e-3, f"k={k:g}"


def test_small_wobble_cycle_matches_compass_cycle(sweep, spec):
    row = baseline_row(sweep, 3.0)
    compass = cycle_of(row, spec, kind="compass")
    alpha = 1e-8
    # Wobble frequency pi/T keeps the wobble half a cycle away from stride resonance.
    k = alpha * (math.pi / compass.period) ** 2
    params = compass.params.replace(alpha=alpha, k=k)
    guess = [*compass.fixed_point.as_array(), 0.0, 0.0]
    cycle = find_fixed_point(guess, params, spec.sim, spec.solver)
    theta_part = cycle.fixed_point.as_array()[:3]
    assert np.max(np.abs(theta_part - compass.fixed_point.as_array())) <= 1e-5
    assert cycle.period == pytest.approx(compass.period, abs=1e-5)


if __name__ == "__main__":
    pytest.main([__file__, "-v", "--runslow"])
