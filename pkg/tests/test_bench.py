import math
import xml.etree.ElementTree as ET

import pytest

from replanbench.bench import (
    RAW_HEADER,
    SUMMARY_HEADER,
    BatchSummary,
    emit_csv,
    emit_trace_svg,
    parse_raw_csv,
    run_batch,
    run_trial,
    run_trial_traced,
    summarize,
)
from replanbench.world import bundled_scenario_path, load_scenario


def small_scenario(**overrides):
    doc = {
        "name": "small",
        "bounds": [0, 0, 30, 30],
        "walls": [],
        "obstacles": [],
        "start": [2, 2],
        "goal": [28, 28],
        "robot_speed": 1.0,
        "robot_half_extent": 1.0,
        "cutoff_s": 20.0,
        "planning_budget_s": 0.05,
    }
    doc.update(overrides)
    return load_scenario(doc)


SEALED = {
    "walls": [[10, 10, 20, 11], [10, 19, 20, 20], [10, 11, 11, 19], [19, 11, 20, 19]],
    "goal": [15, 15],
    "cutoff_s": 5.0,
}


# ---------------------------------------------------------------------------
# run_trial
# ---------------------------------------------------------------------------


@pytest.mark.parametrize("algo", ["multistage", "drrt", "mprrt"])
def test_trial_succeeds_on_empty_map(algo):
    m = run_trial(small_scenario(), algo, seed=0)
    assert m.success
    assert m.sim_time_s <= 20.0
    assert m.collision_checks >= 0 and m.nn_lookups >= 0


@pytest.mark.parametrize("algo", ["multistage", "drrt"])
def test_trial_fails_at_cutoff_when_goal_sealed(algo):
    sc = small_scenario(**SEALED)
    m = run_trial(sc, algo, seed=0)
    assert not m.success
    assert m.sim_time_s == pytest.approx(sc.cutoff_s)


def test_trial_determinism_bitwise():
    sc = small_scenario(
        obstacles=[{"kind": "moving", "rect": [14, 14, 16, 16], "motion_seed": 3}]
    )
    a = run_trial(sc, "multistage", seed=11)
    b = run_trial(sc, "multistage", seed=11)
    assert a == b  # includes sim_time_s and modeled wall_time_s


def test_unknown_algorithm_rejected():
    with pytest.raises(ValueError):
        run_trial(small_scenario(), "dijkstra", seed=0)


def test_paired_seeds_share_world_trajectories():
    sc = small_scenario(
        obstacles=[{"kind": "moving", "rect": [14, 14, 16, 16], "motion_seed": 3}]
    )
    _, tr_a = run_trial_traced(sc, "multistage", seed=5, trace_stride=7)
    _, tr_b = run_trial_traced(sc, "drrt", seed=5, trace_stride=7)
    shared = min(len(tr_a.obstacle_frames), len(tr_b.obstacle_frames))
    assert shared >= 2
    for (tick_a, rects_a), (tick_b, rects_b) in zip(
        tr_a.obstacle_frames[:shared], tr_b.obstacle_frames[:shared]
    ):
        if tick_a != tick_b:
            break  # different trial lengths sample different final frames
        assert [r.as_row() for r in rects_a] == [r.as_row() for r in rects_b]


# ---------------------------------------------------------------------------
# batches
# ---------------------------------------------------------------------------


def test_batch_of_one_matches_single_trial():
    sc = small_scenario()
    trials, summaries = run_batch(sc, ["drrt"], 1, base_seed=9)
    single = run_trial(sc, "drrt", seed=9)
    assert trials == [single]
    s = summaries[0]
    assert s.runs == 1
    assert s.success_pct == 100.0
    assert s.mean_collision_checks == single.collision_checks
    assert s.mean_time_s == single.sim_time_s


def test_parallel_batch_equals_serial():
    sc = small_scenario(
        obstacles=[{"kind": "moving", "rect": [14, 14, 16, 16], "motion_seed": 1}]
    )
    serial, _ = run_batch(sc, ["multistage", "drrt"], 3, base_seed=0, workers=1)
    parallel, _ = run_batch(sc, ["multistage", "drrt"], 3, base_seed=0, workers=2)
    assert serial == parallel


def test_summary_means_cover_successful_runs_only():
    rows = [
        # two successes and one failure for one algorithm
        _metrics("drrt", seed=0, success=True, cc=100, nn=10, sim=2.0),
        _metrics("drrt", seed=1, success=False, cc=999_999, nn=9999, sim=20.0),
        _metrics("drrt", seed=2, success=True, cc=300, nn=30, sim=4.0),
    ]
    s = summarize(rows, "drrt", "small")
    assert s.success_pct == pytest.approx(100.0 * 2 / 3)
    assert s.mean_collision_checks == pytest.approx(200.0)
    assert s.mean_nn_lookups == pytest.approx(20.0)
    assert s.mean_time_s == pytest.approx(3.0)


def _metrics(algo, seed, success, cc, nn, sim):
    from replanbench.bench import TrialMetrics

    return TrialMetrics(
        algorithm=algo,
        scenario="small",
        seed=seed,
        success=success,
        collision_checks=cc,
        nn_lookups=nn,
        sim_time_s=sim,
        wall_time_s=sim / 10.0,
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def test_raw_csv_roundtrip(tmp_path):
    sc = small_scenario()
    trials, _ = run_batch(sc, ["drrt", "multistage"], 2, base_seed=4)
    dest = tmp_path / "raw.csv"
    emit_csv(trials, dest)
    text = dest.read_text().splitlines()
    assert text[0] == RAW_HEADER
    assert len(text) == 1 + len(trials)
    assert parse_raw_csv(dest) == trials


def test_summary_csv_shape(tmp_path):
    summaries = [
        BatchSummary("multistage", "small", 4, 75.0, 120.5, 10.0, 3.25),
        BatchSummary("drrt", "small", 4, 100.0, 500.0, 80.0, 6.5),
        BatchSummary("mprrt", "small", 4, 100.0, 600.0, 90.0, 7.5),
    ]
    dest = tmp_path / "summary.csv"
    emit_csv(summaries, dest)
    lines = dest.read_text().splitlines()
    assert lines[0] == SUMMARY_HEADER
    assert len(lines) == 4


def test_emit_csv_rejects_empty(tmp_path):
    with pytest.raises(ValueError):
        emit_csv([], tmp_path / "x.csv")


# ---------------------------------------------------------------------------
# counter plumbing: reported checks equal kernel invocations
# ---------------------------------------------------------------------------


def test_collision_counter_matches_kernel_invocations(monkeypatch):
    import replanbench.world as world_mod

    pair_tests = 0

    real_scalar = world_mod._slab_entry_scalar
    real_batch = world_mod.slab_entry_params

    def shadow_scalar(ax, ay, bx, by, row):
        nonlocal pair_tests
        pair_tests += 1
        return real_scalar(ax, ay, bx, by, row)

    def shadow_batch(ax, ay, bx, by, rects):
        nonlocal pair_tests
        out = real_batch(ax, ay, bx, by, rects)
        pair_tests += out.size
        return out

    monkeypatch.setattr(world_mod, "_slab_entry_scalar", shadow_scalar)
    monkeypatch.setattr(world_mod, "slab_entry_params", shadow_batch)

    sc = small_scenario(
        obstacles=[
            {"kind": "moving", "rect": [14, 14, 16, 16], "motion_seed": 1},
            {"kind": "static", "rect": [20, 8, 24, 12]},
        ]
    )
    for algo in ("multistage", "drrt", "mprrt"):
        pair_tests = 0
        m = run_trial(sc, algo, seed=2)
        assert m.collision_checks == pair_tests


# ---------------------------------------------------------------------------
# SVG traces
# ---------------------------------------------------------------------------


def test_trace_svg_well_formed_empty_map(tmp_path):
    sc = small_scenario()
    _, trace = run_trial_traced(sc, "multistage", seed=0)
    dest = tmp_path / "trace.svg"
    emit_trace_svg(trace, dest)
    root = ET.parse(dest).getroot()
    assert root.tag.endswith("svg")
    ns = {"s": "http://www.w3.org/2000/svg"}
    assert root.findall(".//s:g[@id='robot-trajectory']/s:polyline", ns)
    assert root.findall(".//s:g[@id='walls']", ns)


def test_trace_svg_obstacle_glyph_counts(tmp_path):
    sc = load_scenario(bundled_scenario_path("dynamic"))
    _, trace = run_trial_traced(sc, "drrt", seed=0, trace_stride=100)
    dest = tmp_path / "dyn.svg"
    emit_trace_svg(trace, dest)
    root = ET.parse(dest).getroot()
    ns = {"s": "http://www.w3.org/2000/svg"}
    frames = root.findall(".//s:g[@id='obstacles']/s:g", ns)
    assert frames
    for frame in frames:
        assert len(frame.findall("s:rect", ns)) == 30
