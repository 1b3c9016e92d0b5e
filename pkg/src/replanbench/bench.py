"""Benchmark harness: seeded trials, paired batches, CSV output, SVG traces.

One trial alternates a world update with one planner tick until the robot is
within its half-extent of the goal or the scenario cutoff elapses. Planning
budgets are metered in iterations (planning_budget_s times iters_per_second)
rather than wall-clock so that a (scenario, algorithm, seed) triple replays
bit-identically; wall_time_s in the metrics is the modeled planning time
actually consumed (iterations / iters_per_second), which keeps every CSV
column machine-independent. sim_time_s, elapsed simulated time to the goal,
is the paper-comparable time metric.
"""
from __future__ import annotations

import math
import random
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable, Sequence

from .geom2d import Point2, Rect, TrialCounters, distance
from .multistage import MultiStagePlanner
from .replanners import DrrtPlanner, MpRrtPlanner
from .world import (
    TICK_SECONDS,
    Scenario,
    WorldState,
    advance_robot,
    initial_world,
    update_world,
)

__all__ = [
    "ALGORITHMS",
    "DEFAULT_ITERS_PER_SECOND",
    "TrialMetrics",
    "BatchSummary",
    "TrialTrace",
    "run_trial",
    "run_trial_traced",
    "run_batch",
    "summarize",
    "emit_csv",
    "parse_raw_csv",
    "emit_trace_svg",
    "RAW_HEADER",
    "SUMMARY_HEADER",
]

DEFAULT_ITERS_PER_SECOND = 4000.0

RAW_HEADER = "algorithm,scenario,seed,success,coll_checks,nn_lookups,sim_time_s,wall_time_s"
SUMMARY_HEADER = "algorithm,scenario,runs,success_pct,coll_checks,nearest_neigh,time_s"

ALGORITHMS = {
    "multistage": MultiStagePlanner,
    "drrt": DrrtPlanner,
    "mprrt": MpRrtPlanner,
}


@dataclass(frozen=True)
class TrialMetrics:
    """Frozen per-trial measurements (the columns of the raw CSV)."""

    algorithm: str
    scenario: str
    seed: int
    success: bool
    collision_checks: int
    nn_lookups: int
    sim_time_s: float
    wall_time_s: float


@dataclass(frozen=True)
class BatchSummary:
    """Per-algorithm aggregate; counter and time means cover successful runs."""

    algorithm: str
    scenario: str
    runs: int
    success_pct: float
    mean_collision_checks: float
    mean_nn_lookups: float
    mean_time_s: float


@dataclass
class TrialTrace:
    """Replay data for rendering: walls, sampled obstacle frames, robot track."""

    scenario: Scenario
    algorithm: str
    seed: int
    success: bool
    robot_track: list[Point2]
    obstacle_frames: list[tuple[int, list[Rect]]]
    final_path: list[Point2] | None


def make_planner(algorithm: str, scenario: Scenario, rng: random.Random, counters: TrialCounters):
    try:
        factory = ALGORITHMS[algorithm]
    except KeyError:
        raise ValueError(f"unknown algorithm {algorithm!r}; expected one of {sorted(ALGORITHMS)}") from None
    return factory(scenario, rng, counters)


def _run(
    scenario: Scenario,
    algorithm: str,
    seed: int,
    iters_per_second: float,
    recorder: TrialTrace | None,
    trace_stride: int,
) -> TrialMetrics:
    counters = TrialCounters()
    rng = random.Random(f"planner:{seed}")
    planner = make_planner(algorithm, scenario, rng, counters)
    world = initial_world(scenario, trial_seed=seed)
    budget = max(1, round(scenario.planning_budget_s * iters_per_second))
    max_ticks = max(1, math.ceil(scenario.cutoff_s / TICK_SECONDS))
    reach = scenario.robot_half_extent

    def record(w: WorldState, force: bool = False) -> None:
        if recorder is None:
            return
        recorder.robot_track.append(w.robot)
        if force or w.tick % trace_stride == 0:
            rects = [st.rect for st in w.obstacles if st.active]
            recorder.obstacle_frames.append((w.tick, rects))

    record(world, force=True)
    success = distance(world.robot, scenario.goal) <= reach
    last_path = None
    while not success and world.tick < max_ticks:
        world = update_world(world)
        outcome = planner.tick(world, budget)
        if outcome.path is not None:
            last_path = outcome.path
        if outcome.moved:
            world = advance_robot(world, outcome.path)
        record(world)
        success = distance(world.robot, scenario.goal) <= reach

    if recorder is not None:
        recorder.success = success
        recorder.final_path = last_path
        record(world, force=True)

    sim_time = world.tick * TICK_SECONDS
    wall_time = counters.iterations / iters_per_second
    return TrialMetrics(
        algorithm=algorithm,
        scenario=scenario.name,
        seed=seed,
        success=success,
        collision_checks=counters.collision_checks,
        nn_lookups=counters.nn_lookups,
        sim_time_s=sim_time,
        wall_time_s=wall_time,
    )


def run_trial(
    scenario: Scenario,
    algorithm: str,
    seed: int,
    iters_per_second: float = DEFAULT_ITERS_PER_SECOND,
) -> TrialMetrics:
    """Execute one seeded trial; deterministic for a fixed argument triple."""
    return _run(scenario, algorithm, seed, iters_per_second, None, 0)


def run_trial_traced(
    scenario: Scenario,
    algorithm: str,
    seed: int,
    iters_per_second: float = DEFAULT_ITERS_PER_SECOND,
    trace_stride: int = 25,
) -> tuple[TrialMetrics, TrialTrace]:
    """run_trial plus replay data for emit_trace_svg."""
    trace = TrialTrace(scenario, algorithm, seed, False, [], [], None)
    metrics = _run(scenario, algorithm, seed, iters_per_second, trace, trace_stride)
    return metrics, trace


def _batch_job(args) -> TrialMetrics:
    scenario, algorithm, seed, ips = args
    return run_trial(scenario, algorithm, seed, ips)


def run_batch(
    scenario: Scenario,
    algorithms: Sequence[str],
    n_runs: int,
    base_seed: int = 0,
    workers: int = 1,
    iters_per_second: float = DEFAULT_ITERS_PER_SECOND,
) -> tuple[list[TrialMetrics], list[BatchSummary]]:
    """Paired-seed batch: trial i of every algorithm runs with base_seed + i."""
    if n_runs < 1:
        raise ValueError("n_runs must be >= 1")
    for a in algorithms:
        if a not in ALGORITHMS:
            raise ValueError(f"unknown algorithm {a!r}")
    jobs = [(scenario, a, base_seed + i, iters_per_second) for a in algorithms for i in range(n_runs)]
    if workers > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            trials = list(pool.map(_batch_job, jobs, chunksize=1))
    else:
        trials = [_batch_job(j) for j in jobs]
    summaries = [summarize(trials, a, scenario.name) for a in algorithms]
    return trials, summaries


def summarize(trials: Iterable[TrialMetrics], algorithm: str, scenario_name: str) -> BatchSummary:
    rows = [t for t in trials if t.algorithm == algorithm and t.scenario == scenario_name]
    if not rows:
        raise ValueError(f"no trials for {algorithm} on {scenario_name}")
    ok = [t for t in rows if t.success]

    def mean(vals):
        return sum(vals) / len(vals) if vals else float("nan")

    return BatchSummary(
        algorithm=algorithm,
        scenario=scenario_name,
        runs=len(rows),
        success_pct=100.0 * len(ok) / len(rows),
        mean_collision_checks=mean([t.collision_checks for t in ok]),
        mean_nn_lookups=mean([t.nn_lookups for t in ok]),
        mean_time_s=mean([t.sim_time_s for t in ok]),
    )


# ---------------------------------------------------------------------------
# CSV
# ---------------------------------------------------------------------------


def _raw_row(t: TrialMetrics) -> str:
    return ",".join(
        [
            t.algorithm,
            t.scenario,
            str(t.seed),
            "1" if t.success else "0",
            str(t.collision_checks),
            str(t.nn_lookups),
            repr(t.sim_time_s),
            repr(t.wall_time_s),
        ]
    )


def _summary_row(s: BatchSummary) -> str:
    return ",".join(
        [
            s.algorithm,
            s.scenario,
            str(s.runs),
            repr(s.success_pct),
            repr(s.mean_collision_checks),
            repr(s.mean_nn_lookups),
            repr(s.mean_time_s),
        ]
    )


def emit_csv(records: Sequence[TrialMetrics] | Sequence[BatchSummary], dest) -> None:
    """Write raw trials or batch summaries as CSV (header plus one row each)."""
    records = list(records)
    if not records:
        raise ValueError("nothing to write")
    if isinstance(records[0], TrialMetrics):
        lines = [RAW_HEADER] + [_raw_row(t) for t in records]
    else:
        lines = [SUMMARY_HEADER] + [_summary_row(s) for s in records]
    Path(dest).write_text("\n".join(lines) + "\n", encoding="utf-8")


def parse_raw_csv(src) -> list[TrialMetrics]:
    """Exact inverse of emit_csv for raw trials."""
    text = Path(src).read_text(encoding="utf-8")
    lines = [ln for ln in text.splitlines() if ln]
    if not lines or lines[0] != RAW_HEADER:
        raise ValueError(f"not a raw trial CSV (expected header {RAW_HEADER!r})")
    out = []
    for ln in lines[1:]:
        algo, scen, seed, ok, cc, nn, sim_t, wall_t = ln.split(",")
        out.append(
            TrialMetrics(
                algorithm=algo,
                scenario=scen,
                seed=int(seed),
                success=ok == "1",
                collision_checks=int(cc),
                nn_lookups=int(nn),
                sim_time_s=float(sim_t),
                wall_time_s=float(wall_t),
            )
        )
    return out


# ---------------------------------------------------------------------------
# SVG trace rendering
# ---------------------------------------------------------------------------


def _svg_rect(r: Rect, style: str) -> str:
    return (
        f'<rect x="{r.lo.x:.3f}" y="{r.lo.y:.3f}" width="{r.width:.3f}" '
        f'height="{r.height:.3f}" style="{style}"/>'
    )


def _svg_polyline(points: Sequence[Point2], style: str) -> str:
    coords = " ".join(f"{p.x:.3f},{p.y:.3f}" for p in points)
    return f'<polyline points="{coords}" style="{style}"/>'


def emit_trace_svg(trace: TrialTrace, dest) -> None:
    """Render a recorded trial: walls, sampled obstacle frames, robot track, final path."""
    b = trace.scenario.bounds
    pad = max(b.width, b.height) * 0.02
    parts = []
    parts.append('<?xml version="1.0" encoding="UTF-8"?>')
    parts.append(
        f'<svg xmlns="http://www.w3.org/2000/svg" version="1.1" '
        f'viewBox="{b.lo.x - pad:.3f} {b.lo.y - pad:.3f} {b.width + 2 * pad:.3f} {b.height + 2 * pad:.3f}" '
        f'width="800" height="800">'
    )
    # workspace y grows upward; flip into SVG screen coordinates
    parts.append(f'<g transform="translate(0,{(b.lo.y + b.hi.y):.3f}) scale(1,-1)">')
    parts.append(_svg_rect(b, "fill:white;stroke:black;stroke-width:0.3"))
    parts.append('<g id="walls">')
    for w in trace.scenario.walls:
        parts.append(_svg_rect(w, "fill:#444444;stroke:none"))
    parts.append("</g>")
    n_frames = max(1, len(trace.obstacle_frames))
    parts.append('<g id="obstacles">')
    for k, (tick, rects) in enumerate(trace.obstacle_frames):
        opacity = 0.15 + 0.55 * (k / max(1, n_frames - 1)) if n_frames > 1 else 0.6
        parts.append(f'<g class="frame" data-tick="{tick}">')
        for r in rects:
            parts.append(_svg_rect(r, f"fill:#3060c0;fill-opacity:{opacity:.3f};stroke:none"))
        parts.append("</g>")
    parts.append("</g>")
    if trace.final_path:
        parts.append('<g id="final-path">')
        parts.append(
            _svg_polyline(
                trace.final_path,
                "fill:none;stroke:#d02020;stroke-width:0.5;stroke-dasharray:1.5,1",
            )
        )
        parts.append("</g>")
    if trace.robot_track:
        parts.append('<g id="robot-trajectory">')
        parts.append(_svg_polyline(trace.robot_track, "fill:none;stroke:#10a010;stroke-width:0.6"))
        parts.append("</g>")
    parts.append("</g>")
    parts.append("</svg>")
    Path(dest).write_text("\n".join(parts) + "\n", encoding="utf-8")
