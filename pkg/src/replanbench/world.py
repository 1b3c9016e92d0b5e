"""Scenario definition, obstacle motion, robot kinematics, simulation clock.

A scenario document is UTF-8 JSON with top-level keys

    name, bounds, walls, obstacles, start, goal,
    robot_speed, robot_half_extent, cutoff_s, planning_budget_s

where rectangles are ``[min_x, min_y, max_x, max_y]`` and each obstacle entry
is ``{kind, rect, speed?, spawn_tick?, motion_seed?}`` with kind one of
static, moving, appearing. A moving obstacle without a pinned speed draws one
per trial, uniform in [0.10, 0.55] x robot_speed; direction is always drawn
per trial from the obstacle's motion stream. Speeds are in workspace units
per tick, one tick being TICK_SECONDS of simulated time.

The robot is treated as a point; every rectangle the robot (or a path) is
tested against is pre-inflated by robot_half_extent. Obstacle-vs-wall motion
uses the raw footprints.
"""
from __future__ import annotations

import json
import math
import random
from dataclasses import dataclass, replace
from importlib import resources
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .geom2d import Point2, Rect, TrialCounters, rects_array, slab_entry_params

__all__ = [
    "TICK_SECONDS",
    "ScenarioError",
    "ScenarioParseError",
    "ScenarioValidationError",
    "ObstacleSpec",
    "ObstacleState",
    "Scenario",
    "WorldState",
    "CollisionView",
    "load_scenario",
    "bundled_scenario_path",
    "initial_world",
    "update_world",
    "advance_robot",
    "robot_collides",
    "collision_view",
    "walk_polyline",
]

TICK_SECONDS = 0.05

OBSTACLE_KINDS = ("static", "moving", "appearing")
MIN_SPEED_FRACTION = 0.10
MAX_SPEED_FRACTION = 0.55


class ScenarioError(Exception):
    """Base class for scenario document problems."""


class ScenarioParseError(ScenarioError):
    """The document is not well-formed."""


class ScenarioValidationError(ScenarioError):
    """The document parsed but breaks an invariant; names the offending field."""

    def __init__(self, field: str, message: str):
        super().__init__(f"{field}: {message}")
        self.field = field


@dataclass(frozen=True)
class ObstacleSpec:
    """Spawn-time description of one obstacle (pre-inflation footprint)."""

    kind: str
    rect: Rect
    speed: float | None = None
    spawn_tick: int = 0
    motion_seed: int = 0


@dataclass(frozen=True)
class Scenario:
    name: str
    bounds: Rect
    walls: tuple[Rect, ...]
    obstacles: tuple[ObstacleSpec, ...]
    start: Point2
    goal: Point2
    robot_speed: float
    robot_half_extent: float
    cutoff_s: float
    planning_budget_s: float


@dataclass(frozen=True)
class ObstacleState:
    spec: ObstacleSpec
    rect: Rect
    vel: tuple[float, float]
    active: bool


@dataclass(frozen=True)
class WorldState:
    """One tick of the simulation; a plain value, cheap to snapshot."""

    scenario: Scenario
    tick: int
    robot: Point2
    obstacles: tuple[ObstacleState, ...]
    changed: tuple[int, ...]  # obstacle indices whose footprint changed in the last update

    @property
    def goal(self) -> Point2:
        return self.scenario.goal

    @property
    def bounds(self) -> Rect:
        return self.scenario.bounds


# ---------------------------------------------------------------------------
# scenario loading
# ---------------------------------------------------------------------------


def _parse_rect(value, field: str) -> Rect:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 4
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ScenarioValidationError(field, "expected [min_x, min_y, max_x, max_y]")
    x0, y0, x1, y1 = (float(v) for v in value)
    if not all(math.isfinite(v) for v in (x0, y0, x1, y1)):
        raise ScenarioValidationError(field, "coordinates must be finite")
    if x0 > x1 or y0 > y1:
        raise ScenarioValidationError(field, "min corner exceeds max corner")
    return Rect(Point2(x0, y0), Point2(x1, y1))


def _parse_point(value, field: str) -> Point2:
    if (
        not isinstance(value, (list, tuple))
        or len(value) != 2
        or not all(isinstance(v, (int, float)) for v in value)
    ):
        raise ScenarioValidationError(field, "expected [x, y]")
    x, y = float(value[0]), float(value[1])
    if not (math.isfinite(x) and math.isfinite(y)):
        raise ScenarioValidationError(field, "coordinates must be finite")
    return Point2(x, y)


def _parse_number(doc, field: str, positive: bool = True) -> float:
    v = doc.get(field)
    if not isinstance(v, (int, float)) or isinstance(v, bool):
        raise ScenarioValidationError(field, "expected a number")
    v = float(v)
    if positive and not (v > 0 and math.isfinite(v)):
        raise ScenarioValidationError(field, "must be a positive finite number")
    return v


def _rect_inside(inner: Rect, outer: Rect) -> bool:
    return (
        inner.lo.x >= outer.lo.x
        and inner.lo.y >= outer.lo.y
        and inner.hi.x <= outer.hi.x
        and inner.hi.y <= outer.hi.y
    )


def load_scenario(source) -> Scenario:
    """Parse and validate a scenario document.

    Accepts a filesystem path, a JSON string, or an already-decoded mapping.
    Raises ScenarioParseError for malformed documents and
    ScenarioValidationError (naming the field) for invariant breaches.
    """
    if isinstance(source, dict):
        doc = source
    else:
        if isinstance(source, Path) or (isinstance(source, str) and not source.lstrip().startswith("{")):
            try:
                text = Path(source).read_text(encoding="utf-8")
            except OSError as exc:
                raise ScenarioParseError(f"cannot read scenario file {source}: {exc}") from exc
        else:
            text = source
        try:
            doc = json.loads(text)
        except json.JSONDecodeError as exc:
            raise ScenarioParseError(f"malformed scenario document: {exc}") from exc
    if not isinstance(doc, dict):
        raise ScenarioParseError("scenario document must be a JSON object")

    name = doc.get("name")
    if not isinstance(name, str) or not name:
        raise ScenarioValidationError("name", "expected a non-empty string")
    bounds = _parse_rect(doc.get("bounds"), "bounds")
    if bounds.width <= 0 or bounds.height <= 0:
        raise ScenarioValidationError("bounds", "must have positive area")

    walls = []
    for i, w in enumerate(doc.get("walls", [])):
        rect = _parse_rect(w, f"walls[{i}]")
        if not _rect_inside(rect, bounds):
            raise ScenarioValidationError(f"walls[{i}]", "wall leaves the bounds")
        walls.append(rect)

    robot_speed = _parse_number(doc, "robot_speed")
    half_extent = _parse_number(doc, "robot_half_extent")
    cutoff_s = _parse_number(doc, "cutoff_s")
    planning_budget_s = _parse_number(doc, "planning_budget_s")

    obstacles = []
    for i, entry in enumerate(doc.get("obstacles", [])):
        field = f"obstacles[{i}]"
        if not isinstance(entry, dict):
            raise ScenarioValidationError(field, "expected an object")
        kind = entry.get("kind")
        if kind not in OBSTACLE_KINDS:
            raise ScenarioValidationError(f"{field}.kind", f"expected one of {OBSTACLE_KINDS}")
        rect = _parse_rect(entry.get("rect"), f"{field}.rect")
        if not _rect_inside(rect, bounds):
            raise ScenarioValidationError(f"{field}.rect", "obstacle leaves the bounds")
        speed = entry.get("speed")
        if speed is not None:
            if not isinstance(speed, (int, float)):
                raise ScenarioValidationError(f"{field}.speed", "expected a number")
            speed = float(speed)
            if kind != "moving":
                raise ScenarioValidationError(f"{field}.speed", "only moving obstacles have a speed")
            lo = MIN_SPEED_FRACTION * robot_speed
            hi = MAX_SPEED_FRACTION * robot_speed
            if not (lo <= speed <= hi):
                raise ScenarioValidationError(
                    f"{field}.speed", f"must lie in [{lo:.6g}, {hi:.6g}] (10%..55% of robot speed)"
                )
        spawn_tick = entry.get("spawn_tick", 0)
        if not isinstance(spawn_tick, int) or spawn_tick < 0:
            raise ScenarioValidationError(f"{field}.spawn_tick", "expected a non-negative integer")
        if spawn_tick and kind != "appearing":
            raise ScenarioValidationError(f"{field}.spawn_tick", "only appearing obstacles spawn late")
        motion_seed = entry.get("motion_seed", i)
        if not isinstance(motion_seed, int):
            raise ScenarioValidationError(f"{field}.motion_seed", "expected an integer")
        if kind == "moving":
            for j, wall in enumerate(walls):
                if rect.overlaps_open(wall):
                    raise ScenarioValidationError(f"{field}.rect", f"moving obstacle spawns inside walls[{j}]")
        obstacles.append(ObstacleSpec(kind, rect, speed, spawn_tick, motion_seed))

    start = _parse_point(doc.get("start"), "start")
    goal = _parse_point(doc.get("goal"), "goal")
    if start == goal:
        raise ScenarioValidationError("goal", "start and goal coincide")
    for label, p in (("start", start), ("goal", goal)):
        if not bounds.contains(p):
            raise ScenarioValidationError(label, "lies outside the bounds")
        for j, wall in enumerate(walls):
            if wall.inflated(half_extent).contains(p):
                raise ScenarioValidationError(label, f"lies inside walls[{j}] (inflated)")
        for j, spec in enumerate(obstacles):
            active_now = spec.kind != "appearing" or spec.spawn_tick <= 0
            if active_now and spec.rect.inflated(half_extent).contains(p):
                raise ScenarioValidationError(label, f"lies inside obstacles[{j}] at tick 0 (inflated)")

    return Scenario(
        name=name,
        bounds=bounds,
        walls=tuple(walls),
        obstacles=tuple(obstacles),
        start=start,
        goal=goal,
        robot_speed=robot_speed,
        robot_half_extent=half_extent,
        cutoff_s=cutoff_s,
        planning_budget_s=planning_budget_s,
    )


def bundled_scenario_path(name: str) -> Path:
    """Filesystem path of a scenario document shipped with the package."""
    res = resources.files("replanbench").joinpath("scenarios", f"{name}.scenario")
    with resources.as_file(res) as p:
        return Path(p)


# ---------------------------------------------------------------------------
# world evolution
# ---------------------------------------------------------------------------


def initial_world(scenario: Scenario, trial_seed: int = 0) -> WorldState:
    """Build the tick-0 world; per-trial motion draws come from trial_seed."""
    states = []
    for i, spec in enumerate(scenario.obstacles):
        if spec.kind == "moving":
            rng = random.Random(f"world:{trial_seed}:{i}:{spec.motion_seed}")
            speed = spec.speed
            if speed is None:
                speed = rng.uniform(MIN_SPEED_FRACTION, MAX_SPEED_FRACTION) * scenario.robot_speed
            angle = rng.uniform(0.0, 2.0 * math.pi)
            vel = (speed * math.cos(angle), speed * math.sin(angle))
            states.append(ObstacleState(spec, spec.rect, vel, True))
        elif spec.kind == "appearing":
            states.append(ObstacleState(spec, spec.rect, (0.0, 0.0), spec.spawn_tick <= 0))
        else:
            states.append(ObstacleState(spec, spec.rect, (0.0, 0.0), True))
    changed = tuple(i for i, s in enumerate(states) if s.active)
    return WorldState(scenario, 0, scenario.start, tuple(states), changed)


def _step_axis(lo: float, hi: float, v: float, b_lo: float, b_hi: float, faces_lo, faces_hi):
    """Advance one axis with specular reflection off bounds and wall faces.

    faces_lo are wall faces that block motion toward +axis (wall low edges),
    faces_hi block motion toward -axis. Returns (lo, hi, v).
    """
    if v == 0.0:
        return lo, hi, v
    n_lo, n_hi = lo + v, hi + v
    if v > 0.0:
        face = b_hi
        for f in faces_lo:
            if hi <= f < n_hi:
                face = min(face, f)
        if n_hi > face:
            over = n_hi - face
            n_lo -= 2.0 * over
            n_hi -= 2.0 * over
            v = -v
    else:
        face = b_lo
        for f in faces_hi:
            if n_lo < f <= lo:
                face = max(face, f)
        if n_lo < face:
            over = face - n_lo
            n_lo += 2.0 * over
            n_hi += 2.0 * over
            v = -v
    return n_lo, n_hi, v


def _overlaps_any(rect: Rect, walls: Sequence[Rect], bounds: Rect) -> bool:
    if not _rect_inside(rect, bounds):
        return True
    return any(rect.overlaps_open(w) for w in walls)


def _step_moving(rect: Rect, vel: tuple[float, float], bounds: Rect, walls: Sequence[Rect]):
    """One tick of motion with mirror reflection; falls back to staying put
    (velocity still flipped) when the mirrored position is itself blocked."""
    vx, vy = vel
    # x axis: walls whose y-span overlaps the obstacle's block horizontal motion
    faces_lo = [w.lo.x for w in walls if w.lo.y < rect.hi.y and w.hi.y > rect.lo.y]
    faces_hi = [w.hi.x for w in walls if w.lo.y < rect.hi.y and w.hi.y > rect.lo.y]
    x0, x1, nvx = _step_axis(rect.lo.x, rect.hi.x, vx, bounds.lo.x, bounds.hi.x, faces_lo, faces_hi)
    cand = Rect(Point2(x0, rect.lo.y), Point2(x1, rect.hi.y))
    if _overlaps_any(cand, walls, bounds):
        cand = rect
        nvx = -vx if nvx == vx else nvx
    # y axis, with the post-x footprint
    faces_lo = [w.lo.y for w in walls if w.lo.x < cand.hi.x and w.hi.x > cand.lo.x]
    faces_hi = [w.hi.y for w in walls if w.lo.x < cand.hi.x and w.hi.x > cand.lo.x]
    y0, y1, nvy = _step_axis(cand.lo.y, cand.hi.y, vy, bounds.lo.y, bounds.hi.y, faces_lo, faces_hi)
    cand2 = Rect(Point2(cand.lo.x, y0), Point2(cand.hi.x, y1))
    if _overlaps_any(cand2, walls, bounds):
        cand2 = cand
        nvy = -vy if nvy == vy else nvy
    return cand2, (nvx, nvy)


def update_world(w: WorldState) -> WorldState:
    """Advance the clock one tick: move movers, spawn due appearing obstacles."""
    tick = w.tick + 1
    scenario = w.scenario
    states = []
    changed = []
    for i, st in enumerate(w.obstacles):
        if st.spec.kind == "moving":
            rect, vel = _step_moving(st.rect, st.vel, scenario.bounds, scenario.walls)
            states.append(replace(st, rect=rect, vel=vel))
            changed.append(i)
        elif st.spec.kind == "appearing" and not st.active and st.spec.spawn_tick == tick:
            states.append(replace(st, active=True))
            changed.append(i)
        else:
            states.append(st)
    return WorldState(scenario, tick, w.robot, tuple(states), tuple(changed))


def walk_polyline(points: Sequence[Point2], dist: float) -> tuple[Point2, int]:
    """Move dist along the polyline from points[0].

    Returns the final position and the index i of the segment (i, i+1) it lies
    on; fully consumed vertices advance i, and running past the end clamps to
    the last point with i = len(points) - 2.
    """
    i = 0
    pos = points[0]
    remaining = dist
    while i < len(points) - 1:
        seg_len = math.hypot(points[i + 1].x - pos.x, points[i + 1].y - pos.y)
        if remaining < seg_len:
            t = remaining / seg_len
            pos = Point2(pos.x + (points[i + 1].x - pos.x) * t, pos.y + (points[i + 1].y - pos.y) * t)
            return pos, i
        remaining -= seg_len
        pos = points[i + 1]
        i += 1
    return pos, max(0, len(points) - 2)


def advance_robot(w: WorldState, path: Sequence[Point2]) -> WorldState:
    """Move the robot along path by at most robot_speed for one tick.

    The path must start at the current robot position; reaching a vertex with
    budget left continues onto the next segment, and the terminal vertex
    clamps the motion.
    """
    if not path or path[0] != w.robot:
        raise ValueError("path must start at the current robot position")
    pos, _ = walk_polyline(path, w.scenario.robot_speed)
    return replace(w, robot=pos)


def _active_inflated_rects(w: WorldState) -> list[Rect]:
    margin = w.scenario.robot_half_extent
    rects = [wall.inflated(margin) for wall in w.scenario.walls]
    rects.extend(st.rect.inflated(margin) for st in w.obstacles if st.active)
    return rects


def robot_collides(w: WorldState) -> bool:
    """True iff the robot point is inside any active inflated footprint."""
    return any(r.contains(w.robot) for r in _active_inflated_rects(w))


# ---------------------------------------------------------------------------
# collision view: the instrumented feasibility kernel for one tick
# ---------------------------------------------------------------------------


def _slab_entry_scalar(ax: float, ay: float, bx: float, by: float, row) -> float | None:
    """Scalar slab clip against one closed rect row (x0, y0, x1, y1)."""
    x0, y0, x1, y1 = row
    dx = bx - ax
    dy = by - ay
    if dx != 0.0:
        ta = (x0 - ax) / dx
        tb = (x1 - ax) / dx
        if ta <= tb:
            t_lo, t_hi = ta, tb
        else:
            t_lo, t_hi = tb, ta
    elif x0 <= ax <= x1:
        t_lo, t_hi = -math.inf, math.inf
    else:
        return None
    if dy != 0.0:
        ta = (y0 - ay) / dy
        tb = (y1 - ay) / dy
        if ta > tb:
            ta, tb = tb, ta
        if ta > t_lo:
            t_lo = ta
        if tb < t_hi:
            t_hi = tb
    elif not (y0 <= ay <= y1):
        return None
    if t_lo < 0.0:
        t_lo = 0.0
    if t_hi > 1.0:
        t_hi = 1.0
    return t_lo if t_lo <= t_hi else None


class CollisionView:
    """Active inflated footprints at one tick, bound to one trial's counters.

    Every elementary (segment, rect) kernel test increments collision_checks
    by exactly one; point containment queries are free. Single-segment
    queries run a scalar early-out loop; tree-sized sweeps use the vectorized
    kernel. Both compute the identical slab clip.
    """

    def __init__(self, rects: np.ndarray, changed_rows: np.ndarray, bounds: Rect, counters: TrialCounters):
        self._rects = rects
        self._changed = changed_rows
        self._rows = [tuple(r) for r in rects.tolist()]
        self.bounds = bounds
        self.counters = counters

    @property
    def rect_count(self) -> int:
        return int(self._rects.shape[0])

    @property
    def changed_count(self) -> int:
        return int(self._changed.shape[0])

    def segment_free(self, a: Point2, b: Point2) -> bool:
        ax, ay, bx, by = a.x, a.y, b.x, b.y
        tested = 0
        hit = False
        for row in self._rows:
            tested += 1
            if _slab_entry_scalar(ax, ay, bx, by, row) is not None:
                hit = True
                break
        self.counters.collision_checks += tested
        return not hit

    def first_hit(self, a: Point2, b: Point2) -> float | None:
        """Earliest entry parameter along a->b over all footprints, or None."""
        ax, ay, bx, by = a.x, a.y, b.x, b.y
        self.counters.collision_checks += len(self._rows)
        best = None
        for row in self._rows:
            t = _slab_entry_scalar(ax, ay, bx, by, row)
            if t is not None and (best is None or t < best):
                best = t
        return best

    def point_free(self, p: Point2) -> bool:
        x, y = p.x, p.y
        for x0, y0, x1, y1 in self._rows:
            if x0 <= x <= x1 and y0 <= y <= y1:
                return False
        return True

    def _segments_hit(self, ax, ay, bx, by, rects: np.ndarray) -> np.ndarray:
        n = ax.shape[0]
        if rects.shape[0] == 0 or n == 0:
            return np.zeros(n, dtype=bool)
        self.counters.collision_checks += n * rects.shape[0]
        t = slab_entry_params(ax[:, None], ay[:, None], bx[:, None], by[:, None], rects)
        return np.any(~np.isnan(t), axis=1)

    def segments_hit_any(self, ax, ay, bx, by) -> np.ndarray:
        """Bulk test n segments against every footprint; True where blocked."""
        return self._segments_hit(ax, ay, bx, by, self._rects)

    def segments_hit_changed(self, ax, ay, bx, by) -> np.ndarray:
        """Bulk test n segments against only the footprints that changed this tick."""
        return self._segments_hit(ax, ay, bx, by, self._changed)

    def points_in_changed(self, xs, ys) -> np.ndarray:
        r = self._changed
        if r.shape[0] == 0 or xs.shape[0] == 0:
            return np.zeros(xs.shape[0], dtype=bool)
        inside = (
            (r[None, :, 0] <= xs[:, None])
            & (xs[:, None] <= r[None, :, 2])
            & (r[None, :, 1] <= ys[:, None])
            & (ys[:, None] <= r[None, :, 3])
        )
        return np.any(inside, axis=1)


def collision_view(w: WorldState, counters: TrialCounters) -> CollisionView:
    """Build the instrumented feasibility view for the current tick."""
    margin = w.scenario.robot_half_extent
    rows = [wall.inflated(margin) for wall in w.scenario.walls]
    changed_set = set(w.changed)
    changed_rows = []
    for i, st in enumerate(w.obstacles):
        if not st.active:
            continue
        infl = st.rect.inflated(margin)
        rows.append(infl)
        if i in changed_set:
            changed_rows.append(infl)
    return CollisionView(rects_array(rows), rects_array(changed_rows), w.bounds, counters)
