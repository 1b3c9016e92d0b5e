"""Multi-stage planner: tree bootstrap, local repair, greedy shortening.

The planner finds one initial path with bidirectional tree growth and never
plans globally again. From then on each tick spends its budget repairing the
first blocked segment with two randomized local edits:

* the detour edit inserts two new consecutive points, offsetting both
  endpoints of the blocked segment by one shared random deviation along one
  random axis (a square detour around the blocking box); when the full detour
  does not fit, the second new point is dropped and the first is kept if the
  two segments it creates are clear;
* the point edit moves the near endpoint of the blocked segment by an
  independent random offset per axis, accepted only when both incident
  segments are clear.

After the repair loop a greedy shortcut pass deletes any interior point whose
removal keeps the path collision-free. The robot is cleared to move while the
stretch of path it will cover this tick is clear: a blockage further ahead is
repair work, not a reason to stop, and the robot simply waits in front of an
obstacle parked on its next stride until the repair succeeds or the obstacle
moves on.
"""
from __future__ import annotations

import random
from dataclasses import dataclass

from .geom2d import Point2, TrialCounters, point_in_rect
from .replanners import PlannerTickOutcome
from .rrt import GOAL_BIAS, Tree, grow_bidirectional
from .world import CollisionView, Scenario, WorldState, collision_view, robot_collides, walk_polyline

__all__ = [
    "RepairConfig",
    "first_blocked_segment",
    "path_cost",
    "arc_detour",
    "mutate_point",
    "greedy_shortcut",
    "MultiStagePlanner",
]


@dataclass
class RepairConfig:
    """Knobs for the local repair operators.

    vicinity bounds the uniform offset draws; keep_partial_detour keeps the
    first new detour point when the full square detour fails (the alternative
    reading rejects the whole edit); shortcut_when_blocked runs the greedy
    pass even while the path is still blocked.
    """

    vicinity: float
    max_repair_iters: int = 10_000
    keep_partial_detour: bool = True
    shortcut_when_blocked: bool = True


def first_blocked_segment(path: list[Point2], view: CollisionView) -> int | None:
    """Index of the blocked segment nearest the robot, or None when clear."""
    for i in range(len(path) - 1):
        if not view.segment_free(path[i], path[i + 1]):
            return i
    return None


def path_cost(path: list[Point2]) -> int:
    """Point count; among similar paths, fewer points means shorter."""
    return len(path)


def _in_bounds(p: Point2, view: CollisionView) -> bool:
    return point_in_rect(p, view.bounds)


def arc_detour(
    path: list[Point2], i: int, rng: random.Random, view: CollisionView, cfg: RepairConfig
) -> list[Point2]:
    """Try a square detour around whatever blocks segment i.

    Draws one deviation in (-vicinity, vicinity) and one axis, offsets both
    segment endpoints by it, and inserts the new points when validated.
    Returns the (possibly unchanged) path; endpoints before index i are never
    touched.
    """
    dev = rng.uniform(-cfg.vicinity, cfg.vicinity)
    along_x = rng.randrange(2) == 0
    p1, p2 = path[i], path[i + 1]
    if along_x:
        n1 = Point2(p1.x + dev, p1.y)
        n2 = Point2(p2.x + dev, p2.y)
    else:
        n1 = Point2(p1.x, p1.y + dev)
        n2 = Point2(p2.x, p2.y + dev)
    if not _in_bounds(n1, view):
        return path
    leg1 = view.segment_free(p1, n1)
    if leg1 and _in_bounds(n2, view) and view.segment_free(n1, n2) and view.segment_free(n2, p2):
        return path[: i + 1] + [n1, n2] + path[i + 1 :]
    if cfg.keep_partial_detour and leg1 and view.segment_free(n1, p2):
        return path[: i + 1] + [n1] + path[i + 1 :]
    return path


def mutate_point(
    path: list[Point2], i: int, rng: random.Random, view: CollisionView, cfg: RepairConfig
) -> list[Point2]:
    """Move the near endpoint of blocked segment i to a random nearby spot.

    Both coordinates shift independently within the vicinity; the move is
    accepted only when the two segments incident to the moved point are
    clear. The robot's own position (index 0) is never edited; the edit
    shifts to index 1 in that case. Endpoints of the path stay fixed.
    """
    j = i if i > 0 else 1
    if j >= len(path) - 1:
        return path
    cand = Point2(
        path[j].x + rng.uniform(-cfg.vicinity, cfg.vicinity),
        path[j].y + rng.uniform(-cfg.vicinity, cfg.vicinity),
    )
    if not _in_bounds(cand, view):
        return path
    if view.segment_free(path[j - 1], cand) and view.segment_free(cand, path[j + 1]):
        return path[:j] + [cand] + path[j + 1 :]
    return path


def greedy_shortcut(path: list[Point2], view: CollisionView) -> list[Point2]:
    """Delete interior points whose removal keeps the path clear.

    Forward sweeps (skip test i -> i+2, delete i+1 and stay on success) repeat
    until one sweep deletes nothing: a deletion can unlock a skip behind the
    sweep index, and stopping at the single-sweep result would not be
    idempotent. Endpoints are never touched.
    """
    pts = list(path)
    changed = True
    while changed:
        changed = False
        i = 0
        while i < len(pts) - 2:
            if view.segment_free(pts[i], pts[i + 2]):
                del pts[i + 1]
                changed = True
            else:
                i += 1
    return pts


class MultiStagePlanner:
    """Bootstrap once with trees, then repair and shorten the held path."""

    algorithm = "multistage"

    def __init__(
        self,
        scenario: Scenario,
        rng: random.Random,
        counters: TrialCounters,
        cfg: RepairConfig | None = None,
        goal_bias: float = GOAL_BIAS,
    ):
        self.scenario = scenario
        self.rng = rng
        self.counters = counters
        self.cfg = cfg if cfg is not None else RepairConfig(vicinity=4.0 * scenario.robot_half_extent)
        self.goal_bias = goal_bias
        self.path: list[Point2] | None = None
        self._t_init: Tree | None = Tree(scenario.start, counters)
        self._t_goal: Tree | None = Tree(scenario.goal, counters)
        self._last_path: list[Point2] | None = None
        self._last_robot: Point2 = scenario.start
        self.repair_edits = 0

    def _sync_robot(self, world: WorldState) -> None:
        """Rebase the path head onto the robot after last tick's motion."""
        robot = world.robot
        if self.path is None or robot == self._last_robot or self._last_path is None:
            self._last_robot = robot
            return
        pos, seg_idx = walk_polyline(self._last_path, self.scenario.robot_speed)
        if pos == robot:
            rebased = [robot] + self._last_path[seg_idx + 1 :]
        else:
            # motion we did not predict: re-anchor and let feasibility sort it out
            rebased = [robot] + self.path
        if len(rebased) == 1:
            rebased.append(self.path[-1])
        self.path = rebased
        self._last_robot = robot

    def _stride_clear(self, view: CollisionView) -> bool:
        """Is the stretch the robot will walk this tick collision-free?"""
        path = self.path
        end, seg_idx = walk_polyline(path, self.scenario.robot_speed)
        for k in range(seg_idx):
            if not view.segment_free(path[k], path[k + 1]):
                return False
        return view.segment_free(path[seg_idx], end)

    def tick(self, world: WorldState, iterations: int) -> PlannerTickOutcome:
        self._sync_robot(world)
        view = collision_view(world, self.counters)
        if self.path is None:
            found = grow_bidirectional(self._t_init, self._t_goal, self.rng, view, iterations, self.goal_bias)
            if found is not None:
                self.path = found
                self._t_init = None
                self._t_goal = None
        else:
            budget = min(iterations, self.cfg.max_repair_iters)
            it = 0
            while it < budget:
                blocked = first_blocked_segment(self.path, view)
                if blocked is None:
                    break
                it += 1
                self.counters.iterations += 1
                before = self.path
                self.path = arc_detour(self.path, blocked, self.rng, view, self.cfg)
                self.path = mutate_point(self.path, blocked, self.rng, view, self.cfg)
                if self.path is not before:
                    self.repair_edits += 1
        clear_ahead = False
        if self.path is not None:
            if self.cfg.shortcut_when_blocked:
                self.path = greedy_shortcut(self.path, view)
            elif first_blocked_segment(self.path, view) is None:
                self.path = greedy_shortcut(self.path, view)
            clear_ahead = self._stride_clear(view)
        emitted = list(self.path) if (self.path is not None and clear_ahead) else None
        moved = emitted is not None and not robot_collides(world)
        self._last_path = emitted
        self._last_robot = world.robot
        diag = {
            "collision_checks": self.counters.collision_checks,
            "nn_lookups": self.counters.nn_lookups,
            "iterations": self.counters.iterations,
            "repair_edits": self.repair_edits,
            "path_points": len(self.path) if self.path is not None else 0,
        }
        return PlannerTickOutcome(path=emitted, moved=moved, diagnostics=diag)
