"""Baseline dynamic planners: trim-and-regrow and forest-reuse trees.

Both planners keep a single tree rooted at the goal, grow it until it reaches
the robot, and walk the robot along the node chain while the chain stays
valid. They differ in what happens when the world cuts the tree:

* the trim-and-regrow planner (drrt) deletes every invalidated branch
  outright, remembers the deleted positions in a fixed-size waypoint cache,
  and biases 40% of its regrowth samples toward cached waypoints;
* the forest planner (mprrt) keeps disconnected-but-valid components of at
  least 5 nodes in a FIFO forest of capacity 25 and spends 10% of its growth
  iterations trying to splice a stored subtree back onto the main tree.

Robot motion is gated on holding a currently valid root-to-robot chain.
"""
from __future__ import annotations

import math
import random
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .geom2d import Point2, TrialCounters
from .rrt import GOAL_BIAS, Tree, extend, uniform_point
from .world import CollisionView, Scenario, WorldState, collision_view, robot_collides, walk_polyline

__all__ = [
    "WAYPOINT_BIAS",
    "FOREST_BIAS",
    "FOREST_CAPACITY",
    "MIN_SUBTREE",
    "PlannerTickOutcome",
    "WaypointCache",
    "trim_invalid",
    "DrrtPlanner",
    "MpRrtPlanner",
]

WAYPOINT_BIAS = 0.4
FOREST_BIAS = 0.1
FOREST_CAPACITY = 25
MIN_SUBTREE = 5
WAYPOINT_CAPACITY = 100


@dataclass
class PlannerTickOutcome:
    """Uniform per-tick planner result consumed by the benchmark loop."""

    path: list[Point2] | None
    moved: bool
    diagnostics: dict[str, int] = field(default_factory=dict)


class WaypointCache:
    """Fixed-capacity position store with uniform random replacement."""

    def __init__(self, capacity: int, rng: random.Random):
        self.capacity = capacity
        self.entries: list[Point2] = []
        self._rng = rng

    def __len__(self) -> int:
        return len(self.entries)

    def push(self, p: Point2) -> None:
        if len(self.entries) < self.capacity:
            self.entries.append(p)
        else:
            self.entries[self._rng.randrange(self.capacity)] = p

    def sample(self, rng: random.Random) -> Point2:
        return self.entries[rng.randrange(len(self.entries))]


# ---------------------------------------------------------------------------
# tree validation passes
# ---------------------------------------------------------------------------


def _edge_blocked(tree: Tree, view: CollisionView, changed_only: bool) -> np.ndarray:
    """Blocked mask for the parent edges of nodes 1..n-1."""
    xs, ys = tree.positions_view()
    parents = tree.parents_view()
    if len(tree) <= 1:
        return np.zeros(0, dtype=bool)
    pax = xs[parents[1:]]
    pay = ys[parents[1:]]
    if changed_only:
        return view.segments_hit_changed(pax, pay, xs[1:], ys[1:])
    return view.segments_hit_any(pax, pay, xs[1:], ys[1:])


def _cascade_alive(parents: Sequence[int], edge_blocked: np.ndarray) -> np.ndarray:
    """Root stays; a node survives iff its parent survives and its edge is clear."""
    n = len(parents)
    alive = [True] * n
    blocked = edge_blocked.tolist()
    plist = list(parents)
    for i in range(1, n):
        alive[i] = alive[plist[i]] and not blocked[i - 1]
    return np.asarray(alive, dtype=bool)


def _rebuild(tree: Tree, alive: np.ndarray) -> tuple[Tree, np.ndarray, list[Point2]]:
    """Compact the surviving nodes, preserving order; returns (tree, id_map, removed)."""
    xs, ys = tree.positions_view()
    parents = tree.parents_view()
    keep = np.flatnonzero(alive)
    id_map = np.full(len(tree), -1, dtype=np.int64)
    id_map[keep] = np.arange(keep.shape[0])
    new_parents = np.where(parents[keep] >= 0, id_map[parents[keep]], -1)
    new_tree = Tree.from_arrays(xs[keep], ys[keep], new_parents, tree.counters)
    dead = np.flatnonzero(~alive)
    removed = [Point2(float(xs[i]), float(ys[i])) for i in dead]
    return new_tree, id_map, removed


def _trim(tree: Tree, view: CollisionView, changed_only: bool):
    blocked = _edge_blocked(tree, view, changed_only)
    if not blocked.any():
        return tree, np.arange(len(tree), dtype=np.int64), []
    alive = _cascade_alive(tree.parents_view(), blocked)
    return _rebuild(tree, alive)


def trim_invalid(tree: Tree, world: WorldState) -> tuple[Tree, list[Point2]]:
    """Maximal valid subtree containing the root, against the full current world.

    Returns the surviving tree and the removed node positions; together they
    partition the input nodes.
    """
    view = collision_view(world, tree.counters)
    new_tree, _, removed = _trim(tree, view, changed_only=False)
    return new_tree, removed


def _split_components(
    tree: Tree,
    view: CollisionView,
    root_pinned: bool,
    pos_bad: np.ndarray | None = None,
    edge_blocked: np.ndarray | None = None,
):
    """Delete invalid nodes/edges, keeping orphaned components.

    Returns (main, id_map, fragments, removed): main is the root component
    (None when the root itself dies and root_pinned is False), id_map maps old
    node indices into main, fragments are the orphaned components in discovery
    order, removed are deleted node positions. Validity masks may be supplied
    by a caller that batched the kernel tests for several trees.
    """
    n = len(tree)
    xs, ys = tree.positions_view()
    parents = tree.parents_view()
    if pos_bad is None:
        pos_bad = view.points_in_changed(xs, ys)
    if edge_blocked is None:
        edge_blocked = _edge_blocked(tree, view, changed_only=True)
    if not pos_bad.any() and not edge_blocked.any():
        return tree, np.arange(n, dtype=np.int64), [], []

    comp = [0] * n
    comp[0] = 0 if (root_pinned or not pos_bad[0]) else -1
    next_comp = 1
    plist = parents.tolist()
    bad = pos_bad.tolist()
    eblk = edge_blocked.tolist()
    for i in range(1, n):
        if bad[i]:
            comp[i] = -1
        elif comp[plist[i]] >= 0 and not eblk[i - 1]:
            comp[i] = comp[plist[i]]
        else:
            comp[i] = next_comp
            next_comp += 1

    comp_arr = np.asarray(comp, dtype=np.int64)
    removed = [Point2(float(xs[i]), float(ys[i])) for i in np.flatnonzero(comp_arr == -1)]

    main = None
    id_map = np.full(n, -1, dtype=np.int64)
    if comp[0] == 0:
        keep = np.flatnonzero(comp_arr == 0)
        id_map[keep] = np.arange(keep.shape[0])
        new_parents = np.where(parents[keep] >= 0, id_map[parents[keep]], -1)
        main = Tree.from_arrays(xs[keep], ys[keep], new_parents, tree.counters)

    fragments = []
    for c in range(1, next_comp):
        idxs = np.flatnonzero(comp_arr == c)
        if idxs.shape[0] < MIN_SUBTREE:
            continue
        remap = np.full(n, -1, dtype=np.int64)
        remap[idxs] = np.arange(idxs.shape[0])
        frag_parents = np.empty(idxs.shape[0], dtype=np.int64)
        frag_parents[0] = -1
        frag_parents[1:] = remap[parents[idxs[1:]]]
        fragments.append(Tree.from_arrays(xs[idxs], ys[idxs], frag_parents, tree.counters))
    return main, id_map, fragments, removed


# ---------------------------------------------------------------------------
# planners
# ---------------------------------------------------------------------------


class _ChainPlanner:
    """Shared chain bookkeeping for goal-rooted planners.

    ``chain`` is a list of node ids [c0, c1, .., root]; the robot lies on the
    segment (c0, c1), possibly exactly at c0. The emitted path is the robot
    position followed by the chain tail positions.
    """

    def __init__(self, scenario: Scenario, rng: random.Random, counters: TrialCounters, goal_bias: float):
        self.scenario = scenario
        self.rng = rng
        self.counters = counters
        self.goal_bias = goal_bias
        self.tree = Tree(scenario.goal, counters)
        self.chain: list[int] | None = None
        self._last_path: list[Point2] | None = None
        self._last_robot: Point2 = scenario.start
        self.draws: dict[str, int] = {}

    def _sync_robot(self, world: WorldState) -> None:
        """Replay last tick's motion along the emitted path to pop passed nodes."""
        robot = world.robot
        if robot == self._last_robot or self._last_path is None:
            self._last_robot = robot
            return
        pos, seg_idx = walk_polyline(self._last_path, self.scenario.robot_speed)
        if pos != robot:
            # motion outside our prediction: drop the chain and reconnect
            self.chain = None
        elif self.chain is not None and seg_idx > 0:
            self.chain = self.chain[seg_idx:]
            if len(self.chain) < 2:
                self.chain = None
        self._last_robot = robot

    def _remap_chain(self, id_map: np.ndarray) -> None:
        if self.chain is None:
            return
        mapped = [int(id_map[c]) for c in self.chain]
        self.chain = None if any(m < 0 for m in mapped) else mapped

    def _try_connect(self, status: str, idx, robot: Point2) -> None:
        if status == "added" and idx is not None and self.tree.position(idx) == robot:
            ids = self.tree.chain_ids(idx)
            if len(ids) >= 2:
                self.chain = ids

    def _emit(self, world: WorldState) -> PlannerTickOutcome:
        path = None
        if self.chain is not None:
            path = [world.robot] + [self.tree.position(c) for c in self.chain[1:]]
        moved = path is not None and not robot_collides(world)
        self._last_path = path
        self._last_robot = world.robot
        diag = {
            "collision_checks": self.counters.collision_checks,
            "nn_lookups": self.counters.nn_lookups,
            "iterations": self.counters.iterations,
            "tree_nodes": len(self.tree),
        }
        diag.update(self.draws)
        return PlannerTickOutcome(path=path, moved=moved, diagnostics=diag)


class DrrtPlanner(_ChainPlanner):
    """Goal-rooted tree: trim newly blocked branches, regrow with waypoint bias."""

    algorithm = "drrt"

    def __init__(
        self,
        scenario: Scenario,
        rng: random.Random,
        counters: TrialCounters,
        waypoint_capacity: int = WAYPOINT_CAPACITY,
        vicinity_r: float | None = None,
        goal_bias: float = GOAL_BIAS,
    ):
        super().__init__(scenario, rng, counters, goal_bias)
        self.cache = WaypointCache(waypoint_capacity, rng)
        self.vicinity_r = vicinity_r if vicinity_r is not None else 5.0 * scenario.robot_half_extent
        self.draws = {"total": 0, "cache_ready": 0, "waypoint": 0}

    def _sample(self, robot: Point2, view: CollisionView) -> Point2:
        self.draws["total"] += 1
        if self.cache.entries:
            self.draws["cache_ready"] += 1
            if self.rng.random() < WAYPOINT_BIAS:
                self.draws["waypoint"] += 1
                center = self.cache.sample(self.rng)
                r = self.vicinity_r * math.sqrt(self.rng.random())
                a = self.rng.uniform(0.0, 2.0 * math.pi)
                b = view.bounds
                x = min(max(center.x + r * math.cos(a), b.lo.x), b.hi.x)
                y = min(max(center.y + r * math.sin(a), b.lo.y), b.hi.y)
                return Point2(x, y)
        if self.rng.random() < self.goal_bias:
            return robot
        return uniform_point(self.rng, view)

    def tick(self, world: WorldState, iterations: int) -> PlannerTickOutcome:
        self._sync_robot(world)
        view = collision_view(world, self.counters)
        if view.changed_count and len(self.tree) > 1:
            new_tree, id_map, removed = _trim(self.tree, view, changed_only=True)
            if removed:
                self.tree = new_tree
                for p in removed:
                    self.cache.push(p)
                self._remap_chain(id_map)
        it = 0
        while self.chain is None and it < iterations:
            it += 1
            self.counters.iterations += 1
            q = self._sample(world.robot, view)
            status, idx = extend(self.tree, q, view)
            self._try_connect(status, idx, world.robot)
        return self._emit(world)


@dataclass
class _ForestEntry:
    serial: int
    tree: Tree


class MpRrtPlanner(_ChainPlanner):
    """Goal-rooted tree plus a FIFO forest of reusable disconnected subtrees."""

    algorithm = "mprrt"

    def __init__(
        self,
        scenario: Scenario,
        rng: random.Random,
        counters: TrialCounters,
        forest_capacity: int = FOREST_CAPACITY,
        min_subtree: int = MIN_SUBTREE,
        goal_bias: float = GOAL_BIAS,
    ):
        super().__init__(scenario, rng, counters, goal_bias)
        self.forest: list[_ForestEntry] = []
        self.forest_capacity = forest_capacity
        self.min_subtree = min_subtree
        self._next_serial = 0
        self.draws = {"total": 0, "forest_ready": 0, "forest": 0}

    def _push_forest(self, tree: Tree) -> None:
        if len(tree) < self.min_subtree:
            return
        while len(self.forest) >= self.forest_capacity:
            self.forest.pop(0)  # oldest first: list is serial-ascending
        self.forest.append(_ForestEntry(self._next_serial, tree))
        self._next_serial += 1

    def _revalidate(self, view: CollisionView) -> None:
        # one kernel pass over the nodes and edges of the main tree plus every
        # forest subtree; per-tree slices feed the component split
        trees = [self.tree] + [e.tree for e in self.forest]
        xs_all = np.concatenate([t.positions_view()[0] for t in trees])
        ys_all = np.concatenate([t.positions_view()[1] for t in trees])
        pos_bad_all = view.points_in_changed(xs_all, ys_all)
        edge_slices = []
        pax, pay, cx, cy = [], [], [], []
        e0 = 0
        for t in trees:
            xs, ys = t.positions_view()
            parents = t.parents_view()
            n_edges = max(0, len(t) - 1)
            edge_slices.append((e0, e0 + n_edges))
            if n_edges:
                pax.append(xs[parents[1:]])
                pay.append(ys[parents[1:]])
                cx.append(xs[1:])
                cy.append(ys[1:])
            e0 += n_edges
        if e0:
            blocked_all = view.segments_hit_changed(
                np.concatenate(pax), np.concatenate(pay), np.concatenate(cx), np.concatenate(cy)
            )
        else:
            blocked_all = np.zeros(0, dtype=bool)

        n0 = 0
        masks = []
        for t, (a, b) in zip(trees, edge_slices):
            masks.append((pos_bad_all[n0 : n0 + len(t)], blocked_all[a:b]))
            n0 += len(t)

        main, id_map, fragments, _ = _split_components(
            self.tree, view, root_pinned=True, pos_bad=masks[0][0], edge_blocked=masks[0][1]
        )
        self.tree = main
        self._remap_chain(id_map)
        for frag in fragments:
            self._push_forest(frag)
        survivors: list[_ForestEntry] = []
        spawned: list[Tree] = []
        for entry, (pos_bad, edge_blocked) in zip(self.forest, masks[1:]):
            sub_main, _, sub_frags, _ = _split_components(
                entry.tree, view, root_pinned=False, pos_bad=pos_bad, edge_blocked=edge_blocked
            )
            spawned.extend(sub_frags)
            if sub_main is not None and len(sub_main) >= self.min_subtree:
                survivors.append(_ForestEntry(entry.serial, sub_main))
        self.forest = survivors
        for frag in spawned:
            self._push_forest(frag)

    def _splice(self, entry: _ForestEntry, arrival: int) -> list[int]:
        """Graft a forest subtree below the arrival node (which sits at its root)."""
        sub = entry.tree
        new_ids = [0] * len(sub)
        new_ids[0] = arrival
        added = []
        for j in range(1, len(sub)):
            p = sub.parent(j)
            nid = self.tree.add(sub.position(j), new_ids[p])
            new_ids[j] = nid
            added.append(nid)
        return added

    def tick(self, world: WorldState, iterations: int) -> PlannerTickOutcome:
        self._sync_robot(world)
        view = collision_view(world, self.counters)
        if view.changed_count:
            self._revalidate(view)
        it = 0
        while self.chain is None and it < iterations:
            it += 1
            self.counters.iterations += 1
            self.draws["total"] += 1
            r = self.rng.random()
            if self.forest:
                self.draws["forest_ready"] += 1
            if r < FOREST_BIAS and self.forest:
                self.draws["forest"] += 1
                k = self.rng.randrange(len(self.forest))
                entry = self.forest[k]
                target = entry.tree.root
                status, idx = extend(self.tree, target, view)
                if status == "added" and self.tree.position(idx) == target:
                    added = self._splice(entry, idx)
                    del self.forest[k]
                    # a reclaimed subtree may already touch the robot
                    for nid in added:
                        self._try_connect("added", nid, world.robot)
                        if self.chain is not None:
                            break
                continue
            if self.rng.random() < self.goal_bias:
                target = world.robot
            else:
                target = uniform_point(self.rng, view)
            status, idx = extend(self.tree, target, view)
            self._try_connect(status, idx, world.robot)
        return self._emit(world)
