"""Tree store and bidirectional growth shared by every planner.

Trees keep node positions in flat numpy arrays so the exhaustive
nearest-neighbour scan is a single vectorized reduction; parents always
precede children, which keeps the structure acyclic by construction and lets
validation passes run in index order. Growth budgets are counted in
iterations, never wall-clock, so equal seeds replay identically.
"""
from __future__ import annotations

import math
import random
from typing import Sequence

import numpy as np

from .geom2d import Point2, TrialCounters, distance
from .world import CollisionView

__all__ = ["Tree", "extend", "grow_bidirectional", "MIN_EDGE", "GOAL_BIAS"]

# midpoint insertions shorter than this are rejected as degenerate
MIN_EDGE = 1e-6
# probability of sampling the opposite root instead of a uniform point
GOAL_BIAS = 0.05


class Tree:
    """Append-only rooted tree with an instrumented nearest query."""

    __slots__ = ("_x", "_y", "_parent", "_n", "counters")

    def __init__(self, root: Point2, counters: TrialCounters, capacity: int = 256):
        cap = max(capacity, 1)
        self._x = np.empty(cap, dtype=np.float64)
        self._y = np.empty(cap, dtype=np.float64)
        self._parent = np.empty(cap, dtype=np.int64)
        self._x[0] = root.x
        self._y[0] = root.y
        self._parent[0] = -1
        self._n = 1
        self.counters = counters

    def __len__(self) -> int:
        return self._n

    @classmethod
    def from_arrays(cls, xs: np.ndarray, ys: np.ndarray, parents: np.ndarray, counters: TrialCounters) -> "Tree":
        """Bulk-build a tree; arrays must satisfy parents[i] < i with parents[0] == -1."""
        t = cls.__new__(cls)
        t._x = np.array(xs, dtype=np.float64)
        t._y = np.array(ys, dtype=np.float64)
        t._parent = np.array(parents, dtype=np.int64)
        t._n = int(t._x.shape[0])
        t.counters = counters
        return t

    @property
    def root(self) -> Point2:
        return Point2(float(self._x[0]), float(self._y[0]))

    def position(self, i: int) -> Point2:
        return Point2(float(self._x[i]), float(self._y[i]))

    def parent(self, i: int) -> int:
        return int(self._parent[i])

    def positions_view(self):
        """(xs, ys) read-only views over live nodes."""
        return self._x[: self._n], self._y[: self._n]

    def parents_view(self):
        return self._parent[: self._n]

    def add(self, p: Point2, parent: int) -> int:
        if not (0 <= parent < self._n):
            raise IndexError(f"parent {parent} out of range")
        if self._n == self._x.shape[0]:
            grow = self._n * 2
            self._x = np.resize(self._x, grow)
            self._y = np.resize(self._y, grow)
            self._parent = np.resize(self._parent, grow)
        i = self._n
        self._x[i] = p.x
        self._y[i] = p.y
        self._parent[i] = parent
        self._n += 1
        return i

    def nearest(self, q: Point2) -> int:
        """Index of the node nearest to q, lowest index on ties; one NN lookup."""
        self.counters.nn_lookups += 1
        dx = self._x[: self._n] - q.x
        dy = self._y[: self._n] - q.y
        return int(np.argmin(dx * dx + dy * dy))

    def chain_positions(self, i: int) -> list[Point2]:
        """Positions from node i up to and including the root."""
        out = []
        while i != -1:
            out.append(self.position(i))
            i = int(self._parent[i])
        return out

    def chain_ids(self, i: int) -> list[int]:
        out = []
        while i != -1:
            out.append(i)
            i = int(self._parent[i])
        return out


def extend(tree: Tree, target: Point2, view: CollisionView):
    """Grow tree toward target from its nearest node.

    Adds target itself when the connecting segment is free; otherwise adds the
    midpoint between the nearest node and the nearest collision point, when
    that stub is free and longer than MIN_EDGE. Returns (status, index) with
    status one of "added", "added_midpoint", "rejected". A target exactly on
    an existing node reports "added" with the existing index.
    """
    near = tree.nearest(target)
    npos = tree.position(near)
    if npos == target:
        return "added", near
    t = view.first_hit(npos, target)
    if t is None:
        return "added", tree.add(target, near)
    hit = Point2(npos.x + t * (target.x - npos.x), npos.y + t * (target.y - npos.y))
    mid = Point2((npos.x + hit.x) / 2.0, (npos.y + hit.y) / 2.0)
    if distance(npos, mid) <= MIN_EDGE:
        return "rejected", None
    if not view.segment_free(npos, mid):
        return "rejected", None
    return "added_midpoint", tree.add(mid, near)


def uniform_point(rng: random.Random, view: CollisionView) -> Point2:
    b = view.bounds
    return Point2(rng.uniform(b.lo.x, b.hi.x), rng.uniform(b.lo.y, b.hi.y))


def grow_bidirectional(
    t_init: Tree,
    t_goal: Tree,
    rng: random.Random,
    view: CollisionView,
    iterations: int,
    goal_bias: float = GOAL_BIAS,
) -> list[Point2] | None:
    """Grow both trees toward shared samples until they meet.

    Each iteration draws one sample (the goal-side root with probability
    goal_bias, else uniform) and tries to add it to both trees; when both
    succeed at the same point the trees merge and the root-to-root path is
    returned. Returns None when the iteration budget runs out, leaving both
    trees grown for a later call to resume.
    """
    for _ in range(iterations):
        t_init.counters.iterations += 1
        if rng.random() < goal_bias:
            q = t_goal.root
        else:
            q = uniform_point(rng, view)
        status_a, ia = extend(t_init, q, view)
        status_b, ib = extend(t_goal, q, view)
        if status_a == "added" and status_b == "added":
            left = t_init.chain_positions(ia)[::-1]
            right = t_goal.chain_positions(ib)
            return left + right[1:]
    return None
