import math
import random

import pytest

from replanbench.geom2d import Point2, TrialCounters, distance
from replanbench.rrt import Tree, extend, grow_bidirectional
from replanbench.world import collision_view, initial_world, load_scenario


def P(x, y):
    return Point2(float(x), float(y))


def make_view(obstacles=(), bounds=(0, 0, 100, 100), half_extent=0.0, counters=None):
    doc = {
        "name": "t",
        "bounds": list(bounds),
        "walls": [],
        "obstacles": [{"kind": "static", "rect": list(r)} for r in obstacles],
        "start": [bounds[0] + 0.25, bounds[1] + 0.25],
        "goal": [bounds[2] - 0.25, bounds[3] - 0.25],
        "robot_speed": 1.0,
        "robot_half_extent": half_extent if half_extent > 0 else 1e-9,
        "cutoff_s": 1.0,
        "planning_budget_s": 0.05,
    }
    sc = load_scenario(doc)
    w = initial_world(sc)
    return collision_view(w, counters if counters is not None else TrialCounters())


# ---------------------------------------------------------------------------
# nearest
# ---------------------------------------------------------------------------


def test_nearest_singleton():
    t = Tree(P(0, 0), TrialCounters())
    assert t.nearest(P(5, 5)) == 0


def test_nearest_strict():
    c = TrialCounters()
    t = Tree(P(0, 0), c)
    t.add(P(10, 0), 0)
    assert t.nearest(P(4, 0)) == 0
    assert t.nearest(P(6, 0)) == 1
    assert c.nn_lookups == 2


def test_nearest_tie_breaks_lowest_index():
    t = Tree(P(0, 0), TrialCounters())
    t.add(P(2, 0), 0)
    t.add(P(2, 0), 0)  # duplicate position, higher index
    assert t.nearest(P(2, 0)) == 1


def test_nearest_agrees_with_linear_scan_oracle():
    rng = random.Random(123)
    for _ in range(1000):
        c = TrialCounters()
        n = rng.randint(1, 40)
        t = Tree(P(rng.uniform(0, 100), rng.uniform(0, 100)), c)
        for _ in range(n - 1):
            t.add(P(rng.uniform(0, 100), rng.uniform(0, 100)), rng.randrange(len(t)))
        q = P(rng.uniform(0, 100), rng.uniform(0, 100))
        got = t.nearest(q)
        best_i, best_d = 0, math.inf
        for i in range(len(t)):
            d = distance(t.position(i), q)
            if d < best_d:
                best_i, best_d = i, d
        assert got == best_i


# ---------------------------------------------------------------------------
# extend
# ---------------------------------------------------------------------------


def test_extend_free_space_adds_target():
    t = Tree(P(0, 0), TrialCounters())
    view = make_view()
    status, idx = extend(t, P(10, 0), view)
    assert status == "added"
    assert t.position(idx) == P(10, 0)
    assert t.parent(idx) == 0


def test_extend_blocked_adds_midpoint():
    # inflated obstacle spanning x in [4,6] across the segment: nearest
    # collision point (4,0), midpoint of (0,0)-(4,0) is (2,0)
    t = Tree(P(0, 0), TrialCounters())
    view = make_view(obstacles=[(4, -1, 6, 1)], bounds=(-10, -10, 100, 100))
    status, idx = extend(t, P(10, 0), view)
    assert status == "added_midpoint"
    assert t.position(idx).x == pytest.approx(2.0)
    assert t.position(idx).y == pytest.approx(0.0)


def test_extend_immediately_blocked_rejected():
    t = Tree(P(0, 0), TrialCounters())
    # root sits inside the obstacle: any stub toward the target is blocked
    view = make_view(obstacles=[(0, -1, 2, 1)], bounds=(-10, -10, 100, 100))
    status, idx = extend(t, P(0.001, 0), view)
    assert status == "rejected"
    assert idx is None
    assert len(t) == 1


def test_extend_existing_position_reuses_node():
    t = Tree(P(0, 0), TrialCounters())
    view = make_view()
    status, idx = extend(t, P(0, 0), view)
    assert status == "added" and idx == 0
    assert len(t) == 1


# ---------------------------------------------------------------------------
# bidirectional growth
# ---------------------------------------------------------------------------


def _grow_once(seed, obstacles=(), iterations=4000):
    c = TrialCounters()
    view = make_view(obstacles=obstacles, counters=c)
    t_init = Tree(P(1, 1), c)
    t_goal = Tree(P(95, 95), c)
    rng = random.Random(seed)
    return grow_bidirectional(t_init, t_goal, rng, view, iterations), t_init, t_goal


def test_grow_bidirectional_smoke_statistics():
    successes = 0
    for seed in range(100):
        path, _, _ = _grow_once(seed)
        if path is not None:
            successes += 1
            assert path[0] == P(1, 1)
            assert path[-1] == P(95, 95)
    assert successes >= 99


def test_grow_bidirectional_sealed_room_returns_none():
    sealed = [(40, 40, 60, 42), (40, 58, 60, 60), (40, 42, 42, 58), (58, 42, 60, 58)]
    c = TrialCounters()
    view = make_view(obstacles=sealed, counters=c)
    t_init = Tree(P(1, 1), c)
    t_goal = Tree(P(50, 50), c)  # inside the sealed box
    path = grow_bidirectional(t_init, t_goal, random.Random(0), view, 2000)
    assert path is None


def test_grow_path_edges_were_collision_free():
    path, _, _ = _grow_once(7, obstacles=[(30, 0, 34, 70), (60, 30, 64, 100)])
    assert path is not None
    check = make_view(obstacles=[(30, 0, 34, 70), (60, 30, 64, 100)])
    for a, b in zip(path, path[1:]):
        assert check.segment_free(a, b)


def test_tree_acyclic_and_parents_precede_children():
    _, t_init, t_goal = _grow_once(3)
    for t in (t_init, t_goal):
        parents = t.parents_view()
        assert parents[0] == -1
        for i in range(1, len(t)):
            assert 0 <= parents[i] < i


def test_growth_determinism():
    p1, a1, b1 = _grow_once(42, obstacles=[(30, 0, 34, 70)])
    p2, a2, b2 = _grow_once(42, obstacles=[(30, 0, 34, 70)])
    assert p1 == p2
    assert len(a1) == len(a2) and len(b1) == len(b2)
    xs1, ys1 = a1.positions_view()
    xs2, ys2 = a2.positions_view()
    assert (xs1 == xs2).all() and (ys1 == ys2).all()
