"""Exact 2D primitives and the segment/rectangle collision kernel.

Everything that ever decides "does this motion hit that box" funnels through
the slab-clipping kernel in this module, which is what makes the per-trial
collision-check counter meaningful: one check is one (segment, rect) pair
actually tested. Counting itself happens in the world-view layer that owns a
trial's counters; the functions here are pure.
"""
from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "Point2",
    "Segment",
    "Rect",
    "TrialCounters",
    "distance",
    "point_in_rect",
    "segment_intersects_rect",
    "segment_rect_entry",
    "slab_entry_params",
    "rects_array",
]


@dataclass(frozen=True)
class Point2:
    """A position in the workspace (doubles as a planner state)."""

    x: float
    y: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.x) and math.isfinite(self.y)):
            raise ValueError(f"non-finite point ({self.x}, {self.y})")


@dataclass(frozen=True)
class Segment:
    """Directed segment from a to b; zero length is legal."""

    a: Point2
    b: Point2


@dataclass(frozen=True)
class Rect:
    """Axis-aligned rectangle with closed boundary."""

    lo: Point2
    hi: Point2

    def __post_init__(self) -> None:
        if self.lo.x > self.hi.x or self.lo.y > self.hi.y:
            raise ValueError(f"inverted rect [{self.lo}, {self.hi}]")

    @property
    def width(self) -> float:
        return self.hi.x - self.lo.x

    @property
    def height(self) -> float:
        return self.hi.y - self.lo.y

    @property
    def center(self) -> Point2:
        return Point2((self.lo.x + self.hi.x) / 2.0, (self.lo.y + self.hi.y) / 2.0)

    def inflated(self, margin: float) -> "Rect":
        """Minkowski-grow by margin on every side (robot half-extent inflation)."""
        return Rect(
            Point2(self.lo.x - margin, self.lo.y - margin),
            Point2(self.hi.x + margin, self.hi.y + margin),
        )

    def translated(self, dx: float, dy: float) -> "Rect":
        return Rect(Point2(self.lo.x + dx, self.lo.y + dy), Point2(self.hi.x + dx, self.hi.y + dy))

    def contains(self, p: Point2) -> bool:
        return self.lo.x <= p.x <= self.hi.x and self.lo.y <= p.y <= self.hi.y

    def overlaps_open(self, other: "Rect") -> bool:
        """True when interiors overlap; shared edges do not count."""
        return (
            self.lo.x < other.hi.x
            and self.hi.x > other.lo.x
            and self.lo.y < other.hi.y
            and self.hi.y > other.lo.y
        )

    def as_row(self) -> tuple[float, float, float, float]:
        return (self.lo.x, self.lo.y, self.hi.x, self.hi.y)


@dataclass
class TrialCounters:
    """Per-trial instrumentation bag.

    collision_checks counts elementary segment/rect kernel tests, nn_lookups
    counts nearest-neighbour queries, iterations counts planner loop cycles
    (the unit the planning budget is metered in). One instance per trial;
    never shared across concurrent trials.
    """

    collision_checks: int = 0
    nn_lookups: int = 0
    iterations: int = 0


def distance(p: Point2, q: Point2) -> float:
    """Euclidean distance."""
    return math.hypot(p.x - q.x, p.y - q.y)


def point_in_rect(p: Point2, r: Rect) -> bool:
    """Closed containment: boundary points are inside."""
    return r.contains(p)


def rects_array(rects: Iterable[Rect] | Sequence[Rect]) -> np.ndarray:
    """Pack rects into an (m, 4) float array with columns x0, y0, x1, y1."""
    rows = [r.as_row() for r in rects]
    if not rows:
        return np.empty((0, 4), dtype=np.float64)
    return np.asarray(rows, dtype=np.float64)


def _axis_slab(a, d, lo, hi):
    """Parameter interval where a + t*d lies inside the closed slab [lo, hi].

    Degenerate axes (d == 0) give the full line when a is inside the slab and
    the empty interval otherwise. Inputs broadcast.
    """
    with np.errstate(divide="ignore", invalid="ignore", over="ignore"):
        ta = (lo - a) / d
        tb = (hi - a) / d
        t_lo = np.minimum(ta, tb)
        t_hi = np.maximum(ta, tb)
    flat = d == 0.0
    if np.any(flat):
        inside = (a >= lo) & (a <= hi)
        t_lo = np.where(flat, np.where(inside, -np.inf, np.inf), t_lo)
        t_hi = np.where(flat, np.where(inside, np.inf, -np.inf), t_hi)
    return t_lo, t_hi


def slab_entry_params(ax, ay, bx, by, rects: np.ndarray) -> np.ndarray:
    """First-contact parameter of segment (a, b) against each closed rect.

    Returns t in [0, 1] where the segment first touches the rect, NaN where it
    misses entirely. Touching the boundary counts as contact; a zero-length
    segment reduces to point containment. Endpoint coordinates may be scalars
    or arrays; with (n, 1)-shaped coordinates and m rects the result is (n, m).
    """
    ax = np.asarray(ax, dtype=np.float64)
    ay = np.asarray(ay, dtype=np.float64)
    dx = np.asarray(bx, dtype=np.float64) - ax
    dy = np.asarray(by, dtype=np.float64) - ay
    x_lo, x_hi = _axis_slab(ax, dx, rects[:, 0], rects[:, 2])
    y_lo, y_hi = _axis_slab(ay, dy, rects[:, 1], rects[:, 3])
    t0 = np.maximum(np.maximum(x_lo, y_lo), 0.0)
    t1 = np.minimum(np.minimum(x_hi, y_hi), 1.0)
    return np.where(t0 <= t1, t0, np.nan)


def segment_rect_entry(s: Segment, r: Rect) -> float | None:
    """Entry parameter of s into r, or None when s misses r."""
    t = slab_entry_params(s.a.x, s.a.y, s.b.x, s.b.y, rects_array([r]))
    v = float(t[0])
    return None if math.isnan(v) else v


def segment_intersects_rect(s: Segment, r: Rect) -> bool:
    """True iff s has any point inside r or on its boundary."""
    return segment_rect_entry(s, r) is not None
