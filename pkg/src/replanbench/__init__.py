"""2D dynamic replanning benchmark toolkit."""

from .geom2d import Point2, Rect, Segment, TrialCounters

__version__ = "0.1.0"

__all__ = ["Point2", "Rect", "Segment", "TrialCounters", "__version__"]
