"""Label quality metrics and learning-curve comparison measures."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

__all__ = [
    "ComparisonReport",
    "LearningCurve",
    "METRICS",
    "auc",
    "auclog",
    "compare_curves",
    "overall_quality",
    "quality",
    "questions_saved",
]

METRICS = ("accuracy", "f1")
QUALITY_GRID_POINTS = 100


def quality(metric: str, predictions, gold) -> float:
    """Accuracy, or F1 with class 1 as the positive class.

    F1 is ``2 TP / (2 TP + FP + FN)`` and is 0 whenever there is no true
    positive, which covers the all-negative cases.
    """
    pred = np.asarray(predictions, dtype=np.int64)
    truth = np.asarray(gold, dtype=np.int64)
    if pred.shape != truth.shape:
        raise ValueError(f"length mismatch: {pred.shape} predictions vs {truth.shape} gold labels")
    if pred.size == 0:
        raise ValueError("cannot score an empty prediction set")
    if metric == "accuracy":
        return float(np.mean(pred == truth))
    if metric == "f1":
        tp = int(np.sum((pred == 1) & (truth == 1)))
        fp = int(np.sum((pred == 1) & (truth == 0)))
        fn = int(np.sum((pred == 0) & (truth == 1)))
        if tp == 0:
            return 0.0
        return 2.0 * tp / (2.0 * tp + fp + fn)
    raise ValueError(f"unknown metric {metric!r}")


def overall_quality(crowd_fraction: float, crowd_quality: float, model_quality: float) -> float:
    """Blend crowd and model quality by the fraction of items the crowd labeled."""
    if not 0.0 <= crowd_fraction <= 1.0:
        raise ValueError("crowd_fraction must lie in [0, 1]")
    return crowd_fraction * crowd_quality + (1.0 - crowd_fraction) * model_quality


@dataclass(frozen=True)
class LearningCurve:
    """Quality as a function of questions asked, sorted by question count."""

    points: tuple[tuple[float, float], ...]
    metric: str = "accuracy"
    label: str = ""

    def __post_init__(self):
        pts = tuple((float(x), float(q)) for x, q in self.points)
        object.__setattr__(self, "points", pts)
        xs = [x for x, _ in pts]
        if any(b <= a for a, b in zip(xs, xs[1:])):
            raise ValueError("learning curve x values must be strictly increasing")
        if not all(math.isfinite(q) for _, q in pts):
            raise ValueError("learning curve qualities must be finite")

    @classmethod
    def from_xy(cls, xs: Iterable[float], qs: Iterable[float], **kw) -> "LearningCurve":
        return cls(tuple(zip(xs, qs)), **kw)

    @property
    def x(self) -> np.ndarray:
        return np.array([p[0] for p in self.points])

    @property
    def q(self) -> np.ndarray:
        return np.array([p[1] for p in self.points])


def _normalized_area(x: np.ndarray, q: np.ndarray) -> float:
    span = x[-1] - x[0]
    if span <= 0:
        raise ValueError("curve has zero x-range")
    return float(np.sum((x[1:] - x[:-1]) * (q[1:] + q[:-1]) / 2.0) / span)


def auc(curve: LearningCurve) -> float:
    """Trapezoidal area under the curve divided by its x-range."""
    if len(curve.points) < 2:
        raise ValueError("AUC needs at least two points")
    return _normalized_area(curve.x, curve.q)


def auclog(curve: LearningCurve) -> float:
    """Like :func:`auc` but integrated against ``ln(questions)``.

    A point at 0 questions is moved to 1 question; if the curve already has
    a point at 1 question the moved point is dropped.
    """
    if len(curve.points) < 2:
        raise ValueError("AUCLOG needs at least two points")
    pts = list(curve.points)
    if pts[0][0] <= 0:
        if pts[0][0] < 0:
            raise ValueError("AUCLOG needs non-negative x values")
        if len(pts) > 1 and pts[1][0] <= 1:
            pts = pts[1:]
        else:
            pts[0] = (1.0, pts[0][1])
    if len(pts) < 2:
        raise ValueError("AUCLOG needs at least two points with x >= 1")
    x = np.log(np.array([p[0] for p in pts]))
    q = np.array([p[1] for p in pts])
    return _normalized_area(x, q)


def _first_crossing(x: np.ndarray, envelope: np.ndarray, level: float) -> float:
    if level <= envelope[0]:
        return float(x[0])
    i = int(np.argmax(envelope >= level))
    x0, x1 = x[i - 1], x[i]
    q0, q1 = envelope[i - 1], envelope[i]
    return float(x0 + (x1 - x0) * (level - q0) / (q1 - q0))


def questions_saved(
    curve_a: LearningCurve,
    curve_b: LearningCurve,
    grid_points: int = QUALITY_GRID_POINTS,
) -> float | None:
    """Average ratio of questions curve_b needs over those curve_a needs.

    Both curves are replaced by their running-maximum envelopes; for each of
    ``grid_points`` evenly spaced quality levels reachable by both, the x at
    which each envelope first reaches that level is found by linear
    interpolation.  Question counts below 1 are treated as 1.  Returns
    ``None`` when the two quality ranges do not overlap.
    """
    env_a = np.maximum.accumulate(curve_a.q)
    env_b = np.maximum.accumulate(curve_b.q)
    lo = max(env_a[0], env_b[0])
    hi = min(env_a[-1], env_b[-1])
    if lo > hi:
        return None
    levels = np.linspace(lo, hi, grid_points)
    ratios = [
        max(_first_crossing(curve_b.x, env_b, lv), 1.0) / max(_first_crossing(curve_a.x, env_a, lv), 1.0)
        for lv in levels
    ]
    return float(np.mean(ratios))


@dataclass(frozen=True)
class ComparisonReport:
    baseline: str
    method: str
    auc_ratio: float | None
    auclog_ratio: float | None
    questions_saved: float | None
    extra: dict = field(default_factory=dict)


def _ratio(a: float, b: float) -> float | None:
    return None if b == 0 else a / b


def compare_curves(baseline: LearningCurve, method: LearningCurve) -> ComparisonReport:
    """Score ``method`` against ``baseline``; every ratio above 1 favours the method."""
    return ComparisonReport(
        baseline=baseline.label,
        method=method.label,
        auc_ratio=_ratio(auc(method), auc(baseline)),
        auclog_ratio=_ratio(auclog(method), auclog(baseline)),
        questions_saved=questions_saved(method, baseline),
    )


def mean_curve(curves: Sequence[LearningCurve], label: str = "") -> LearningCurve:
    """Pointwise mean of curves sharing the same x grid."""
    xs = curves[0].x
    for c in curves[1:]:
        if not np.array_equal(c.x, xs):
            raise ValueError("curves do not share an x grid")
    q = np.mean([c.q for c in curves], axis=0)
    return LearningCurve.from_xy(xs, q, metric=curves[0].metric, label=label)
