"""Confusion matrix, accuracy/precision/recall/F1, ROC curve, and AUC.

The positive class defaults to the fake (deepfake) class. Metrics with a
zero denominator are surfaced as None ("undefined") rather than silently
reported as 0.
"""
from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .errors import LengthMismatch, SingleClassError

__all__ = [
    "ConfusionMatrix",
    "MetricReport",
    "RocCurve",
    "confusion",
    "metrics_from_confusion",
    "roc_curve",
    "auc",
    "confusion_to_csv",
    "metrics_to_csv",
    "roc_to_csv",
]

_POSITIVE_VALUES = {"real": 0, "fake": 1, "deepfake": 1}


def _positive_value(positive_class: str) -> int:
    if positive_class not in _POSITIVE_VALUES:
        raise ValueError(f"positive_class must be 'real' or 'fake', got {positive_class!r}")
    return _POSITIVE_VALUES[positive_class]


@dataclass(frozen=True)
class ConfusionMatrix:
    """Quadrant counts for a chosen positive class: rows true, columns predicted."""

    tp: int
    fp: int
    fn: int
    tn: int
    positive_class: str = "fake"

    def __post_init__(self):
        if min(self.tp, self.fp, self.fn, self.tn) < 0:
            raise ValueError("confusion counts must be nonnegative")
        _positive_value(self.positive_class)

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.fn + self.tn


@dataclass(frozen=True)
class MetricReport:
    """Scalar summary metrics; None marks an undefined (0/0) value."""

    accuracy: float | None
    precision: float | None
    recall: float | None
    f1: float | None
    auc: float | None = None


@dataclass(frozen=True)
class RocCurve:
    """Ordered (fpr, tpr, threshold) points from (0,0) to (1,1)."""

    points: tuple[tuple[float, float, float], ...]


def confusion(labels, predictions, positive_class: str = "fake") -> ConfusionMatrix:
    """Count the four quadrants of hard 0/1 predictions against labels."""
    y = np.asarray(labels, dtype=np.int64)
    p = np.asarray(predictions, dtype=np.int64)
    if y.shape != p.shape:
        raise LengthMismatch(f"{len(y)} labels vs {len(p)} predictions")
    if len(y) < 1:
        raise LengthMismatch("need at least one sample")
    pos = _positive_value(positive_class)
    y_pos = y == pos
    p_pos = p == pos
    return ConfusionMatrix(
        tp=int(np.sum(y_pos & p_pos)),
        fp=int(np.sum(~y_pos & p_pos)),
        fn=int(np.sum(y_pos & ~p_pos)),
        tn=int(np.sum(~y_pos & ~p_pos)),
        positive_class=positive_class,
    )


def metrics_from_confusion(cm: ConfusionMatrix) -> MetricReport:
    """accuracy, precision, recall and F1 from quadrant counts.

    Any 0/0 ratio comes back as None; F1 is the harmonic mean of precision
    and recall and is undefined whenever either of them is.
    """
    if cm.total == 0:
        raise ValueError("confusion matrix is empty")

    def ratio(num: int, den: int) -> float | None:
        return None if den == 0 else num / den

    accuracy = (cm.tp + cm.tn) / cm.total
    precision = ratio(cm.tp, cm.tp + cm.fp)
    recall = ratio(cm.tp, cm.tp + cm.fn)
    if precision is None or recall is None or precision + recall == 0:
        f1 = None
    else:
        f1 = 2.0 * precision * recall / (precision + recall)
    return MetricReport(accuracy=accuracy, precision=precision, recall=recall, f1=f1)


def roc_curve(labels, scores, positive_class: str = "fake") -> RocCurve:
    """Threshold sweep over the distinct scores, descending; ties share a point.

    ``scores`` must score the positive class (higher = more positive). The
    curve starts at (0,0) for the +inf sentinel and ends at (1,1) at the
    minimum score.
    """
    y = np.asarray(labels, dtype=np.int64)
    s = np.asarray(scores, dtype=np.float64)
    if y.shape != s.shape:
        raise LengthMismatch(f"{len(y)} labels vs {len(s)} scores")
    if len(y) < 1:
        raise LengthMismatch("need at least one sample")
    pos = _positive_value(positive_class)
    y_pos = y == pos
    n_pos = int(np.sum(y_pos))
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClassError("ROC needs at least one sample of each class")

    order = np.argsort(-s, kind="stable")
    s_sorted = s[order]
    y_sorted = y_pos[order]
    points: list[tuple[float, float, float]] = [(0.0, 0.0, float("inf"))]
    tp = 0
    fp = 0
    idx = 0
    n = len(y)
    while idx < n:
        threshold = s_sorted[idx]
        while idx < n and s_sorted[idx] == threshold:
            if y_sorted[idx]:
                tp += 1
            else:
                fp += 1
            idx += 1
        points.append((fp / n_neg, tp / n_pos, float(threshold)))
    return RocCurve(tuple(points))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under the ROC curve.

    Equals the probability that a positive outscores a negative, counting
    ties as one half.
    """
    area = 0.0
    pts = curve.points
    for (fpr0, tpr0, _), (fpr1, tpr1, _) in zip(pts, pts[1:]):
        area += (fpr1 - fpr0) * (tpr0 + tpr1) / 2.0
    return area


def _fmt(value: float | None) -> str:
    return "undefined" if value is None else repr(value)


def confusion_to_csv(cm: ConfusionMatrix, path: str | Path) -> None:
    lines = ["positive_class,tp,fp,fn,tn", f"{cm.positive_class},{cm.tp},{cm.fp},{cm.fn},{cm.tn}"]
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def metrics_to_csv(report: MetricReport, path: str | Path) -> None:
    lines = ["metric,value"]
    for name in ("accuracy", "precision", "recall", "f1", "auc"):
        value = getattr(report, name)
        if name == "auc" and value is None:
            continue  # reports without a score sweep simply omit the row
        lines.append(f"{name},{_fmt(value)}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))


def roc_to_csv(curve: RocCurve, path: str | Path) -> None:
    lines = ["fpr,tpr,threshold"]
    for fpr, tpr, threshold in curve.points:
        lines.append(f"{fpr!r},{tpr!r},{threshold!r}")
    Path(path).write_bytes(("\n".join(lines) + "\n").encode("utf-8"))
