"""ROC-based scoring of abnormality maps.

Frame level: a frame is predicted abnormal when its maximum map value
reaches the threshold. Pixel level: an abnormal frame counts as detected
only when the predicted region covers at least 40% of the ground-truth
region; a predicting frame that fails the overlap test, or any predicting
normal frame, counts as a false positive. Rates use the abnormal and normal
frame counts as denominators (the false-positive rate is capped at 1, since
overlap failures can push the count past the normal-frame total).
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Optional, Sequence, Union

import numpy as np

from .data import AbnormalityMap, GroundTruth
from .errors import InputError

OVERLAP_THRESHOLD = 0.40
SENTINEL_THRESHOLD = 2.0  # above every map value: forces the (0, 0) point
SWEEP_POINTS = 201

MapLike = Union[AbnormalityMap, np.ndarray]


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tpr: float
    fpr: float


@dataclass(frozen=True)
class RocCurve:
    """Operating points ordered by strictly decreasing threshold."""

    points: tuple[RocPoint, ...]

    def __post_init__(self):
        if not self.points:
            raise InputError("a ROC curve needs at least one point")
        for a, b in zip(self.points, self.points[1:]):
            if not b.threshold < a.threshold:
                raise InputError("thresholds must be strictly decreasing")
        for p in self.points:
            if not (0.0 <= p.tpr <= 1.0 and 0.0 <= p.fpr <= 1.0):
                raise InputError(f"rates must lie in [0,1], got {p}")


def _values(m: MapLike) -> np.ndarray:
    if isinstance(m, AbnormalityMap):
        return m.values
    return np.asarray(m, dtype=np.float64)


def default_thresholds(maps: Sequence[MapLike]) -> np.ndarray:
    """Strictly decreasing sweep: sentinel, 201 even steps on [0,1], and every
    distinct per-frame maximum (so the curve hits every attainable point)."""
    maxima = [float(_values(m).max()) for m in maps]
    grid = np.concatenate(
        [[SENTINEL_THRESHOLD], np.linspace(0.0, 1.0, SWEEP_POINTS), maxima]
    )
    return np.unique(grid)[::-1]


def frame_level_eval(
    maps: Sequence[MapLike],
    labels: Sequence[bool],
    thresholds: Optional[Sequence[float]] = None,
) -> RocCurve:
    """ROC over frames, predicting on the per-frame maximum map value."""
    if len(maps) != len(labels):
        raise InputError(f"{len(maps)} maps vs {len(labels)} labels")
    if not maps:
        raise InputError("cannot evaluate an empty sequence")
    if thresholds is None:
        thresholds = default_thresholds(maps)
    peak = np.array([float(_values(m).max()) for m in maps])
    truth = np.asarray(labels, dtype=bool)
    n_pos = max(int(truth.sum()), 1)
    n_neg = max(int((~truth).sum()), 1)
    points = []
    for theta in thresholds:
        pred = peak >= theta
        tp = int((pred & truth).sum())
        fp = int((pred & ~truth).sum())
        points.append(RocPoint(float(theta), tp / n_pos, fp / n_neg))
    return RocCurve(tuple(points))


def pixel_level_eval(
    maps: Sequence[MapLike],
    gts: Sequence[GroundTruth],
    thresholds: Optional[Sequence[float]] = None,
) -> RocCurve:
    """ROC over frames under the 40%-overlap localization rule."""
    if len(maps) != len(gts):
        raise InputError(f"{len(maps)} maps vs {len(gts)} ground-truth entries")
    if not maps:
        raise InputError("cannot evaluate an empty sequence")
    if thresholds is None:
        thresholds = default_thresholds(maps)

    frames = []
    for k, (m, gt) in enumerate(zip(maps, gts)):
        values = _values(m)
        if gt.frame_label:
            if gt.pixel_mask is None:
                raise InputError(f"frame {k}: abnormal frame without a pixel mask")
            if gt.pixel_mask.shape != values.shape:
                raise InputError(
                    f"frame {k}: mask shape {gt.pixel_mask.shape} "
                    f"!= map shape {values.shape}"
                )
            inside = np.sort(values[gt.pixel_mask])
            frames.append((True, float(values.max()), inside))
        else:
            frames.append((False, float(values.max()), None))

    truth = np.array([f[0] for f in frames])
    n_pos = max(int(truth.sum()), 1)
    n_neg = max(int((~truth).sum()), 1)
    points = []
    for theta in thresholds:
        tp = fp = 0
        for abnormal, peak, inside in frames:
            predicts = peak >= theta
            if abnormal:
                covered = inside.size - int(np.searchsorted(inside, theta, "left"))
                if covered / inside.size >= OVERLAP_THRESHOLD:
                    tp += 1
                elif predicts:
                    fp += 1
            elif predicts:
                fp += 1
        points.append(RocPoint(float(theta), tp / n_pos, min(fp / n_neg, 1.0)))
    return RocCurve(tuple(points))


def auc(curve: RocCurve) -> float:
    """Trapezoidal area under TPR over FPR, integrated in curve order."""
    if len(curve.points) < 2:
        raise InputError("AUC needs at least two curve points")
    total = 0.0
    for a, b in zip(curve.points, curve.points[1:]):
        total += (b.fpr - a.fpr) * (a.tpr + b.tpr) / 2.0
    return total


def eer(curve: RocCurve) -> float:
    """Rate where FPR equals 1 - TPR, linearly interpolated between points."""
    if len(curve.points) < 2:
        raise InputError("EER needs at least two curve points")

    def gap(p: RocPoint) -> float:
        return p.fpr - (1.0 - p.tpr)

    for a, b in zip(curve.points, curve.points[1:]):
        ga, gb = gap(a), gap(b)
        if ga == 0.0:
            return a.fpr
        if ga < 0.0 <= gb or gb < 0.0 <= ga:
            df, dt = b.fpr - a.fpr, b.tpr - a.tpr
            if df + dt == 0.0:
                return (a.fpr + b.fpr) / 2.0
            s = (1.0 - a.tpr - a.fpr) / (df + dt)
            return a.fpr + s * df
    last = curve.points[-1]
    if gap(last) == 0.0:
        return last.fpr
    raise InputError("curve never crosses the FPR = 1 - TPR diagonal")


def make_report(curve: RocCurve) -> dict:
    """JSON-ready summary: AUC, EER, and the full operating-point list."""
    return {
        "auc": auc(curve),
        "eer": eer(curve),
        "roc": [
            {"threshold": p.threshold, "tpr": p.tpr, "fpr": p.fpr}
            for p in curve.points
        ],
    }
