"""Confusion-matrix segmentation metrics (mIoU, mAcc)."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import EmptyEvaluation, InvalidInput, ShapeError
from .imagecore import LabelMap


@dataclass(frozen=True, eq=False)
class ConfusionMatrix:
    counts: np.ndarray  # [gt, pred]

    @classmethod
    def zeros(cls, classes: int) -> "ConfusionMatrix":
        return cls(np.zeros((classes, classes), dtype=np.int64))

    @property
    def classes(self) -> int:
        return self.counts.shape[0]

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    def __add__(self, other: "ConfusionMatrix") -> "ConfusionMatrix":
        return ConfusionMatrix(self.counts + other.counts)

    def __eq__(self, other):
        return isinstance(other, ConfusionMatrix) and np.array_equal(self.counts, other.counts)

    def present(self) -> np.ndarray:
        return (self.counts.sum(axis=1) + self.counts.sum(axis=0)) > 0

    def iou(self) -> np.ndarray:
        """Per-class IoU; NaN for classes absent from both GT and prediction."""
        diag = np.diag(self.counts).astype(np.float64)
        union = self.counts.sum(axis=1) + self.counts.sum(axis=0) - diag
        with np.errstate(invalid="ignore", divide="ignore"):
            return np.where(self.present(), diag / union, np.nan)

    def acc(self) -> np.ndarray:
        """Per-class recall; NaN for absent classes, 0 for predicted-only ones."""
        diag = np.diag(self.counts).astype(np.float64)
        rows = self.counts.sum(axis=1)
        with np.errstate(invalid="ignore", divide="ignore"):
            acc = np.where(rows > 0, diag / rows, 0.0)
        return np.where(self.present(), acc, np.nan)


def accumulate(cm: ConfusionMatrix, pred, gt: LabelMap) -> ConfusionMatrix:
    p = pred.data if isinstance(pred, LabelMap) else np.asarray(pred)
    if p.shape != gt.shape:
        raise ShapeError(f"prediction {p.shape} vs ground truth {gt.shape}")
    if gt.classes != cm.classes or (isinstance(pred, LabelMap) and pred.classes != cm.classes):
        raise ShapeError("class count mismatch")
    keep = gt.valid()
    g, q = gt.data[keep], p[keep].astype(np.int64)
    if ((q < 0) | (q >= cm.classes)).any():
        raise InvalidInput("prediction id outside the class range")
    add = np.bincount(g * cm.classes + q, minlength=cm.classes ** 2)
    return ConfusionMatrix(cm.counts + add.reshape(cm.classes, cm.classes))


def _check(cm: ConfusionMatrix):
    if cm.total == 0:
        raise EmptyEvaluation("confusion matrix is empty")


def miou(cm: ConfusionMatrix) -> float:
    _check(cm)
    return float(np.nanmean(cm.iou()))


def macc(cm: ConfusionMatrix) -> float:
    _check(cm)
    return float(np.nanmean(cm.acc()))


def metrics_csv(cm: ConfusionMatrix, names=None) -> str:
    """``class,iou,acc`` rows, then ``mIoU,<v>`` and ``mAcc,<v>`` (4 decimals)."""
    _check(cm)
    lines = ["class,iou,acc"]
    names = names or [str(c) for c in range(cm.classes)]
    for name, i, a in zip(names, cm.iou(), cm.acc()):
        fmt = lambda v: "nan" if np.isnan(v) else f"{v:.4f}"
        lines.append(f"{name},{fmt(i)},{fmt(a)}")
    lines.append(f"mIoU,{miou(cm):.4f}")
    lines.append(f"mAcc,{macc(cm):.4f}")
    return "\n".join(lines) + "\n"
