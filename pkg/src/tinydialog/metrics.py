"""Multi-class precision / recall / F1 and confusion matrices.

Conventions: per-class one-vs-rest counts; the weighted average weights
each class by its true-label support. Undefined ratios (zero
denominator) are scored 0, matching the usual zero-division convention.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Sequence

import numpy as np


@dataclass(frozen=True)
class ClassMetrics:
    precision: float
    recall: float
    f1: float
    support: int


@dataclass(frozen=True)
class EvaluationReport:
    labels: tuple[str, ...]
    per_class: dict[str, ClassMetrics]
    precision: float  # weighted
    recall: float
    f1: float
    accuracy: float
    confusion: np.ndarray  # rows true, cols predicted

    def to_json(self) -> dict:
        return {
            "labels": list(self.labels),
            "per_class": {
                k: {"precision": m.precision, "recall": m.recall,
                    "f1": m.f1, "support": m.support}
                for k, m in self.per_class.items()
            },
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "accuracy": self.accuracy,
            "confusion": self.confusion.astype(int).tolist(),
        }


def _ratio(num: float, den: float) -> float:
    return num / den if den else 0.0


def confusion_matrix(y_true: Sequence[str], y_pred: Sequence[str],
                     labels: Sequence[str] | None = None) -> tuple[tuple[str, ...], np.ndarray]:
    """Counts[i][j] = how often label i was predicted as label j.

    The label order is the sorted union of both sequences unless given.
    """
    if len(y_true) != len(y_pred):
        raise ValueError(f"length mismatch: {len(y_true)} true vs {len(y_pred)} predicted")
    if labels is None:
        labels = sorted(set(y_true) | set(y_pred))
    labels = tuple(labels)
    index = {lab: i for i, lab in enumerate(labels)}
    mat = np.zeros((len(labels), len(labels)), dtype=np.int64)
    for t, p in zip(y_true, y_pred):
        mat[index[t], index[p]] += 1
    return labels, mat


def classification_report(y_true: Sequence[str], y_pred: Sequence[str],
                          labels: Sequence[str] | None = None) -> EvaluationReport:
    if not y_true:
        raise ValueError("cannot score an empty label sequence")
    labels, mat = confusion_matrix(y_true, y_pred, labels)
    per_class = {}
    weighted = np.zeros(3)
    total = mat.sum()
    for i, lab in enumerate(labels):
        tp = mat[i, i]
        support = int(mat[i].sum())
        predicted = int(mat[:, i].sum())
        p = _ratio(tp, predicted)
        r = _ratio(tp, support)
        f1 = _ratio(2 * p * r, p + r)
        per_class[lab] = ClassMetrics(p, r, f1, support)
        weighted += support * np.array([p, r, f1])
    weighted /= total
    return EvaluationReport(
        labels=labels,
        per_class=per_class,
        precision=float(weighted[0]),
        recall=float(weighted[1]),
        f1=float(weighted[2]),
        accuracy=float(np.trace(mat) / total),
        confusion=mat,
    )


def weighted_f1(y_true: Sequence[str], y_pred: Sequence[str]) -> float:
    return classification_report(y_true, y_pred).f1
