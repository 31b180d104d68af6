"""Binary classification metrics.

AUC is the Mann-Whitney statistic with ties counted as 1/2: the probability
that a random positive scores above a random negative, plus half the
probability of a tie. Two equivalent routes are implemented — exact pairwise
counting for small inputs and the rank-sum formula for large ones — and the
crossover is pinned at 10_000 samples.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DataError

_PAIRWISE_MAX_N = 10_000


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    fp: int
    tn: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.fp + self.tn + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    auc: float
    confusion: ConfusionMatrix

    def as_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "auc": self.auc,
            "confusion": {
                "tp": self.confusion.tp,
                "fp": self.confusion.fp,
                "tn": self.confusion.tn,
                "fn": self.confusion.fn,
            },
        }


def _validate(y_true: np.ndarray, other: np.ndarray, other_name: str) -> None:
    if y_true.shape != other.shape:
        raise DataError(
            f"y_true and {other_name} length mismatch: {y_true.shape} != {other.shape}"
        )
    if y_true.size == 0:
        raise DataError("metrics need at least one sample")
    if not np.isin(y_true, (0, 1)).all():
        raise DataError("y_true must contain only 0/1 labels")


def confusion_matrix(y_true, y_pred) -> ConfusionMatrix:
    y_true = np.asarray(y_true)
    y_pred = np.asarray(y_pred)
    _validate(y_true, y_pred, "y_pred")
    if not np.isin(y_pred, (0, 1)).all():
        raise DataError("y_pred must contain only 0/1 labels")
    return ConfusionMatrix(
        tp=int(np.sum((y_true == 1) & (y_pred == 1))),
        fp=int(np.sum((y_true == 0) & (y_pred == 1))),
        tn=int(np.sum((y_true == 0) & (y_pred == 0))),
        fn=int(np.sum((y_true == 1) & (y_pred == 0))),
    )


def _auc_pairwise(pos: np.ndarray, neg: np.ndarray) -> float:
    diff = pos[:, None] - neg[None, :]
    wins = np.sum(diff > 0) + 0.5 * np.sum(diff == 0)
    return float(wins / (len(pos) * len(neg)))


def _auc_ranksum(scores: np.ndarray, y_true: np.ndarray) -> float:
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    ranks = np.empty(len(scores), dtype=np.float64)
    i = 0
    while i < len(scores):
        j = i
        while j + 1 < len(scores) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i : j + 1]] = 0.5 * (i + j) + 1.0  # average 1-based rank
        i = j + 1
    n_pos = int(np.sum(y_true == 1))
    n_neg = len(scores) - n_pos
    rank_sum = float(ranks[y_true == 1].sum())
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def auc_score(y_true, scores) -> float:
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    _validate(y_true, scores, "scores")
    pos = scores[y_true == 1]
    neg = scores[y_true == 0]
    if len(pos) == 0 or len(neg) == 0:
        raise DataError("AUC needs at least one sample of each class")
    if len(scores) <= _PAIRWISE_MAX_N:
        return _auc_pairwise(pos, neg)
    return _auc_ranksum(scores, y_true)


def compute_metrics(y_true, scores, threshold: float = 0.5) -> MetricsReport:
    """Threshold scores at `threshold` (score >= threshold predicts positive)."""
    y_true = np.asarray(y_true)
    scores = np.asarray(scores, dtype=np.float64)
    _validate(y_true, scores, "scores")
    y_pred = (scores >= threshold).astype(np.int64)
    cm = confusion_matrix(y_true, y_pred)
    accuracy = (cm.tp + cm.tn) / cm.total
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 0.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 0.0
    f1 = (
        2.0 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    )
    try:
        auc = auc_score(y_true, scores)
    except DataError:
        auc = float("nan")  # single-class evaluation slice
    return MetricsReport(
        accuracy=float(accuracy),
        precision=float(precision),
        recall=float(recall),
        f1=float(f1),
        auc=auc,
        confusion=cm,
    )
