"""Classification metrics: confusion counts, ratio metrics, rank-based ROC AUC."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.stats import rankdata

from .errors import LengthMismatch, SingleClass


@dataclass(frozen=True)
class ConfusionMatrix:
    tp: int
    tn: int
    fp: int
    fn: int

    @property
    def total(self) -> int:
        return self.tp + self.tn + self.fp + self.fn


@dataclass(frozen=True)
class MetricsReport:
    accuracy: float
    precision: float
    recall: float
    f1: float
    fpr: float
    fnr: float
    error_rate: float
    auc: float | None = None

    def to_dict(self) -> dict:
        return {
            "accuracy": self.accuracy,
            "precision": self.precision,
            "recall": self.recall,
            "f1": self.f1,
            "fpr": self.fpr,
            "fnr": self.fnr,
            "error_rate": self.error_rate,
            "auc": self.auc,
            # 2-decimal display fields, percentage style for the error rates
            "display": {
                "fpr_pct": round(self.fpr * 100, 2),
                "fnr_pct": round(self.fnr * 100, 2),
                "f1": round(self.f1, 2),
                "accuracy": round(self.accuracy, 2),
                "auc": round(self.auc, 2) if self.auc is not None else None,
            },
        }


def confusion(labels, probabilities, threshold: float = 0.5) -> ConfusionMatrix:
    """Predict malicious iff p >= threshold (inclusive)."""
    labels = np.asarray(labels)
    probabilities = np.asarray(probabilities, dtype=float)
    if len(labels) != len(probabilities) or len(labels) == 0:
        raise LengthMismatch("labels and probabilities must align and be nonempty")
    pred = probabilities >= threshold
    pos = labels == 1
    return ConfusionMatrix(
        tp=int(np.sum(pred & pos)),
        tn=int(np.sum(~pred & ~pos)),
        fp=int(np.sum(pred & ~pos)),
        fn=int(np.sum(~pred & pos)),
    )


def classification_metrics(cm: ConfusionMatrix, auc: float | None = None) -> MetricsReport:
    total = cm.total
    if total <= 0:
        raise ValueError("empty confusion matrix")
    accuracy = (cm.tp + cm.tn) / total
    precision = cm.tp / (cm.tp + cm.fp) if (cm.tp + cm.fp) else 1.0
    recall = cm.tp / (cm.tp + cm.fn) if (cm.tp + cm.fn) else 1.0
    f1 = 2 * precision * recall / (precision + recall) if (precision + recall) else 0.0
    fpr = cm.fp / (cm.fp + cm.tn) if (cm.fp + cm.tn) else 0.0
    fnr = cm.fn / (cm.fn + cm.tp) if (cm.fn + cm.tp) else 0.0
    return MetricsReport(
        accuracy=accuracy,
        precision=precision,
        recall=recall,
        f1=f1,
        fpr=fpr,
        fnr=fnr,
        error_rate=1.0 - accuracy,
        auc=auc,
    )


def roc_auc(labels, scores) -> float:
    """Mann-Whitney rank AUC; tied scores contribute one half."""
    labels = np.asarray(labels)
    scores = np.asarray(scores, dtype=float)
    if len(labels) != len(scores):
        raise LengthMismatch("labels and scores must align")
    n_pos = int(np.sum(labels == 1))
    n_neg = len(labels) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise SingleClass("AUC needs both classes present")
    ranks = rankdata(scores)  # average ranks for ties
    rank_sum = float(np.sum(ranks[labels == 1]))
    return (rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)
