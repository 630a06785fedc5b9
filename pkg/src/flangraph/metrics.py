"""Evaluation metrics: rank-based AUC, Macro-F1, seed aggregation."""

from __future__ import annotations

import json
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import EmptyInput, SingleClass


@dataclass(frozen=True)
class EvalReport:
    auc: float
    macro_f1: float
    confusion: tuple[int, int, int, int]  # tp, fp, tn, fn at the threshold
    n: int

    def __post_init__(self):
        if sum(self.confusion) != self.n:
            raise ValueError("confusion counts must sum to n")
        for value in (self.auc, self.macro_f1):
            if not 0.0 <= value <= 1.0:
                raise ValueError("metrics must lie in [0, 1]")

    def to_dict(self) -> dict:
        tp, fp, tn, fn = self.confusion
        return {
            "auc": self.auc,
            "macro_f1": self.macro_f1,
            "confusion": {"tp": tp, "fp": fp, "tn": tn, "fn": fn},
            "n": self.n,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, separators=(",", ":"))


def _check_inputs(scores: Sequence[float], labels: Sequence[int]) -> tuple[np.ndarray, np.ndarray]:
    if len(scores) != len(labels):
        raise ValueError("scores and labels differ in length")
    if len(scores) == 0:
        raise EmptyInput("no scores to evaluate")
    s = np.asarray(scores, dtype=np.float64)
    y = np.asarray(labels)
    if not set(np.unique(y)) <= {0, 1}:
        raise ValueError("labels must be 0 or 1")
    return s, y


def roc_auc(scores: Sequence[float], labels: Sequence[int]) -> float:
    """Mann-Whitney AUC with half credit for ties, via average ranks.

    Equals P(score_pos > score_neg) + 0.5 * P(score_pos == score_neg) over
    all positive/negative pairs, computed in O(n log n).
    """
    s, y = _check_inputs(scores, labels)
    pos = int(y.sum())
    neg = len(y) - pos
    if pos == 0 or neg == 0:
        raise SingleClass("AUC needs both classes present")
    order = np.argsort(s, kind="mergesort")
    ranks = np.empty(len(s))
    sorted_scores = s[order]
    i = 0
    while i < len(s):
        j = i
        while j + 1 < len(s) and sorted_scores[j + 1] == sorted_scores[i]:
            j += 1
        ranks[order[i: j + 1]] = (i + j) / 2.0 + 1.0  # average rank, 1-based
        i = j + 1
    rank_sum_pos = float(ranks[y == 1].sum())
    u = rank_sum_pos - pos * (pos + 1) / 2.0
    return u / (pos * neg)


def confusion_counts(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> tuple[int, int, int, int]:
    s, y = _check_inputs(scores, labels)
    pred = s >= threshold
    tp = int(np.sum(pred & (y == 1)))
    fp = int(np.sum(pred & (y == 0)))
    tn = int(np.sum(~pred & (y == 0)))
    fn = int(np.sum(~pred & (y == 1)))
    return tp, fp, tn, fn


def _f1(tp: int, predicted: int, actual: int) -> float:
    if predicted == 0 and actual == 0:
        return 1.0  # vacuous class: no such predictions, no such truth
    if tp == 0:
        return 0.0
    precision = tp / predicted
    recall = tp / actual
    return 2 * precision * recall / (precision + recall)


def macro_f1(scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5) -> float:
    """Unweighted mean of per-class F1 at the given threshold."""
    tp, fp, tn, fn = confusion_counts(scores, labels, threshold)
    f1_pos = _f1(tp, tp + fp, tp + fn)
    f1_neg = _f1(tn, tn + fn, tn + fp)
    return (f1_pos + f1_neg) / 2.0


def evaluate(
    scores: Sequence[float], labels: Sequence[int], threshold: float = 0.5
) -> EvalReport:
    return EvalReport(
        auc=roc_auc(scores, labels),
        macro_f1=macro_f1(scores, labels, threshold),
        confusion=confusion_counts(scores, labels, threshold),
        n=len(scores),
    )


def aggregate_seeds(reports: Sequence[EvalReport]) -> dict[str, tuple[float, float]]:
    """Mean and sample standard deviation (n-1; zero for a single report)."""
    if not reports:
        raise EmptyInput("no reports to aggregate")

    def stats(values: list[float]) -> tuple[float, float]:
        arr = np.asarray(values)
        std = float(arr.std(ddof=1)) if len(arr) > 1 else 0.0
        return float(arr.mean()), std

    return {
        "auc": stats([r.auc for r in reports]),
        "macro_f1": stats([r.macro_f1 for r in reports]),
    }
