"""Evaluation: ROC-AUC, exact and within-one accuracy, confusion matrices."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import DimensionError, DomainError, UndefinedAUCError


def auc(scores, labels) -> float:
    """Mann-Whitney AUC: chance a random positive outscores a random negative, ties worth 1/2."""
    s = np.asarray(scores, dtype=np.float64).reshape(-1)
    y = np.asarray(labels).reshape(-1)
    if len(s) != len(y):
        raise DimensionError("scores and labels differ in length")
    pos = y == 1
    n_pos = int(pos.sum())
    n_neg = len(y) - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedAUCError("AUC needs at least one positive and one negative label")

    order = np.argsort(s, kind="mergesort")
    sorted_s = s[order]
    # midranks (1-based) for tied blocks
    starts = np.flatnonzero(np.r_[True, sorted_s[1:] != sorted_s[:-1]])
    ends = np.r_[starts[1:], len(s)]
    block_rank = (starts + ends + 1) / 2.0
    ranks = np.empty(len(s))
    ranks[order] = np.repeat(block_rank, ends - starts)
    u = ranks[pos].sum() - n_pos * (n_pos + 1) / 2.0
    return float(u / (n_pos * n_neg))


def _check_pair(pred, truth):
    p = np.asarray(pred, dtype=np.int64).reshape(-1)
    t = np.asarray(truth, dtype=np.int64).reshape(-1)
    if len(p) != len(t):
        raise DomainError(f"length mismatch: {len(p)} predictions, {len(t)} labels")
    if len(p) == 0:
        raise DomainError("no predictions to score")
    return p, t


def exact_match(pred, truth) -> float:
    p, t = _check_pair(pred, truth)
    return 100.0 * np.count_nonzero(p == t) / len(t)


def within_one(pred, truth) -> float:
    p, t = _check_pair(pred, truth)
    return 100.0 * np.count_nonzero(np.abs(p - t) <= 1) / len(t)


def confusion_matrix(pred, truth, num_classes: int) -> np.ndarray:
    """Rows are true grades, columns predicted grades (both 1-based, stored 0-based)."""
    p, t = _check_pair(pred, truth)
    for name, v in (("prediction", p), ("truth", t)):
        if v.min() < 1 or v.max() > num_classes:
            raise DomainError(f"{name} grade outside [1, {num_classes}]")
    cm = np.zeros((num_classes, num_classes), dtype=np.int64)
    np.add.at(cm, (t - 1, p - 1), 1)
    return cm


@dataclass(frozen=True, eq=False)
class EvalReport:
    """Per-grade and sample-weighted average accuracies (percent).

    Grades absent from the truth vector map to ``None`` in the per-grade tables.
    """

    num_classes: int
    confusion: np.ndarray
    per_grade_exact: dict
    per_grade_within_one: dict
    average_exact: float
    average_within_one: float

    @property
    def n(self) -> int:
        return int(self.confusion.sum())

    def grade_counts(self) -> list[int]:
        return self.confusion.sum(axis=1).tolist()

    def recall_of(self, grades) -> float | None:
        """Pooled exact-match rate over the given grades, or None if none occur."""
        idx = [g - 1 for g in grades]
        total = int(self.confusion[idx].sum())
        if total == 0:
            return None
        return 100.0 * int(sum(self.confusion[i, i] for i in idx)) / total

    def to_dict(self) -> dict:
        return {
            "num_classes": self.num_classes,
            "n": self.n,
            "per_grade_exact": {str(g): v for g, v in self.per_grade_exact.items()},
            "per_grade_within_one": {str(g): v for g, v in self.per_grade_within_one.items()},
            "average_exact": self.average_exact,
            "average_within_one": self.average_within_one,
            "confusion": self.confusion.tolist(),
        }

    @classmethod
    def from_confusion(cls, confusion) -> "EvalReport":
        cm = np.asarray(confusion, dtype=np.int64)
        n_cls = cm.shape[0]
        rows = cm.sum(axis=1)
        exact, within = {}, {}
        near = 0
        for g in range(n_cls):
            lo, hi = max(g - 1, 0), min(g + 1, n_cls - 1)
            ok = int(cm[g, lo:hi + 1].sum())
            near += ok
            if rows[g] == 0:
                exact[g + 1] = within[g + 1] = None
            else:
                exact[g + 1] = 100.0 * int(cm[g, g]) / int(rows[g])
                within[g + 1] = 100.0 * ok / int(rows[g])
        total = int(rows.sum())
        if total == 0:
            raise DomainError("empty confusion matrix")
        return cls(n_cls, cm, exact, within, 100.0 * int(np.trace(cm)) / total, 100.0 * near / total)

    @classmethod
    def from_dict(cls, d: dict) -> "EvalReport":
        return cls.from_confusion(d["confusion"])


def build_report(pred, truth, num_classes: int) -> EvalReport:
    return EvalReport.from_confusion(confusion_matrix(pred, truth, num_classes))
