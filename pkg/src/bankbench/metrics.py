"""Rank metrics for rare-event binary classifiers.

Every metric here consumes a set of scored samples (higher score = more
suspicious) together with binary labels, and none of them depends on a
decision threshold.  Tie handling is pinned so that results are exactly
reproducible across runs and platforms:

- ROC AUC uses the Mann-Whitney statistic with average ranks for ties.
- Average precision groups samples sharing a score into one threshold step.
- recall@k resolves ties at the cut boundary by stable input order.
- The CAP ratio and decile ranks sort descending with a stable sort, so
  tied scores keep their input order as well.
"""

from __future__ import annotations

import dataclasses
import json

import numpy as np

__all__ = [
    "RankedPredictions",
    "MetricsReport",
    "roc_auc",
    "average_precision",
    "recall_at_k",
    "cap_ratio",
    "decile_ranks",
    "compute_report",
    "roc_curve",
    "cap_curve",
    "write_roc_csv",
    "write_cap_csv",
]


@dataclasses.dataclass(frozen=True)
class RankedPredictions:
    """Scores and binary labels for one evaluation set, in input order."""

    scores: np.ndarray
    labels: np.ndarray

    def __post_init__(self) -> None:
        scores = np.asarray(self.scores, dtype=np.float64)
        labels = np.asarray(self.labels, dtype=np.int64)
        if scores.ndim != 1 or labels.ndim != 1:
            raise ValueError("scores and labels must be one-dimensional")
        if scores.shape[0] != labels.shape[0]:
            raise ValueError(
                f"length mismatch: {scores.shape[0]} scores vs {labels.shape[0]} labels"
            )
        if scores.shape[0] == 0:
            raise ValueError("empty prediction set")
        if not np.all(np.isfinite(scores)):
            raise ValueError("scores must be finite")
        if not np.all((labels == 0) | (labels == 1)):
            raise ValueError("labels must be 0 or 1")
        object.__setattr__(self, "scores", scores)
        object.__setattr__(self, "labels", labels)

    def __len__(self) -> int:
        return int(self.scores.shape[0])

    @property
    def n_pos(self) -> int:
        return int(self.labels.sum())

    @property
    def n_neg(self) -> int:
        return len(self) - self.n_pos


def _require_both_classes(preds: RankedPredictions, metric: str) -> None:
    if preds.n_pos == 0 or preds.n_neg == 0:
        raise ValueError(f"{metric} is undefined when only one class is present")


def _average_ranks(scores: np.ndarray) -> np.ndarray:
    """1-based ranks (ascending), tied scores sharing the mean of their range."""
    _, inverse, counts = np.unique(scores, return_inverse=True, return_counts=True)
    group_starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    group_mean_rank = group_starts + (counts + 1) / 2.0
    return group_mean_rank[inverse]


def _descending_order(scores: np.ndarray) -> np.ndarray:
    """Indices sorting scores descending; ties keep input order."""
    return np.argsort(-scores, kind="stable")


def roc_auc(preds: RankedPredictions) -> float:
    """Area under the ROC curve via the Mann-Whitney U statistic.

    Equal to the probability that a uniformly drawn positive outscores a
    uniformly drawn negative, counting ties as one half.
    """
    _require_both_classes(preds, "roc_auc")
    ranks = _average_ranks(preds.scores)
    n_pos = preds.n_pos
    rank_sum_pos = float(ranks[preds.labels == 1].sum())
    u = rank_sum_pos - n_pos * (n_pos + 1) / 2.0
    return u / (n_pos * preds.n_neg)


def average_precision(preds: RankedPredictions) -> float:
    """Area under the precision-recall curve, stepped at distinct scores.

    Samples sharing a score enter together: precision and recall are only
    evaluated at group boundaries, so permuting tied samples cannot change
    the result.
    """
    if preds.n_pos == 0:
        raise ValueError("average_precision is undefined without positives")
    order = _descending_order(preds.scores)
    sorted_scores = preds.scores[order]
    sorted_labels = preds.labels[order]
    n = len(preds)
    # last index of each tie group, in descending-score order
    boundaries = np.flatnonzero(
        np.concatenate((sorted_scores[1:] != sorted_scores[:-1], [True]))
    )
    tp = np.cumsum(sorted_labels)[boundaries].astype(np.float64)
    ranked = (boundaries + 1).astype(np.float64)  # samples at or above threshold
    precision = tp / ranked
    recall = tp / preds.n_pos
    recall_steps = np.diff(np.concatenate(([0.0], recall)))
    return float(np.sum(recall_steps * precision))


def recall_at_k(preds: RankedPredictions, k: int) -> float:
    """Fraction of positives inside the top ``k`` by score.

    Ties crossing the boundary are resolved by stable input order; ``k``
    larger than the set size is clipped to the set size.
    """
    if k <= 0:
        raise ValueError("k must be positive")
    if preds.n_pos == 0:
        raise ValueError("recall_at_k is undefined without positives")
    k = min(k, len(preds))
    top = _descending_order(preds.scores)[:k]
    return float(preds.labels[top].sum()) / preds.n_pos


def cap_ratio(preds: RankedPredictions) -> float:
    """Accuracy ratio from the cumulative accuracy profile.

    The CAP plots the fraction of positives found against the fraction of
    the population ranked (descending by score).  With trapezoidal area A,
    prevalence pi, and the perfect model's area 1 - pi/2, the ratio is
    (A - 1/2) / ((1 - pi/2) - 1/2).  For tie-free scores this equals
    2 * AUC - 1.
    """
    _require_both_classes(preds, "cap_ratio")
    n = len(preds)
    order = _descending_order(preds.scores)
    found = np.concatenate(([0.0], np.cumsum(preds.labels[order]) / preds.n_pos))
    area = float(np.sum((found[1:] + found[:-1]) / 2.0)) / n
    pi = preds.n_pos / n
    perfect_area = 1.0 - pi / 2.0
    return (area - 0.5) / (perfect_area - 0.5)


def decile_ranks(preds: RankedPredictions) -> tuple[float, ...]:
    """Cumulative share of positives found in each score decile.

    The i-th entry is the fraction of all positives ranked within the top
    ceil(i*n/10) samples; the tenth entry is therefore always 1.0.
    """
    if preds.n_pos == 0:
        raise ValueError("decile_ranks is undefined without positives")
    n = len(preds)
    order = _descending_order(preds.scores)
    cumulative = np.cumsum(preds.labels[order])
    bounds = [int(np.ceil(i * n / 10.0)) for i in range(1, 11)]
    return tuple(float(cumulative[b - 1]) / preds.n_pos for b in bounds)


@dataclasses.dataclass(frozen=True)
class MetricsReport:
    """All five benchmark metrics for one evaluation set."""

    auc: float
    ap: float
    recall_at_k: float
    k: int
    cap_ratio: float
    cumulative_decile: tuple[float, ...]
    n: int
    n_pos: int

    def to_dict(self) -> dict:
        return {
            "auc": self.auc,
            "ap": self.ap,
            "recall_at_k": self.recall_at_k,
            "k": self.k,
            "cap_ratio": self.cap_ratio,
            "cumulative_decile": list(self.cumulative_decile),
            "n": self.n,
            "n_pos": self.n_pos,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)

    @classmethod
    def from_dict(cls, payload: dict) -> "MetricsReport":
        return cls(
            auc=float(payload["auc"]),
            ap=float(payload["ap"]),
            recall_at_k=float(payload["recall_at_k"]),
            k=int(payload["k"]),
            cap_ratio=float(payload["cap_ratio"]),
            cumulative_decile=tuple(float(v) for v in payload["cumulative_decile"]),
            n=int(payload["n"]),
            n_pos=int(payload["n_pos"]),
        )

    @classmethod
    def from_json(cls, text: str) -> "MetricsReport":
        return cls.from_dict(json.loads(text))


def compute_report(preds: RankedPredictions, k: int = 100) -> MetricsReport:
    """Evaluate all five metrics at once."""
    return MetricsReport(
        auc=roc_auc(preds),
        ap=average_precision(preds),
        recall_at_k=recall_at_k(preds, k),
        k=min(k, len(preds)),
        cap_ratio=cap_ratio(preds),
        cumulative_decile=decile_ranks(preds),
        n=len(preds),
        n_pos=preds.n_pos,
    )


def roc_curve(preds: RankedPredictions) -> tuple[np.ndarray, np.ndarray]:
    """ROC points (fpr, tpr), one per distinct score, starting at (0, 0)."""
    _require_both_classes(preds, "roc_curve")
    order = _descending_order(preds.scores)
    sorted_scores = preds.scores[order]
    sorted_labels = preds.labels[order]
    boundaries = np.flatnonzero(
        np.concatenate((sorted_scores[1:] != sorted_scores[:-1], [True]))
    )
    tp = np.cumsum(sorted_labels)[boundaries]
    fp = (boundaries + 1) - tp
    tpr = np.concatenate(([0.0], tp / preds.n_pos))
    fpr = np.concatenate(([0.0], fp / preds.n_neg))
    return fpr, tpr


def cap_curve(preds: RankedPredictions) -> tuple[np.ndarray, np.ndarray]:
    """CAP points (fraction ranked, fraction of positives found), from (0, 0)."""
    if preds.n_pos == 0:
        raise ValueError("cap_curve is undefined without positives")
    n = len(preds)
    order = _descending_order(preds.scores)
    found = np.concatenate(([0.0], np.cumsum(preds.labels[order]) / preds.n_pos))
    ranked = np.arange(n + 1) / n
    return ranked, found


def write_roc_csv(preds: RankedPredictions, path) -> None:
    fpr, tpr = roc_curve(preds)
    _write_curve_csv(path, "fpr,tpr", fpr, tpr)


def write_cap_csv(preds: RankedPredictions, path) -> None:
    ranked, found = cap_curve(preds)
    _write_curve_csv(path, "frac_ranked,frac_positives", ranked, found)


def _write_curve_csv(path, header: str, xs: np.ndarray, ys: np.ndarray) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(header + "\n")
        for x, y in zip(xs, ys):
            fh.write(f"{x:.10g},{y:.10g}\n")
