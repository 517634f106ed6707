"""External clustering quality scores computed from a contingency table.

Cluster indices carry no semantics, so every score here is invariant to
relabeling of either argument (accuracy via explicit matching, the
information-theoretic scores by construction).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment


def _as_label_vector(labels, name: str) -> np.ndarray:
    out = np.asarray(labels)
    if out.ndim != 1 or out.size == 0:
        raise ValueError(f"{name} must be a non-empty 1-D array")
    if not np.issubdtype(out.dtype, np.integer):
        cast = out.astype(np.int64)
        if np.any(cast != out):
            raise ValueError(f"{name} must hold integers")
        out = cast
    if out.min() < 0:
        raise ValueError(f"{name} must be non-negative")
    return out.astype(np.int64)


def contingency_table(labels_true, labels_pred) -> np.ndarray:
    """Counts[i, j] = samples with true label i and predicted label j."""
    t = _as_label_vector(labels_true, "labels_true")
    p = _as_label_vector(labels_pred, "labels_pred")
    if t.shape != p.shape:
        raise ValueError("label vectors must have equal length")
    table = np.zeros((int(t.max()) + 1, int(p.max()) + 1), dtype=np.int64)
    np.add.at(table, (t, p), 1)
    return table


def accuracy_dominating(labels_true, labels_pred) -> float:
    """Each predicted cluster adopts its most frequent true class.

    Ties go to the lowest class index (argmax convention). Distinct clusters
    may map to the same class, so this is an upper bound on matched accuracy.
    """
    table = contingency_table(labels_true, labels_pred)
    return float(table.max(axis=0).sum()) / float(len(np.asarray(labels_true)))


def accuracy_optimal(labels_true, labels_pred) -> float:
    """Best one-to-one cluster-to-class matching (maximum-weight assignment)."""
    table = contingency_table(labels_true, labels_pred)
    rows, cols = linear_sum_assignment(table, maximize=True)
    return float(table[rows, cols].sum()) / float(len(np.asarray(labels_true)))


def _entropy(counts: np.ndarray) -> float:
    p = counts[counts > 0].astype(np.float64)
    p /= p.sum()
    return float(-np.sum(p * np.log(p)))


def nmi(labels_true, labels_pred) -> float:
    """Mutual information over the arithmetic mean of the two entropies.

    Natural logarithms throughout. If both partitions are single-cluster they
    are identical and score 1.0; if exactly one is constant there is nothing
    shared and the score is 0.0.
    """
    table = contingency_table(labels_true, labels_pred).astype(np.float64)
    n = table.sum()
    row = table.sum(axis=1)
    col = table.sum(axis=0)
    h_true = _entropy(row)
    h_pred = _entropy(col)
    if h_true == 0.0 and h_pred == 0.0:
        return 1.0
    if h_true == 0.0 or h_pred == 0.0:
        return 0.0
    nz = table > 0
    joint = table[nz] / n
    outer = np.outer(row, col)[nz] / (n * n)
    mi = float(np.sum(joint * np.log(joint / outer)))
    mi = max(mi, 0.0)
    return mi / (0.5 * (h_true + h_pred))


def _pairs(counts: np.ndarray) -> float:
    c = counts.astype(np.float64)
    return float(np.sum(c * (c - 1.0) / 2.0))


def ari(labels_true, labels_pred) -> float:
    """Pair-counting agreement, rescaled so chance sits at 0.

    When the maximum index equals its expectation (e.g. both partitions are
    all-singletons or both single-cluster) the score is defined as 1.0.
    """
    table = contingency_table(labels_true, labels_pred)
    n = int(np.asarray(labels_true).size)
    index = _pairs(table)
    sum_rows = _pairs(table.sum(axis=1))
    sum_cols = _pairs(table.sum(axis=0))
    total_pairs = n * (n - 1) / 2.0
    expected = sum_rows * sum_cols / total_pairs if total_pairs > 0 else 0.0
    max_index = 0.5 * (sum_rows + sum_cols)
    if max_index == expected:
        return 1.0
    return (index - expected) / (max_index - expected)


@dataclass(frozen=True)
class ClusteringReport:
    acc_dominating: float
    acc_optimal: float
    nmi: float
    ari: float


def score_clustering(labels_true, labels_pred) -> ClusteringReport:
    return ClusteringReport(
        acc_dominating=accuracy_dominating(labels_true, labels_pred),
        acc_optimal=accuracy_optimal(labels_true, labels_pred),
        nmi=nmi(labels_true, labels_pred),
        ari=ari(labels_true, labels_pred),
    )


METRICS_HEADER = "epoch,sample_loss,class_loss,total_loss,acc_dominating,acc_optimal,nmi,ari"


def format_metrics_row(epoch: int, sample_loss: float, class_loss: float,
                       total_loss: float, report: ClusteringReport) -> str:
    values = (sample_loss, class_loss, total_loss,
              report.acc_dominating, report.acc_optimal, report.nmi, report.ari)
    return str(epoch) + "," + ",".join(f"{v:.9g}" for v in values)
