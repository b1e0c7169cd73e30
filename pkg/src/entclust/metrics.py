"""Clustering quality scores: matching accuracy and mutual information.

Both scores see cluster labels as partition names, so any relabeling of
either argument leaves them unchanged.  Accuracy finds the best one-to-one
cluster matching; mutual information needs no matching at all.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .linalg import as_label_vector

__all__ = ["MetricsReport", "hungarian", "contingency", "acc", "nmi"]


@dataclass(frozen=True)
class MetricsReport:
    acc: float
    nmi: float
    n: int
    k_true: int
    k_pred: int
    seed: int

    def __post_init__(self):
        if not (0.0 <= self.acc <= 1.0):
            raise ValueError(f"acc must lie in [0, 1], got {self.acc}")
        if not (0.0 <= self.nmi <= 1.0):
            raise ValueError(f"nmi must lie in [0, 1], got {self.nmi}")
        if self.n < 1:
            raise ValueError(f"sample count must be >= 1, got {self.n}")
        if self.k_true < 1 or self.k_pred < 1:
            raise ValueError(
                f"cluster counts must be >= 1, got k_true={self.k_true} k_pred={self.k_pred}"
            )


def hungarian(cost) -> np.ndarray:
    """Permutation p minimizing sum_i cost[i, p[i]] over a square matrix."""
    cost = np.asarray(cost, dtype=np.float64)
    if cost.ndim != 2 or cost.shape[0] != cost.shape[1]:
        raise ValueError(f"cost matrix must be square, got shape {cost.shape}")
    if not np.all(np.isfinite(cost)):
        raise ValueError("cost matrix contains non-finite entries")
    rows, cols = linear_sum_assignment(cost)
    perm = np.empty(cost.shape[0], dtype=np.int64)
    perm[rows] = cols
    return perm


def contingency(truth, pred) -> np.ndarray:
    """Count matrix over distinct label values (rows: truth, cols: pred)."""
    truth = as_label_vector(truth, "truth labels")
    pred = as_label_vector(pred, "predicted labels")
    if truth.size != pred.size:
        raise ValueError(
            f"label length mismatch: truth has {truth.size}, prediction has {pred.size}"
        )
    _, ti = np.unique(truth, return_inverse=True)
    _, pi = np.unique(pred, return_inverse=True)
    counts = np.zeros((ti.max() + 1, pi.max() + 1), dtype=np.int64)
    np.add.at(counts, (ti, pi), 1)
    return counts


def acc(truth, pred) -> float:
    """Fraction of samples matched under the best cluster-to-cluster map.

    The contingency table is padded square over max(k_true, k_pred) so the
    assignment always exists; maximizing matches is minimizing negated
    counts.
    """
    counts = contingency(truth, pred)
    k = max(counts.shape)
    padded = np.zeros((k, k), dtype=np.float64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    perm = hungarian(-padded)
    matched = padded[np.arange(k), perm].sum()
    return float(matched / counts.sum())


def nmi(truth, pred) -> float:
    """Mutual information over the geometric mean of partition entropies.

    Natural logarithm throughout; empty contingency cells contribute 0.
    Single-cluster partitions are rejected because a zero-entropy factor
    makes the normalization undefined.
    """
    counts = contingency(truth, pred)
    if counts.shape[0] < 2 or counts.shape[1] < 2:
        raise ValueError("degenerate partition: entropy zero")
    n = counts.sum()
    row = counts.sum(axis=1)
    col = counts.sum(axis=0)
    mutual = 0.0
    for i in range(counts.shape[0]):
        for j in range(counts.shape[1]):
            nij = counts[i, j]
            if nij > 0:
                mutual += (nij / n) * np.log(n * nij / (row[i] * col[j]))
    h_true = -np.sum((row / n) * np.log(row / n))
    h_pred = -np.sum((col / n) * np.log(col / n))
    value = mutual / np.sqrt(h_true * h_pred)
    # Roundoff can push an exact identity a few ulp past 1.
    return float(min(max(value, 0.0), 1.0))
