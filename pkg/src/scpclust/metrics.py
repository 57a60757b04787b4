"""Clustering evaluation: Hungarian-matched accuracy, NMI, ARI, reports.

All metrics are label-permutation invariant and computed from a contingency
table.  Entropies use natural logs; NMI normalizes by the geometric mean of
the marginal entropies.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Optional

import numpy as np
from scipy.optimize import linear_sum_assignment

from .errors import ShapeError, UndefinedMetricError
from .head import AssignmentBatch

COLLAPSE_OCCUPANCY = 0.9  # one cluster holding more than this fraction counts as collapse


@dataclass
class ContingencyTable:
    counts: np.ndarray  # (K_pred, K_true) nonnegative ints
    n: int


@dataclass
class ClusteringReport:
    """Evaluation summary for one hard clustering of a dataset.

    acc/nmi/ari are None when ground-truth labels were not supplied.
    """

    n_items: int
    n_clusters: int
    occupancy: np.ndarray  # (K,) items assigned per cluster
    collapse: bool
    acc: Optional[float] = None
    nmi: Optional[float] = None
    ari: Optional[float] = None
    mapping: Optional[np.ndarray] = None  # cluster -> matched class, -1 if unmatched
    losses: dict = field(default_factory=dict)  # final loss scalars when known

    def as_dict(self) -> dict:
        d = {
            "n_items": self.n_items,
            "n_clusters": self.n_clusters,
            "occupancy": [int(c) for c in self.occupancy],
            "collapse": bool(self.collapse),
            "acc": self.acc,
            "nmi": self.nmi,
            "ari": self.ari,
        }
        if self.mapping is not None:
            d["mapping"] = [int(m) for m in self.mapping]
        if self.losses:
            d["losses"] = {k: float(v) for k, v in self.losses.items()}
        return d

    def lines(self) -> list[str]:
        """key=value text form, one field per line."""
        out = [
            f"n_items={self.n_items}",
            f"n_clusters={self.n_clusters}",
            "occupancy=" + ",".join(str(int(c)) for c in self.occupancy),
            f"collapse={str(self.collapse).lower()}",
        ]
        for name, value in (("acc", self.acc), ("nmi", self.nmi), ("ari", self.ari)):
            if value is not None:
                out.append(f"{name}={value:.6f}")
        for name, value in self.losses.items():
            out.append(f"{name}={value:.6f}")
        return out


def _check_pair(pred, truth, min_n: int = 1) -> tuple[np.ndarray, np.ndarray]:
    p = np.asarray(pred).ravel()
    t = np.asarray(truth).ravel()
    if p.shape != t.shape:
        raise ShapeError(f"label arrays differ in length: {p.shape[0]} vs {t.shape[0]}")
    if p.shape[0] < min_n:
        raise UndefinedMetricError(f"metric needs at least {min_n} samples, got {p.shape[0]}")
    return p, t


def contingency(pred, truth) -> ContingencyTable:
    """Cross-tabulation of predicted clusters against true classes.

    Label values may be arbitrary integers; rows/cols follow np.unique order.
    """
    p, t = _check_pair(pred, truth)
    _, p_idx = np.unique(p, return_inverse=True)
    _, t_idx = np.unique(t, return_inverse=True)
    k_pred = p_idx.max() + 1
    k_true = t_idx.max() + 1
    counts = np.zeros((k_pred, k_true), dtype=np.int64)
    np.add.at(counts, (p_idx, t_idx), 1)
    return ContingencyTable(counts=counts, n=p.shape[0])


def hungarian_acc(pred, truth) -> tuple[float, np.ndarray]:
    """Best-match accuracy under a one-to-one cluster-to-class assignment.

    The contingency table is zero-padded to square and solved as a max-weight
    matching.  Returns (acc, mapping) where mapping[r] is the class matched
    to predicted cluster r, or -1 when r was matched to a padding column.
    """
    table = contingency(pred, truth)
    counts = table.counts
    k = max(counts.shape)
    padded = np.zeros((k, k), dtype=np.int64)
    padded[: counts.shape[0], : counts.shape[1]] = counts
    rows, cols = linear_sum_assignment(padded, maximize=True)
    matched = padded[rows, cols].sum()
    mapping = np.full(counts.shape[0], -1, dtype=np.int64)
    for r, c in zip(rows, cols):
        if r < counts.shape[0] and c < counts.shape[1]:
            mapping[r] = c
    return float(matched) / table.n, mapping


def _entropy(counts_1d: np.ndarray, n: int) -> float:
    probs = counts_1d[counts_1d > 0] / n
    return float(-(probs * np.log(probs)).sum())


def nmi(pred, truth) -> float:
    """Mutual information over the geometric mean of marginal entropies.

    Both partitions trivial (single cluster each) -> 1.0; exactly one trivial
    -> 0.0, since a constant partition carries no information about the other.
    """
    table = contingency(pred, truth)
    counts, n = table.counts, table.n
    h_pred = _entropy(counts.sum(axis=1), n)
    h_truth = _entropy(counts.sum(axis=0), n)
    if h_pred == 0.0 and h_truth == 0.0:
        return 1.0
    if h_pred == 0.0 or h_truth == 0.0:
        return 0.0

    row = counts.sum(axis=1, keepdims=True)
    col = counts.sum(axis=0, keepdims=True)
    nz = counts > 0
    joint = counts[nz] / n
    outer = (row @ col)[nz] / (n * n)
    info = float((joint * np.log(joint / outer)).sum())
    return info / math.sqrt(h_pred * h_truth)


def _pairs(x: np.ndarray) -> np.ndarray:
    return x * (x - 1) // 2


def ari(pred, truth) -> float:
    """Adjusted Rand index by pair counting.

    When the adjustment denominator vanishes (Max == Expected, e.g. both
    partitions all-singletons or both single-cluster) the value is 1.0 if the
    partitions are identical and 0.0 otherwise.
    """
    p, t = _check_pair(pred, truth, min_n=2)
    table = contingency(p, t)
    counts, n = table.counts, table.n

    index = int(_pairs(counts).sum())
    sum_rows = int(_pairs(counts.sum(axis=1)).sum())
    sum_cols = int(_pairs(counts.sum(axis=0)).sum())
    total_pairs = n * (n - 1) // 2
    expected = sum_rows * sum_cols / total_pairs
    maximum = 0.5 * (sum_rows + sum_cols)
    if maximum == expected:
        _, p_idx = np.unique(p, return_inverse=True)
        _, t_idx = np.unique(t, return_inverse=True)
        return 1.0 if np.array_equal(p_idx, t_idx) else 0.0
    return (index - expected) / (maximum - expected)


def cluster_report(
    assign: AssignmentBatch,
    truth: Optional[np.ndarray] = None,
    losses: Optional[dict] = None,
) -> ClusteringReport:
    """Summarize a full-dataset assignment batch.

    Hard labels are row argmax with ties resolved to the lowest cluster
    index.  The collapse flag fires when any cluster holds more than 90% of
    the items or any cluster is empty.
    """
    hard = assign.hard_labels()
    k = assign.n_clusters
    occupancy = np.bincount(hard, minlength=k)
    collapse = bool(occupancy.max() > COLLAPSE_OCCUPANCY * assign.batch_size or occupancy.min() == 0)

    report = ClusteringReport(
        n_items=assign.batch_size,
        n_clusters=k,
        occupancy=occupancy,
        collapse=collapse,
        losses=dict(losses or {}),
    )
    if truth is not None:
        truth = np.asarray(truth).ravel()
        report.acc, report.mapping = hungarian_acc(hard, truth)
        report.nmi = nmi(hard, truth)
        report.ari = ari(hard, truth)
    return report
