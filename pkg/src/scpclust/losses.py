"""Clustering objective on paired soft assignments.

Three terms over two views of the same batch: a cross-view cross-entropy that
pulls each pair of assignment rows together, a confidence term that sharpens
rows, and an entropy regularizer on the batch-mean assignment that keeps
clusters populated.  The combined objective is

    L = L_e + L_con - alpha * H(Y)

All terms are batch sums / batch means exactly as defined below, not
renormalized.  Every function returns the scalar together with gradients with
respect to both probability matrices; gradients flow to both views.  The
gradients are unconstrained partials: they do not project onto the simplex,
since the softmax Jacobian upstream handles that.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError, ShapeError
from .head import AssignmentBatch

# Probabilities below this are clamped inside logs so 0·ln 0 = 0 and one-hot
# inputs stay finite.
EPS = 1e-12


@dataclass
class MeanAssignment:
    """Column means of the two views' assignment matrices."""

    p_a: np.ndarray  # (K,)
    p_b: np.ndarray  # (K,)


@dataclass
class LossBreakdown:
    """All four objective scalars for one paired batch."""

    l_e: float
    l_con: float
    entropy: float
    l_clu: float
    alpha: float


def _paired_probs(ya, yb, same_batch: bool = True) -> tuple[np.ndarray, np.ndarray]:
    pa = ya.probs if isinstance(ya, AssignmentBatch) else np.asarray(ya, dtype=np.float64)
    pb = yb.probs if isinstance(yb, AssignmentBatch) else np.asarray(yb, dtype=np.float64)
    if pa.ndim != 2 or pb.ndim != 2:
        raise ShapeError(f"assignments must be 2-d, got {pa.shape} and {pb.shape}")
    if same_batch and pa.shape != pb.shape:
        raise ShapeError(f"paired batches differ in shape: {pa.shape} vs {pb.shape}")
    if pa.shape[1] != pb.shape[1]:
        raise ShapeError(f"cluster counts differ: {pa.shape[1]} vs {pb.shape[1]}")
    return pa, pb


def loss_e(ya, yb) -> tuple[float, np.ndarray, np.ndarray]:
    """Cross-view cross-entropy, summed over the batch.

    L_e = -sum_i sum_k ya[i,k] * ln(yb[i,k]); asymmetric in its arguments.
    Returns (value, grad_a, grad_b).
    """
    pa, pb = _paired_probs(ya, yb)
    log_b = np.log(np.maximum(pb, EPS))
    value = -float((pa * log_b).sum())
    grad_a = -log_b
    # Where yb is clamped the loss is locally constant in it.
    grad_b = np.where(pb > EPS, -pa / np.maximum(pb, EPS), 0.0)
    return value, grad_a, grad_b


def loss_con(ya, yb) -> tuple[float, np.ndarray, np.ndarray]:
    """Confidence term: negative log of the summed row inner products.

    L_con = -ln( sum_i <ya_i, yb_i> ).  The sum is over the whole batch, so
    the value shifts by -ln B for uniform assignments.  Returns
    (value, grad_a, grad_b).
    """
    pa, pb = _paired_probs(ya, yb)
    if pa.shape[0] < 1:
        raise ShapeError("confidence loss needs at least one row")
    s = float((pa * pb).sum())
    value = -math.log(max(s, EPS))
    g = -1.0 / s if s > EPS else 0.0
    return value, g * pb, g * pa


def entropy_reg(ya, yb) -> tuple[float, np.ndarray, np.ndarray, MeanAssignment]:
    """Entropy of the batch-mean assignments, summed over both views.

    P^a, P^b are column means; H(Y) = -sum_k [P^a_k ln P^a_k + P^b_k ln P^b_k].
    Maximizing H(Y) pushes the mean assignment toward uniform, which is what
    prevents all rows from collapsing onto one cluster.  Returns
    (value, grad_a, grad_b, means).
    """
    pa, pb = _paired_probs(ya, yb, same_batch=False)
    if pa.shape[0] < 1 or pb.shape[0] < 1:
        raise ShapeError("entropy term needs at least one row per view")
    mean_a = pa.mean(axis=0)
    mean_b = pb.mean(axis=0)
    log_a = np.log(np.maximum(mean_a, EPS))
    log_b = np.log(np.maximum(mean_b, EPS))
    value = -float((mean_a * log_a).sum() + (mean_b * log_b).sum())
    # dH/dp[i,k] = -(ln P_k + 1)/B, identical for every row i.
    grad_a = np.broadcast_to(-(log_a + 1.0) / pa.shape[0], pa.shape).copy()
    grad_b = np.broadcast_to(-(log_b + 1.0) / pb.shape[0], pb.shape).copy()
    return value, grad_a, grad_b, MeanAssignment(p_a=mean_a, p_b=mean_b)


def loss_clu(ya, yb, alpha: float) -> tuple[LossBreakdown, np.ndarray, np.ndarray]:
    """Combined objective L_e + L_con - alpha * H(Y) with merged gradients."""
    if alpha < 0:
        raise ConfigError(f"alpha must be nonnegative, got {alpha}")
    le, ga_e, gb_e = loss_e(ya, yb)
    lc, ga_c, gb_c = loss_con(ya, yb)
    h, ga_h, gb_h, _ = entropy_reg(ya, yb)
    breakdown = LossBreakdown(
        l_e=le,
        l_con=lc,
        entropy=h,
        l_clu=float(le + lc - alpha * h),
        alpha=float(alpha),
    )
    grad_a = ga_e + ga_c - alpha * ga_h
    grad_b = gb_e + gb_c - alpha * gb_h
    return breakdown, grad_a, grad_b
