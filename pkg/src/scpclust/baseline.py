"""K-means baseline with k-means++ seeding and multi-restart selection.

Clusters the clean (view 0) embeddings.  Deterministic given the seed: each
restart draws from its own spawned generator and the winner is picked by
(inertia, restart index), so ties resolve to the earliest restart.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import EmbeddingDataset
from .errors import ConfigError

# Center-shift convergence threshold and iteration cap follow common library
# defaults.
DEFAULT_MAX_ITER = 300
DEFAULT_TOL = 1e-6
DEFAULT_N_INIT = 10


@dataclass
class KMeansResult:
    centers: np.ndarray      # (K, D)
    assignments: np.ndarray  # (N,) nearest-center index per point
    inertia: float           # sum of squared distances to assigned centers
    iterations_run: int
    converged: bool


def _sq_dists(x: np.ndarray, centers: np.ndarray) -> np.ndarray:
    """Squared Euclidean distances (N, K), clamped at 0 against roundoff."""
    d = (
        (x * x).sum(axis=1, keepdims=True)
        - 2.0 * (x @ centers.T)
        + (centers * centers).sum(axis=1)
    )
    return np.maximum(d, 0.0)


def _plusplus_init(x: np.ndarray, k: int, rng: np.random.Generator) -> np.ndarray:
    """k-means++ seeding: each next center drawn with probability ∝ D²."""
    n = x.shape[0]
    centers = np.empty((k, x.shape[1]), dtype=x.dtype)
    first = int(rng.integers(n))
    centers[0] = x[first]
    closest = _sq_dists(x, centers[0:1]).ravel()
    for j in range(1, k):
        total = closest.sum()
        if total <= 0.0:
            # All points coincide with chosen centers; any pick is equivalent.
            idx = int(rng.integers(n))
        else:
            idx = int(rng.choice(n, p=closest / total))
        centers[j] = x[idx]
        closest = np.minimum(closest, _sq_dists(x, centers[j : j + 1]).ravel())
    return centers


def _lloyd(
    x: np.ndarray,
    centers: np.ndarray,
    max_iter: int,
    tol: float,
) -> tuple[np.ndarray, np.ndarray, float, int, bool]:
    k = centers.shape[0]
    converged = False
    iterations = 0
    assignments = np.zeros(x.shape[0], dtype=np.int64)
    for iterations in range(1, max_iter + 1):
        dists = _sq_dists(x, centers)
        assignments = dists.argmin(axis=1)
        point_d = dists[np.arange(x.shape[0]), assignments]

        new_centers = centers.copy()
        for j in range(k):
            mask = assignments == j
            if mask.any():
                new_centers[j] = x[mask].mean(axis=0)
            else:
                # Empty cluster: restart it at the point farthest from its
                # center, then remove that point from contention.
                far = int(point_d.argmax())
                new_centers[j] = x[far]
                point_d[far] = 0.0
        shift = float(np.sqrt(((new_centers - centers) ** 2).sum(axis=1)).max())
        centers = new_centers
        if shift < tol:
            converged = True
            break

    dists = _sq_dists(x, centers)
    assignments = dists.argmin(axis=1)
    inertia = float(dists[np.arange(x.shape[0]), assignments].sum())
    return centers, assignments, inertia, iterations, converged


def kmeans(
    dataset,
    k: int,
    max_iter: int = DEFAULT_MAX_ITER,
    tol: float = DEFAULT_TOL,
    n_init: int = DEFAULT_N_INIT,
    seed: int = 0,
    l2_normalize: bool = False,
) -> KMeansResult:
    """Best-of-n_init k-means on clean embeddings (or any (N, D) matrix).

    Pass l2_normalize=True to cluster direction-only features; the dataset's
    own l2_normalized flag means the data already is.
    """
    if isinstance(dataset, EmbeddingDataset):
        x = dataset.eval_view()
    else:
        x = np.asarray(dataset, dtype=np.float64)
        if x.ndim != 2:
            raise ConfigError(f"expected (N, D) matrix, got shape {x.shape}")
    if l2_normalize:
        norms = np.linalg.norm(x, axis=1, keepdims=True)
        x = x / np.maximum(norms, 1e-12)

    n = x.shape[0]
    if k < 1:
        raise ConfigError(f"k must be >= 1, got {k}")
    if k > n:
        raise ConfigError(f"k={k} exceeds the {n} available points")
    if n_init < 1:
        raise ConfigError(f"n_init must be >= 1, got {n_init}")

    best: KMeansResult | None = None
    for child in np.random.SeedSequence(seed).spawn(n_init):
        rng = np.random.default_rng(child)
        centers = _plusplus_init(x, k, rng)
        centers, assignments, inertia, iterations, converged = _lloyd(
            x, centers, max_iter, tol
        )
        if best is None or inertia < best.inertia:
            best = KMeansResult(
                centers=centers,
                assignments=assignments,
                inertia=inertia,
                iterations_run=iterations,
                converged=converged,
            )
    assert best is not None
    return best
