"""Embedding datasets: SCPF binary IO, pair sampling, concat, synthetic blobs.

A dataset is an N x V x D float32 block of precomputed embeddings: V views
per item, where view 0 may hold the un-augmented embedding (view0_is_clean).
The trainer never sees pixels; augmented views are baked in by the extractor.

SCPF layout, all little-endian: magic "SCPF", version u32 = 1, flags u32
(bit0 labels present, bit1 l2_normalized, bit2 view0_is_clean), n_items u64,
n_views u32, dim u32, features f32[N*V*D] item-major, then if bit0 is set
n_classes u32 followed by labels u32[N].
"""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass
from typing import Iterator, Optional

import numpy as np

from .errors import AlignmentError, ConfigError, DataError, FormatError, ShapeError

log = logging.getLogger(__name__)

SCPF_MAGIC = b"SCPF"
SCPF_VERSION = 1
FLAG_LABELS = 1 << 0
FLAG_L2_NORMALIZED = 1 << 1
FLAG_VIEW0_CLEAN = 1 << 2


@dataclass
class EmbeddingDataset:
    """Immutable-by-convention container for precomputed embeddings."""

    features: np.ndarray  # (N, V, D) float32
    labels: Optional[np.ndarray] = None  # (N,) int64 in [0, n_classes)
    n_classes: Optional[int] = None
    l2_normalized: bool = False
    view0_is_clean: bool = False

    @property
    def n_items(self) -> int:
        return self.features.shape[0]

    @property
    def n_views(self) -> int:
        return self.features.shape[1]

    @property
    def dim(self) -> int:
        return self.features.shape[2]

    def view(self, index: int) -> np.ndarray:
        """One view of every item as a float64 (N, D) matrix."""
        if not 0 <= index < self.n_views:
            raise ConfigError(f"view index {index} out of range [0, {self.n_views})")
        return self.features[:, index, :].astype(np.float64)

    def eval_view(self) -> np.ndarray:
        """The view evaluation runs on: the clean view when present, else view 0."""
        return self.view(0)

    def validate(self) -> None:
        f = self.features
        if f.ndim != 3:
            raise ShapeError(f"features must be (N, V, D), got shape {f.shape}")
        if f.shape[0] < 1 or f.shape[1] < 1 or f.shape[2] < 1:
            raise ShapeError(f"empty dataset axis in shape {f.shape}")
        if not np.isfinite(f).all():
            raise DataError("non-finite feature values")
        if self.labels is not None:
            if self.labels.shape != (self.n_items,):
                raise ShapeError(
                    f"labels length {self.labels.shape} does not match n_items {self.n_items}"
                )
            if self.n_classes is None or self.n_classes < 1:
                raise DataError("labels present but n_classes missing or non-positive")
            if self.labels.min() < 0 or self.labels.max() >= self.n_classes:
                raise DataError(
                    f"label values outside [0, {self.n_classes}): "
                    f"min {self.labels.min()}, max {self.labels.max()}"
                )
        if self.l2_normalized:
            norms = np.linalg.norm(f.astype(np.float64), axis=2)
            worst = float(np.abs(norms - 1.0).max())
            if worst > 1e-4:
                raise DataError(
                    f"l2_normalized flag set but a view norm deviates by {worst:.2e}"
                )


@dataclass
class PairBatch:
    """Two views per item for one minibatch; row j of each matrix is item item_ids[j]."""

    feats_a: np.ndarray  # (B, D) float64
    feats_b: np.ndarray  # (B, D) float64
    item_ids: np.ndarray  # (B,) int64
    view_a: np.ndarray  # (B,) int64, which view produced feats_a
    view_b: np.ndarray  # (B,) int64


def _take(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    end = offset + size
    if end > len(buf):
        raise FormatError(
            f"truncated file while reading {what}: need bytes [{offset}, {end}), "
            f"file has {len(buf)}"
        )
    return buf[offset:end], end


def save_scpf(dataset: EmbeddingDataset, path: str) -> None:
    """Write a dataset to the SCPF binary format."""
    dataset.validate()
    flags = 0
    if dataset.labels is not None:
        flags |= FLAG_LABELS
    if dataset.l2_normalized:
        flags |= FLAG_L2_NORMALIZED
    if dataset.view0_is_clean:
        flags |= FLAG_VIEW0_CLEAN
    parts = [
        SCPF_MAGIC,
        SCPF_VERSION.to_bytes(4, "little"),
        flags.to_bytes(4, "little"),
        dataset.n_items.to_bytes(8, "little"),
        dataset.n_views.to_bytes(4, "little"),
        dataset.dim.to_bytes(4, "little"),
        np.ascontiguousarray(dataset.features, dtype="<f4").tobytes(),
    ]
    if dataset.labels is not None:
        parts.append(int(dataset.n_classes).to_bytes(4, "little"))
        parts.append(np.ascontiguousarray(dataset.labels, dtype="<u4").tobytes())
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def load_scpf(path: str) -> EmbeddingDataset:
    """Read and fully validate an SCPF file; logs a one-line load report."""
    with open(path, "rb") as fh:
        buf = fh.read()

    raw, off = _take(buf, 0, 4, "magic")
    if raw != SCPF_MAGIC:
        raise FormatError(f"bad magic {raw!r} at offset 0, expected {SCPF_MAGIC!r}")
    raw, off = _take(buf, off, 4, "version")
    version = int.from_bytes(raw, "little")
    if version != SCPF_VERSION:
        raise FormatError(f"unsupported dataset version {version} at offset 4")
    raw, off = _take(buf, off, 4, "flags")
    flags = int.from_bytes(raw, "little")
    raw, off = _take(buf, off, 8, "n_items")
    n_items = int.from_bytes(raw, "little")
    raw, off = _take(buf, off, 4, "n_views")
    n_views = int.from_bytes(raw, "little")
    raw, off = _take(buf, off, 4, "dim")
    dim = int.from_bytes(raw, "little")
    if n_items < 1 or n_views < 1 or dim < 1:
        raise FormatError(
            f"non-positive header field: n_items={n_items} n_views={n_views} dim={dim}"
        )

    n_floats = n_items * n_views * dim
    raw, off = _take(buf, off, 4 * n_floats, "feature block")
    features = np.frombuffer(raw, dtype="<f4").reshape(n_items, n_views, dim).copy()

    labels = None
    n_classes = None
    if flags & FLAG_LABELS:
        raw, off = _take(buf, off, 4, "n_classes")
        n_classes = int.from_bytes(raw, "little")
        raw, off = _take(buf, off, 4 * n_items, "label block")
        labels = np.frombuffer(raw, dtype="<u4").astype(np.int64)
    if off != len(buf):
        raise FormatError(f"{len(buf) - off} trailing bytes after offset {off}")

    ds = EmbeddingDataset(
        features=features,
        labels=labels,
        n_classes=n_classes,
        l2_normalized=bool(flags & FLAG_L2_NORMALIZED),
        view0_is_clean=bool(flags & FLAG_VIEW0_CLEAN),
    )
    ds.validate()
    log.info(
        "loaded %s: n_items=%d n_views=%d dim=%d labels=%s l2_normalized=%s view0_is_clean=%s",
        path, n_items, n_views, dim,
        "none" if labels is None else f"{n_classes} classes",
        ds.l2_normalized, ds.view0_is_clean,
    )
    return ds


_warned_single_view = False


def sample_pairs(
    dataset: EmbeddingDataset,
    batch_size: int,
    rng: np.random.Generator,
) -> Iterator[PairBatch]:
    """One epoch of positive pairs: every item once, in a random order.

    For each item two distinct view indices are drawn uniformly.  When view 0
    is the clean embedding and at least two augmented views exist, pairs are
    drawn from the augmented views only; otherwise any two views qualify.  A
    single-view dataset pairs the view with itself (warned once per process).

    All epoch randomness is drawn up front, so the batch stream depends only
    on (rng state, batch_size) and batch_size merely slices the epoch.
    """
    global _warned_single_view
    if batch_size < 1:
        raise ConfigError(f"batch_size must be >= 1, got {batch_size}")
    n, v = dataset.n_items, dataset.n_views

    perm = rng.permutation(n)
    if v == 1:
        if not _warned_single_view:
            log.warning("single-view dataset: pairing each embedding with itself")
            _warned_single_view = True
        va = np.zeros(n, dtype=np.int64)
        vb = va
    else:
        # Augmented-only pool when the clean view would otherwise leak into
        # training; fall back to all views when the pool would be a singleton.
        base = 1 if (dataset.view0_is_clean and v >= 3) else 0
        m = v - base
        va = rng.integers(0, m, size=n)
        vb = (va + rng.integers(1, m, size=n)) % m
        va = va + base
        vb = vb + base

    feats = dataset.features
    for start in range(0, n, batch_size):
        ids = perm[start : start + batch_size]
        sel_a = va[start : start + batch_size]
        sel_b = vb[start : start + batch_size]
        yield PairBatch(
            feats_a=feats[ids, sel_a, :].astype(np.float64),
            feats_b=feats[ids, sel_b, :].astype(np.float64),
            item_ids=ids.astype(np.int64),
            view_a=sel_a.astype(np.int64),
            view_b=sel_b.astype(np.int64),
        )


def concat_features(a: EmbeddingDataset, b: EmbeddingDataset) -> EmbeddingDataset:
    """Concatenate two aligned datasets along the feature axis (dim adds)."""
    if a.n_items != b.n_items:
        raise AlignmentError(f"item counts differ: {a.n_items} vs {b.n_items}")
    if a.n_views != b.n_views:
        raise AlignmentError(f"view counts differ: {a.n_views} vs {b.n_views}")
    if a.view0_is_clean != b.view0_is_clean:
        raise AlignmentError("view0_is_clean flags differ; view axes are not aligned")
    labels = a.labels if a.labels is not None else b.labels
    n_classes = a.n_classes if a.labels is not None else b.n_classes
    if a.labels is not None and b.labels is not None:
        if not np.array_equal(a.labels, b.labels):
            bad = int(np.nonzero(a.labels != b.labels)[0][0])
            raise AlignmentError(f"label arrays disagree at item {bad}; datasets misaligned")
    features = np.concatenate([a.features, b.features], axis=2)
    ds = EmbeddingDataset(
        features=features,
        labels=None if labels is None else labels.copy(),
        n_classes=n_classes,
        l2_normalized=False,  # unit norms do not survive concatenation
        view0_is_clean=a.view0_is_clean,
    )
    ds.validate()
    return ds


def make_blobs(
    n_clusters: int,
    per_cluster: int,
    dim: int,
    center_sep: float = 10.0,
    view_noise: float = 0.5,
    n_views: int = 3,
    seed: int = 0,
) -> EmbeddingDataset:
    """Synthetic labeled dataset of Gaussian blobs with per-view jitter.

    Cluster centers sit on mutually orthogonal directions scaled so every
    pairwise center distance equals center_sep (requires n_clusters <= dim).
    Each item's clean vector is its center plus unit-variance Gaussian noise;
    each augmented view adds isotropic noise of scale view_noise on top.
    View 0 is the clean vector.
    """
    if n_clusters < 2:
        raise ConfigError(f"need at least 2 clusters, got {n_clusters}")
    if per_cluster < 1:
        raise ConfigError(f"per_cluster must be >= 1, got {per_cluster}")
    if dim < n_clusters:
        raise ConfigError(
            f"dim must be >= n_clusters for orthogonal centers, got dim={dim} K={n_clusters}"
        )
    if center_sep <= 0:
        raise ConfigError(f"center_sep must be > 0, got {center_sep}")
    if view_noise < 0:
        raise ConfigError(f"view_noise must be >= 0, got {view_noise}")
    if n_views < 1:
        raise ConfigError(f"n_views must be >= 1, got {n_views}")

    rng = np.random.default_rng(seed)
    n = n_clusters * per_cluster

    # Orthonormal directions via QR; scaling by sep/sqrt(2) makes every
    # center pair exactly center_sep apart.
    gauss = rng.standard_normal((dim, n_clusters))
    q, _ = np.linalg.qr(gauss)
    centers = q.T * (center_sep / math.sqrt(2.0))

    labels = np.repeat(np.arange(n_clusters, dtype=np.int64), per_cluster)
    clean = centers[labels] + rng.standard_normal((n, dim))
    views = [clean]
    for _ in range(n_views - 1):
        views.append(clean + view_noise * rng.standard_normal((n, dim)))
    features = np.stack(views, axis=1).astype("<f4")

    ds = EmbeddingDataset(
        features=features,
        labels=labels,
        n_classes=n_clusters,
        l2_normalized=False,
        view0_is_clean=True,
    )
    ds.validate()
    return ds
