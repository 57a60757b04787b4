"""Extraction driver: images -> (clean + augmented) embeddings -> SCPF file.

View 0 is the clean view (backbone's standard preprocessing, no randomness)
when include_clean is set; augmented views draw their randomness from a
per-(seed, item, view) generator, so results are independent of batch size
and byte-identical across runs with the same seed.
"""

from __future__ import annotations

import logging
import os
from dataclasses import dataclass
from typing import Optional

import numpy as np
from scpclust import EmbeddingDataset, save_scpf

from .augment import augment_view
from .backbones import get_spec, load_backbone, preprocess
from .datasets import load_dataset
from .errors import DatasetError, JobConfigError

log = logging.getLogger(__name__)


@dataclass
class ExtractJob:
    data: str                     # .npz bundle or image directory
    backbone: str = "clip-vit-b32"
    n_aug_views: int = 2
    include_clean: bool = True
    batch_size: int = 64
    device: str = "cpu"
    out: str = "features.scpf"
    seed: int = 0

    @property
    def n_views(self) -> int:
        return self.n_aug_views + int(self.include_clean)

    def validate(self) -> None:
        if self.n_aug_views < 0:
            raise JobConfigError(f"n_aug_views must be >= 0, got {self.n_aug_views}")
        if self.n_views < 1:
            raise JobConfigError("job produces no views; enable clean or augmented views")
        if self.batch_size < 1:
            raise JobConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        get_spec(self.backbone)


def _view_rng(job_seed: int, item: int, view: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence((job_seed, item, view)))


def extract(job: ExtractJob) -> EmbeddingDataset:
    """Run the job and write its SCPF file; returns the in-memory dataset."""
    job.validate()
    spec = get_spec(job.backbone)
    embed = load_backbone(job.backbone)
    images, labels, n_classes, skipped = load_dataset(job.data)
    n = len(images)
    log.info(
        "extracting %d images (%d skipped) with %s: D=%d V=%d",
        n, skipped, spec.name, spec.dim, job.n_views,
    )

    features = np.empty((n, job.n_views, spec.dim), dtype=np.float32)
    for start in range(0, n, job.batch_size):
        stop = min(start + job.batch_size, n)
        for view in range(job.n_views):
            is_clean = job.include_clean and view == 0
            batch = []
            for i in range(start, stop):
                img = images[i].astype(np.float32)
                if not is_clean:
                    aug_index = view - int(job.include_clean)
                    img = augment_view(img, _view_rng(job.seed, i, aug_index))
                batch.append(img)
            pixel = _stack_preprocessed(batch, spec)
            features[start:stop, view, :] = embed(pixel)
    if not np.isfinite(features).all():
        raise DatasetError("backbone produced non-finite embeddings")

    ds = EmbeddingDataset(
        features=features,
        labels=labels,
        n_classes=n_classes,
        l2_normalized=False,
        view0_is_clean=job.include_clean,
    )
    tmp = job.out + ".tmp"
    save_scpf(ds, tmp)
    os.replace(tmp, job.out)
    log.info("wrote %s: n_items=%d n_views=%d dim=%d", job.out, n, job.n_views, spec.dim)
    return ds


def _stack_preprocessed(batch: list, spec) -> np.ndarray:
    """Preprocess a list of same-or-mixed-size HWC images into NCHW."""
    out = np.empty((len(batch), 3, spec.input_size, spec.input_size), dtype=np.float32)
    for i, img in enumerate(batch):
        out[i] = preprocess(img[None], spec)[0]
    return out


def verify(path: str) -> EmbeddingDataset:
    """Re-validate an SCPF file through the primary loader and report it."""
    from scpclust import load_scpf

    ds = load_scpf(path)
    print(
        f"ok {path}: n_items={ds.n_items} n_views={ds.n_views} dim={ds.dim} "
        f"labels={'yes' if ds.labels is not None else 'no'} "
        f"l2_normalized={str(ds.l2_normalized).lower()} "
        f"view0_is_clean={str(ds.view0_is_clean).lower()}"
    )
    return ds
