"""Image sources: an .npz array bundle or a directory of class subfolders.

Both yield (images, labels, n_classes, skipped) where images is a list of HWC
uint8 arrays (sizes may differ; preprocessing resizes), labels is int64 or
None, and skipped counts unreadable files that were logged and dropped.
"""

from __future__ import annotations

import logging
from pathlib import Path

import numpy as np

from .errors import DatasetError

log = logging.getLogger(__name__)

IMAGE_SUFFIXES = {".png", ".jpg", ".jpeg", ".bmp", ".webp"}


def _check_images(arr: np.ndarray, origin: str) -> np.ndarray:
    if arr.ndim == 3:  # grayscale stack -> replicate channels
        arr = np.repeat(arr[..., None], 3, axis=3)
    if arr.ndim != 4 or arr.shape[3] != 3:
        raise DatasetError(
            f"{origin}: expected images shaped (N, H, W, 3) or (N, H, W), got {arr.shape}"
        )
    if arr.dtype != np.uint8:
        raise DatasetError(f"{origin}: expected uint8 images, got {arr.dtype}")
    return arr


def load_npz(path: str):
    """Bundle with an 'images' array and an optional 'labels' array."""
    try:
        with np.load(path) as bundle:
            if "images" not in bundle:
                raise DatasetError(f"{path}: missing 'images' array")
            images = _check_images(bundle["images"], path)
            labels = bundle["labels"].astype(np.int64) if "labels" in bundle.files else None
    except OSError as exc:
        raise DatasetError(f"cannot read dataset {path}: {exc}") from exc
    if labels is not None:
        if labels.shape != (images.shape[0],):
            raise DatasetError(
                f"{path}: labels shape {labels.shape} does not match {images.shape[0]} images"
            )
        if labels.min() < 0:
            raise DatasetError(f"{path}: negative label {labels.min()}")
    n_classes = int(labels.max()) + 1 if labels is not None else None
    return list(images), labels, n_classes, 0


def load_image_dir(path: str):
    """Directory of class subfolders (label = sorted folder index), or a flat
    folder of images (no labels).  Unreadable files are skipped and logged."""
    try:
        from PIL import Image
    except ImportError as exc:
        raise DatasetError(
            f"reading image directories needs Pillow; install it with: pip install Pillow ({exc})"
        ) from exc

    root = Path(path)
    if not root.is_dir():
        raise DatasetError(f"dataset directory not found: {path}")
    class_dirs = sorted(d for d in root.iterdir() if d.is_dir())
    if class_dirs:
        sources = [(d, idx) for idx, d in enumerate(class_dirs)]
    else:
        sources = [(root, None)]

    images, labels, skipped = [], [], 0
    for folder, label in sources:
        for file in sorted(folder.iterdir()):
            if file.suffix.lower() not in IMAGE_SUFFIXES:
                continue
            try:
                with Image.open(file) as im:
                    arr = np.asarray(im.convert("RGB"), dtype=np.uint8)
            except Exception as exc:
                skipped += 1
                log.warning("skipping unreadable image %s: %s", file, exc)
                continue
            images.append(arr)
            if label is not None:
                labels.append(label)
    if not images:
        raise DatasetError(f"{path}: no readable images found ({skipped} skipped)")
    lab = np.asarray(labels, dtype=np.int64) if labels else None
    n_classes = len(class_dirs) if class_dirs else None
    return images, lab, n_classes, skipped


def load_dataset(path: str):
    """Dispatch on path: .npz bundle or image directory."""
    if str(path).endswith(".npz"):
        return load_npz(path)
    return load_image_dir(path)
