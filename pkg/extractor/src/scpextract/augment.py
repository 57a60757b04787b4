"""View augmentation on raw images before backbone preprocessing.

Images are HWC uint8 arrays.  Each augmented view applies RandomCrop and
GaussianBlur independently, each with probability 0.5; the clean view applies
neither.  All randomness flows through the generator passed in, so a view is
reproducible from its seed stream alone.
"""

from __future__ import annotations

import numpy as np
from scipy import ndimage

BLUR_SIGMA_RANGE = (0.1, 2.0)
# Random crops keep at least this fraction of each image side, so content
# stays recognizable to the frozen backbone.
MIN_CROP_FRACTION = 0.6


def resize(img: np.ndarray, size: int) -> np.ndarray:
    """Bilinear resize of an HWC uint8/float image to (size, size, C)."""
    if img.ndim != 3:
        raise ValueError(f"expected HWC image, got shape {img.shape}")
    h, w, _ = img.shape
    if h == size and w == size:
        return img.astype(np.float32)
    zoom = (size / h, size / w, 1.0)
    out = ndimage.zoom(img.astype(np.float32), zoom, order=1, mode="nearest")
    # zoom rounding can over/undershoot by one pixel on odd ratios
    return out[:size, :size, :]


def random_crop(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """Crop a random square region (>= MIN_CROP_FRACTION per side), keep size.

    The crop is resized back to the original shape so later preprocessing is
    identical for all views.
    """
    h, w, _ = img.shape
    side = int(rng.uniform(MIN_CROP_FRACTION, 1.0) * min(h, w))
    side = max(side, 1)
    top = int(rng.integers(0, h - side + 1))
    left = int(rng.integers(0, w - side + 1))
    patch = img[top : top + side, left : left + side, :]
    out = resize(patch, min(h, w))
    if (h, w) != out.shape[:2]:
        out = ndimage.zoom(out, (h / out.shape[0], w / out.shape[1], 1.0), order=1, mode="nearest")
    return out


def gaussian_blur(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    sigma = float(rng.uniform(*BLUR_SIGMA_RANGE))
    return ndimage.gaussian_filter(img.astype(np.float32), sigma=(sigma, sigma, 0.0))


def augment_view(img: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """One augmented view: crop then blur, each drawn with probability 0.5.

    Both coin flips are always consumed so the stream layout does not depend
    on earlier outcomes.
    """
    do_crop = rng.random() < 0.5
    do_blur = rng.random() < 0.5
    out = img.astype(np.float32)
    if do_crop:
        out = random_crop(out, rng)
    if do_blur:
        out = gaussian_blur(out, rng)
    return out
