"""Frozen vision backbones, loaded lazily, plus a weight-free debug backbone.

A backbone is described by its input resolution, embedding width, and
normalization statistics; load() returns a function mapping a preprocessed
float32 NCHW batch to (B, D) float32 embeddings.  Heavy dependencies (torch,
transformers) are imported only inside load(), so listing and preprocessing
work without them, and a missing library or weight cache fails with an
actionable message instead of an ImportError traceback.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Optional

import numpy as np

from .errors import JobConfigError, WeightsUnavailableError

CLIP_MEAN = (0.48145466, 0.4578275, 0.40821073)
CLIP_STD = (0.26862954, 0.26130258, 0.27577711)
IMAGENET_MEAN = (0.485, 0.456, 0.406)
IMAGENET_STD = (0.229, 0.224, 0.225)

TOY_DIM = 64
TOY_WEIGHT_SEED = 12345


@dataclass(frozen=True)
class BackboneSpec:
    name: str
    input_size: int
    dim: int
    mean: tuple
    std: tuple
    hub_id: Optional[str]  # None for the weight-free debug backbone


def _hf_loader(spec: BackboneSpec, build: Callable):
    """Wrap a transformers model constructor with an actionable error."""

    def load():
        try:
            import torch  # noqa: F401
            import transformers  # noqa: F401
        except ImportError as exc:
            raise WeightsUnavailableError(
                f"backbone {spec.name!r} needs torch and transformers; "
                f"install them with: pip install torch transformers ({exc})"
            ) from exc
        try:
            model = build()
        except Exception as exc:
            raise WeightsUnavailableError(
                f"could not load weights for backbone {spec.name!r} "
                f"(hub id {spec.hub_id}). Download them once on a connected "
                f"machine with: python -c \"from transformers import AutoModel; "
                f"AutoModel.from_pretrained('{spec.hub_id}')\" or set "
                f"HF_HOME to a cache that already has them. ({exc})"
            ) from exc
        model.eval()
        return model

    return load


def _clip_embed(spec: BackboneSpec):
    def build():
        from transformers import CLIPVisionModelWithProjection

        return CLIPVisionModelWithProjection.from_pretrained(spec.hub_id)

    model = _hf_loader(spec, build)()

    def embed(batch: np.ndarray) -> np.ndarray:
        import torch

        with torch.no_grad():
            out = model(pixel_values=torch.from_numpy(batch))
        return out.image_embeds.numpy().astype(np.float32)

    return embed


def _vit_cls_embed(spec: BackboneSpec, build: Callable):
    model = _hf_loader(spec, build)()

    def embed(batch: np.ndarray) -> np.ndarray:
        import torch

        with torch.no_grad():
            out = model(pixel_values=torch.from_numpy(batch))
        return out.last_hidden_state[:, 0].numpy().astype(np.float32)

    return embed


def _toy_embed(spec: BackboneSpec):
    """Fixed random projection with a tanh; no external weights.

    Deterministic across processes: weights come from a pinned seed, not the
    job seed, so two extractions of the same images always agree.
    """
    n_in = spec.input_size * spec.input_size * 3
    rng = np.random.default_rng(TOY_WEIGHT_SEED)
    proj = rng.normal(0.0, 1.0 / np.sqrt(n_in), size=(spec.dim, n_in)).astype(np.float32)

    def embed(batch: np.ndarray) -> np.ndarray:
        flat = batch.reshape(batch.shape[0], -1)
        return np.tanh(flat @ proj.T).astype(np.float32)

    return embed


_SPECS = {
    "clip-vit-b32": BackboneSpec("clip-vit-b32", 224, 512, CLIP_MEAN, CLIP_STD,
                                 "openai/clip-vit-base-patch32"),
    "clip-vit-l14": BackboneSpec("clip-vit-l14", 224, 768, CLIP_MEAN, CLIP_STD,
                                 "openai/clip-vit-large-patch14"),
    "dino-vit-b8": BackboneSpec("dino-vit-b8", 224, 768, IMAGENET_MEAN, IMAGENET_STD,
                                "facebook/dino-vitb8"),
    "siglip2": BackboneSpec("siglip2", 224, 768, (0.5, 0.5, 0.5), (0.5, 0.5, 0.5),
                            "google/siglip2-base-patch16-224"),
    "blip2-vision": BackboneSpec("blip2-vision", 224, 1408, CLIP_MEAN, CLIP_STD,
                                 "Salesforce/blip2-opt-2.7b"),
    "mae": BackboneSpec("mae", 224, 768, IMAGENET_MEAN, IMAGENET_STD,
                        "facebook/vit-mae-base"),
    "toy": BackboneSpec("toy", 32, TOY_DIM, (0.0, 0.0, 0.0), (1.0, 1.0, 1.0), None),
}


def available_backbones() -> list[str]:
    return sorted(_SPECS)


def get_spec(name: str) -> BackboneSpec:
    if name not in _SPECS:
        raise JobConfigError(
            f"unknown backbone {name!r}; choose from {available_backbones()}"
        )
    return _SPECS[name]


def load_backbone(name: str) -> Callable[[np.ndarray], np.ndarray]:
    """Return embed(batch) for the named backbone, importing lazily."""
    spec = get_spec(name)
    if spec.name == "toy":
        return _toy_embed(spec)
    if spec.name in ("clip-vit-b32", "clip-vit-l14"):
        return _clip_embed(spec)
    if spec.name == "dino-vit-b8":
        def build():
            from transformers import ViTModel

            return ViTModel.from_pretrained(spec.hub_id, add_pooling_layer=False)

        return _vit_cls_embed(spec, build)
    if spec.name == "siglip2":
        def build():
            from transformers import SiglipVisionModel

            return SiglipVisionModel.from_pretrained(spec.hub_id)

        model = _hf_loader(spec, build)()

        def embed(batch: np.ndarray) -> np.ndarray:
            import torch

            with torch.no_grad():
                out = model(pixel_values=torch.from_numpy(batch))
            return out.pooler_output.numpy().astype(np.float32)

        return embed
    if spec.name == "blip2-vision":
        def build():
            from transformers import Blip2VisionModel

            return Blip2VisionModel.from_pretrained(spec.hub_id)

        return _vit_cls_embed(spec, build)
    if spec.name == "mae":
        def build():
            from transformers import ViTMAEModel

            model = ViTMAEModel.from_pretrained(spec.hub_id)
            model.config.mask_ratio = 0.0  # features, not reconstruction
            return model

        return _vit_cls_embed(spec, build)
    raise JobConfigError(f"no loader wired for backbone {name!r}")


def preprocess(images: np.ndarray, spec: BackboneSpec) -> np.ndarray:
    """HWC float images -> normalized NCHW float32 at the backbone size."""
    from .augment import resize

    out = np.empty((images.shape[0], 3, spec.input_size, spec.input_size), dtype=np.float32)
    mean = np.asarray(spec.mean, dtype=np.float32)
    std = np.asarray(spec.std, dtype=np.float32)
    for i, img in enumerate(images):
        r = resize(img, spec.input_size) / 255.0
        out[i] = ((r - mean) / std).transpose(2, 0, 1)
    return out
