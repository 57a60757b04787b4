"""scpextract: frozen-backbone image embeddings written as SCPF files."""

from .augment import augment_view, gaussian_blur, random_crop, resize
from .backbones import available_backbones, get_spec, load_backbone, preprocess
from .errors import DatasetError, ExtractError, JobConfigError, WeightsUnavailableError
from .extract import ExtractJob, extract, verify

__version__ = "0.1.0"

__all__ = [
    "DatasetError",
    "ExtractError",
    "ExtractJob",
    "JobConfigError",
    "WeightsUnavailableError",
    "augment_view",
    "available_backbones",
    "extract",
    "gaussian_blur",
    "get_spec",
    "load_backbone",
    "preprocess",
    "random_crop",
    "resize",
    "verify",
]
