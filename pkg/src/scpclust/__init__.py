"""Deep clustering on frozen, precomputed embeddings.

Trains a small softmax cluster head on pairs of augmented-view embeddings
with a cross-view consistency loss, a confidence loss, and an entropy
regularizer that keeps clusters populated.  No backbone, no pixels: datasets
are SCPF files of precomputed features.
"""

from .baseline import KMeansResult, kmeans
from .data import (
    EmbeddingDataset,
    PairBatch,
    concat_features,
    load_scpf,
    make_blobs,
    sample_pairs,
    save_scpf,
)
from .errors import (
    AlignmentError,
    CacheError,
    ConfigError,
    DataError,
    FormatError,
    NonFiniteError,
    ScpError,
    ShapeError,
    UndefinedMetricError,
)
from .head import (
    AssignmentBatch,
    ClusterHead,
    ForwardCache,
    ParamGrads,
    backward,
    forward,
    init_head,
    load_head,
    read_checkpoint,
    save_head,
    write_checkpoint,
)
from .losses import (
    EPS,
    LossBreakdown,
    MeanAssignment,
    entropy_reg,
    loss_clu,
    loss_con,
    loss_e,
)
from .metrics import (
    ClusteringReport,
    ContingencyTable,
    ari,
    cluster_report,
    contingency,
    hungarian_acc,
    nmi,
)
from .optim import AdamState, CosineSchedule, adam_step, init_adam, lr_at
from .trainer import (
    TrainConfig,
    TrainTrace,
    evaluate,
    export_logits,
    load_logits,
    load_run_checkpoint,
    save_run_checkpoint,
    train,
)

__version__ = "0.1.0"

__all__ = [
    "AdamState",
    "AlignmentError",
    "AssignmentBatch",
    "CacheError",
    "ClusterHead",
    "ClusteringReport",
    "ConfigError",
    "ContingencyTable",
    "CosineSchedule",
    "DataError",
    "EPS",
    "EmbeddingDataset",
    "FormatError",
    "ForwardCache",
    "KMeansResult",
    "LossBreakdown",
    "MeanAssignment",
    "NonFiniteError",
    "PairBatch",
    "ParamGrads",
    "ScpError",
    "ShapeError",
    "TrainConfig",
    "TrainTrace",
    "UndefinedMetricError",
    "adam_step",
    "ari",
    "backward",
    "cluster_report",
    "concat_features",
    "contingency",
    "entropy_reg",
    "evaluate",
    "export_logits",
    "forward",
    "hungarian_acc",
    "init_adam",
    "init_head",
    "kmeans",
    "load_head",
    "load_logits",
    "load_run_checkpoint",
    "load_scpf",
    "loss_clu",
    "loss_con",
    "loss_e",
    "lr_at",
    "make_blobs",
    "nmi",
    "read_checkpoint",
    "sample_pairs",
    "save_head",
    "save_run_checkpoint",
    "save_scpf",
    "train",
    "write_checkpoint",
]
