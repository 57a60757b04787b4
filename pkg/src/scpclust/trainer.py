"""Training loop: paired-view batches, combined loss, Adam with cosine decay.

One step = sample a PairBatch, forward both views through the head, evaluate
L_e + L_con - alpha*H(Y), backpropagate through both views, and apply one
optimizer update.  The schedule spans epochs * ceil(N / batch_size) steps.
Everything is deterministic given (config seed, dataset bytes).

A finished run writes a single checkpoint file holding the head parameters,
the optimizer moments (section "OPTM"), and the resolved config with its
hash (section "TCFG").
"""

from __future__ import annotations

import hashlib
import json
import logging
import math
from dataclasses import dataclass, field, asdict
from typing import Optional

import numpy as np

from .data import EmbeddingDataset, sample_pairs
from .errors import ConfigError, NonFiniteError
from .head import (
    AssignmentBatch,
    ClusterHead,
    backward,
    forward,
    init_head,
    read_checkpoint,
    write_checkpoint,
)
from .losses import LossBreakdown, loss_clu, loss_e
from .metrics import ClusteringReport, cluster_report
from .optim import CosineSchedule, adam_step, clip_grads_, init_adam, lr_at, pack_adam_state

log = logging.getLogger(__name__)

SECTION_OPTIMIZER = b"OPTM"
SECTION_CONFIG = b"TCFG"

EVAL_BATCH = 2048


@dataclass
class TrainConfig:
    """Hyperparameters of one training run.

    alpha weighs the entropy regularizer; 1 suits most datasets, 2-3 helps
    when the class count is large.  symmetrize_le averages the cross-entropy
    over both argument orders instead of the default asymmetric form.
    """

    k: int
    alpha: float = 1.0
    epochs: int = 30
    batch_size: int = 512
    lr_init: float = 1e-3
    seed: int = 0
    activation: str = "relu"
    symmetrize_le: bool = False
    l2_normalize: bool = False
    clip_norm: float = 0.0  # 0 disables gradient clipping
    log_every: int = 50
    eval_every_epochs: int = 1

    def validate(self) -> None:
        if self.k < 2:
            raise ConfigError(f"k must be >= 2, got {self.k}")
        if self.alpha < 0:
            raise ConfigError(f"alpha must be nonnegative, got {self.alpha}")
        if self.epochs < 0:
            raise ConfigError(f"epochs must be nonnegative, got {self.epochs}")
        if self.batch_size < 1:
            raise ConfigError(f"batch_size must be >= 1, got {self.batch_size}")
        if self.batch_size == 1:
            log.warning("batch_size=1: pairwise losses degenerate to row confidence")
        if self.lr_init < 0:
            raise ConfigError(f"lr_init must be nonnegative, got {self.lr_init}")
        if self.clip_norm < 0:
            raise ConfigError(f"clip_norm must be nonnegative, got {self.clip_norm}")

    def config_hash(self) -> str:
        blob = json.dumps(asdict(self), sort_keys=True).encode()
        return hashlib.sha256(blob).hexdigest()


@dataclass
class StepRecord:
    step: int
    lr: float
    l_e: float
    l_con: float
    entropy: float
    l_clu: float

    def line(self) -> str:
        return (
            f"step={self.step} lr={self.lr:.8f} l_e={self.l_e:.6f} "
            f"l_con={self.l_con:.6f} entropy={self.entropy:.6f} l_clu={self.l_clu:.6f}"
        )


@dataclass
class TrainTrace:
    records: list[StepRecord] = field(default_factory=list)
    epoch_reports: list[tuple[int, ClusteringReport]] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [r.line() for r in self.records]
        for epoch, report in self.epoch_reports:
            out.append(f"epoch={epoch} " + " ".join(report.lines()))
        return out


def _maybe_normalize(ds: EmbeddingDataset, want: bool) -> EmbeddingDataset:
    if not want or ds.l2_normalized:
        return ds
    feats = ds.features.astype(np.float64)
    norms = np.linalg.norm(feats, axis=2, keepdims=True)
    feats = feats / np.maximum(norms, 1e-12)
    return EmbeddingDataset(
        features=feats.astype("<f4"),
        labels=ds.labels,
        n_classes=ds.n_classes,
        l2_normalized=True,
        view0_is_clean=ds.view0_is_clean,
    )


def _step_losses(batch_a, batch_b, cfg: TrainConfig):
    breakdown, grad_a, grad_b = loss_clu(batch_a, batch_b, cfg.alpha)
    if not cfg.symmetrize_le:
        return breakdown, grad_a, grad_b
    # Replace the asymmetric term with the average over both orders.
    le_ab, ga_ab, gb_ab = loss_e(batch_a, batch_b)
    le_ba, gb_ba, ga_ba = loss_e(batch_b, batch_a)
    le_sym = 0.5 * (le_ab + le_ba)
    grad_a += 0.5 * (ga_ab + ga_ba) - ga_ab
    grad_b += 0.5 * (gb_ab + gb_ba) - gb_ab
    sym = LossBreakdown(
        l_e=le_sym,
        l_con=breakdown.l_con,
        entropy=breakdown.entropy,
        l_clu=le_sym + breakdown.l_con - cfg.alpha * breakdown.entropy,
        alpha=cfg.alpha,
    )
    return sym, grad_a, grad_b


def train(
    ds: EmbeddingDataset,
    cfg: TrainConfig,
    checkpoint_path: Optional[str] = None,
) -> tuple[ClusterHead, TrainTrace, ClusteringReport]:
    """Run the full loop and return (head, trace, final report).

    When checkpoint_path is given, the finished head is written there along
    with optimizer state and config, so the file can seed later evaluation.
    """
    cfg.validate()
    ds.validate()
    dataset_was_l2 = ds.l2_normalized
    ds = _maybe_normalize(ds, cfg.l2_normalize)

    # Independent streams for weight init and batch sampling, both children
    # of the single config seed.
    root = np.random.SeedSequence(cfg.seed)
    init_ss, sampler_ss = root.spawn(2)
    head = init_head(
        ds.dim,
        cfg.k,
        activation=cfg.activation,
        seed=int(init_ss.generate_state(1)[0]),
    )
    sampler_rng = np.random.default_rng(sampler_ss)

    trace = TrainTrace()
    state = init_adam(head.parameters())
    steps_per_epoch = math.ceil(ds.n_items / cfg.batch_size)
    total_steps = cfg.epochs * steps_per_epoch
    if total_steps == 0:
        if checkpoint_path is not None:
            save_run_checkpoint(checkpoint_path, head, cfg, state, dataset_was_l2)
        return head, trace, evaluate(head, ds)
    schedule = CosineSchedule(lr_init=cfg.lr_init, total_steps=total_steps)

    step = 0
    for epoch in range(cfg.epochs):
        for batch in sample_pairs(ds, cfg.batch_size, sampler_rng):
            ya, cache_a = forward(head, batch.feats_a)
            yb, cache_b = forward(head, batch.feats_b)
            breakdown, grad_a, grad_b = _step_losses(ya, yb, cfg)
            if not all(
                math.isfinite(v)
                for v in (breakdown.l_e, breakdown.l_con, breakdown.entropy, breakdown.l_clu)
            ):
                raise NonFiniteError(
                    f"non-finite loss at step {step}: l_e={breakdown.l_e} "
                    f"l_con={breakdown.l_con} entropy={breakdown.entropy}"
                )

            grads = backward(head, cache_a, grad_a)
            grads.add_(backward(head, cache_b, grad_b))
            flat = grads.parameters()
            if cfg.clip_norm > 0:
                clip_grads_(flat, cfg.clip_norm)

            lr = lr_at(schedule, step)
            adam_step(head.parameters(), flat, state, lr)
            head.mark_updated()

            record = StepRecord(
                step=step,
                lr=lr,
                l_e=breakdown.l_e,
                l_con=breakdown.l_con,
                entropy=breakdown.entropy,
                l_clu=breakdown.l_clu,
            )
            trace.records.append(record)
            if cfg.log_every and step % cfg.log_every == 0:
                log.info(record.line())
            step += 1

        if (
            ds.labels is not None
            and cfg.eval_every_epochs
            and (epoch + 1) % cfg.eval_every_epochs == 0
        ):
            trace.epoch_reports.append((epoch, evaluate(head, ds)))

    last = trace.records[-1]
    final = evaluate(head, ds)
    final.losses = {
        "l_e": last.l_e,
        "l_con": last.l_con,
        "entropy": last.entropy,
        "l_clu": last.l_clu,
    }
    if checkpoint_path is not None:
        save_run_checkpoint(checkpoint_path, head, cfg, state, dataset_was_l2)
    return head, trace, final


def evaluate(head: ClusterHead, ds: EmbeddingDataset) -> ClusteringReport:
    """Cluster the clean view with the head and summarize the assignment."""
    feats = ds.eval_view()
    probs = np.empty((ds.n_items, head.n_clusters), dtype=np.float64)
    for start in range(0, ds.n_items, EVAL_BATCH):
        batch, _ = forward(head, feats[start : start + EVAL_BATCH])
        probs[start : start + EVAL_BATCH] = batch.probs
    assign = AssignmentBatch(probs=probs, logits=np.log(np.maximum(probs, 1e-300)))
    return cluster_report(assign, ds.labels)


def save_run_checkpoint(
    path: str,
    head: ClusterHead,
    cfg: TrainConfig,
    adam_state=None,
    dataset_l2: bool = False,
) -> None:
    """Checkpoint = head params + optimizer moments + resolved config."""
    tcfg = dict(asdict(cfg))
    tcfg["config_hash"] = cfg.config_hash()
    tcfg["dataset_l2_normalized"] = bool(dataset_l2 or cfg.l2_normalize)
    sections = {SECTION_CONFIG: json.dumps(tcfg, sort_keys=True).encode()}
    if adam_state is not None:
        sections[SECTION_OPTIMIZER] = pack_adam_state(adam_state)
    write_checkpoint(path, head, sections)


def load_run_checkpoint(path: str) -> tuple[ClusterHead, Optional[dict]]:
    """Read a checkpoint; returns the head and the stored config (if any)."""
    head, sections = read_checkpoint(path)
    tcfg = None
    if SECTION_CONFIG in sections:
        tcfg = json.loads(sections[SECTION_CONFIG].decode())
    return head, tcfg


LOGITS_MAGIC = b"SCPL"


def export_logits(head: ClusterHead, ds: EmbeddingDataset, path: str) -> None:
    """Write pre-softmax outputs for the clean view as f32, little-endian.

    Header: magic "SCPL", n_items u64, n_clusters u32; then N*K floats
    row-major.  Intended for external embedding/visualization tools.
    """
    feats = ds.eval_view()
    rows = []
    for start in range(0, ds.n_items, EVAL_BATCH):
        batch, _ = forward(head, feats[start : start + EVAL_BATCH])
        rows.append(batch.logits)
    logits = np.concatenate(rows, axis=0)
    with open(path, "wb") as fh:
        fh.write(LOGITS_MAGIC)
        fh.write(ds.n_items.to_bytes(8, "little"))
        fh.write(int(head.n_clusters).to_bytes(4, "little"))
        fh.write(np.ascontiguousarray(logits, dtype="<f4").tobytes())


def load_logits(path: str) -> np.ndarray:
    """Read back an exported logits file as an (N, K) float32 array."""
    from .errors import FormatError

    with open(path, "rb") as fh:
        buf = fh.read()
    if len(buf) < 16:
        raise FormatError(f"logits file too short: {len(buf)} bytes")
    if buf[:4] != LOGITS_MAGIC:
        raise FormatError(f"bad logits magic {buf[:4]!r}, expected {LOGITS_MAGIC!r}")
    n = int.from_bytes(buf[4:12], "little")
    k = int.from_bytes(buf[12:16], "little")
    want = 16 + 4 * n * k
    if len(buf) != want:
        raise FormatError(f"logits file has {len(buf)} bytes, expected {want}")
    return np.frombuffer(buf, dtype="<f4", offset=16).reshape(n, k).copy()
