"""Adam with a per-step cosine learning-rate schedule.

Moments live in float64 and mirror the parameter list shapes.  State can be
packed into a byte payload for embedding in a head checkpoint, so an
interrupted run resumes with identical optimizer dynamics.
"""

from __future__ import annotations

import logging
import math
import struct
from dataclasses import dataclass, field

import numpy as np

from .errors import ConfigError, NonFiniteError, ShapeError

log = logging.getLogger(__name__)


@dataclass
class AdamState:
    """First/second moment estimates for one parameter list."""

    m: list[np.ndarray]
    v: list[np.ndarray]
    step_count: int = 0
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8


@dataclass
class CosineSchedule:
    """Half-cosine decay from lr_init at step 0 to lr_min at total_steps."""

    lr_init: float = 1e-3
    total_steps: int = 1
    lr_min: float = 0.0
    _overrun_logged: bool = field(default=False, repr=False, compare=False)

    def __post_init__(self):
        if self.total_steps < 1:
            raise ConfigError(f"total_steps must be >= 1, got {self.total_steps}")
        if self.lr_init < self.lr_min:
            raise ConfigError(
                f"lr_init {self.lr_init} below lr_min {self.lr_min}"
            )


def lr_at(schedule: CosineSchedule, step: int) -> float:
    """Learning rate at an integer step; steps past the end clamp to lr_min."""
    if step < 0:
        raise ConfigError(f"step must be nonnegative, got {step}")
    if step > schedule.total_steps:
        if not schedule._overrun_logged:
            log.warning(
                "lr_at called with step %d past total_steps %d; clamping to lr_min",
                step,
                schedule.total_steps,
            )
            schedule._overrun_logged = True
        return schedule.lr_min
    span = schedule.lr_init - schedule.lr_min
    return schedule.lr_min + 0.5 * span * (1.0 + math.cos(math.pi * step / schedule.total_steps))


def init_adam(
    params: list[np.ndarray],
    beta1: float = 0.9,
    beta2: float = 0.999,
    eps: float = 1e-8,
) -> AdamState:
    return AdamState(
        m=[np.zeros_like(p) for p in params],
        v=[np.zeros_like(p) for p in params],
        step_count=0,
        beta1=beta1,
        beta2=beta2,
        eps=eps,
    )


def adam_step(
    params: list[np.ndarray],
    grads: list[np.ndarray],
    state: AdamState,
    lr: float,
) -> tuple[list[np.ndarray], AdamState]:
    """One bias-corrected Adam update, applied to params in place.

    Rejects the step with NonFiniteError if any gradient entry is not finite,
    leaving params and state untouched, so a diverged run aborts loudly
    instead of silently writing NaNs into the head.
    """
    if len(params) != len(grads) or len(params) != len(state.m):
        raise ShapeError(
            f"param/grad/state length mismatch: {len(params)}/{len(grads)}/{len(state.m)}"
        )
    if lr < 0:
        raise ConfigError(f"learning rate must be nonnegative, got {lr}")
    for i, (p, g) in enumerate(zip(params, grads)):
        if p.shape != g.shape:
            raise ShapeError(f"grad {i} shape {g.shape} does not match param {p.shape}")
        if not np.isfinite(g).all():
            raise NonFiniteError(f"non-finite entries in gradient {i}; step rejected")

    state.step_count += 1
    t = state.step_count
    bc1 = 1.0 - state.beta1 ** t
    bc2 = 1.0 - state.beta2 ** t
    for p, g, m, v in zip(params, grads, state.m, state.v):
        m *= state.beta1
        m += (1.0 - state.beta1) * g
        v *= state.beta2
        v += (1.0 - state.beta2) * (g * g)
        p -= lr * (m / bc1) / (np.sqrt(v / bc2) + state.eps)
    return params, state


def clip_grads_(grads: list[np.ndarray], max_norm: float) -> float:
    """Scale the whole gradient list so its global L2 norm is <= max_norm.

    Returns the pre-clip norm.  Off by default in training; enabled via
    TrainConfig.clip_norm.
    """
    total = math.sqrt(sum(float((g * g).sum()) for g in grads))
    if total > max_norm > 0:
        scale = max_norm / total
        for g in grads:
            g *= scale
    return total


_STATE_HEADER = struct.Struct("<QdddI")


def pack_adam_state(state: AdamState) -> bytes:
    """Serialize moments and counters to little-endian bytes.

    Layout: step_count u64, beta1/beta2/eps f64, n_arrays u32, then each m
    array followed by its v array as raw float64 (shapes are implied by the
    checkpoint's own parameter list).
    """
    parts = [
        _STATE_HEADER.pack(state.step_count, state.beta1, state.beta2, state.eps, len(state.m))
    ]
    for m, v in zip(state.m, state.v):
        parts.append(np.ascontiguousarray(m, dtype="<f8").tobytes())
        parts.append(np.ascontiguousarray(v, dtype="<f8").tobytes())
    return b"".join(parts)


def unpack_adam_state(payload: bytes, params: list[np.ndarray]) -> AdamState:
    """Inverse of pack_adam_state; params supply the array shapes."""
    if len(payload) < _STATE_HEADER.size:
        raise ShapeError("optimizer state payload too short for its header")
    step_count, beta1, beta2, eps, n_arrays = _STATE_HEADER.unpack_from(payload, 0)
    if n_arrays != len(params):
        raise ShapeError(
            f"optimizer state holds {n_arrays} arrays but head has {len(params)} parameters"
        )
    off = _STATE_HEADER.size
    m_list, v_list = [], []
    for p in params:
        n = 8 * p.size
        if off + 2 * n > len(payload):
            raise ShapeError("optimizer state payload truncated")
        m_list.append(np.frombuffer(payload, dtype="<f8", count=p.size, offset=off).reshape(p.shape).copy())
        off += n
        v_list.append(np.frombuffer(payload, dtype="<f8", count=p.size, offset=off).reshape(p.shape).copy())
        off += n
    return AdamState(m=m_list, v=v_list, step_count=step_count, beta1=beta1, beta2=beta2, eps=eps)
