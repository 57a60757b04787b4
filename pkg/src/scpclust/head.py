"""Five-layer softmax cluster head with analytic forward and backward passes.

The head maps a D-dimensional frozen embedding to a K-dimensional soft cluster
assignment through the fixed chain D -> 1024 -> 786 -> 512 -> 1024 -> K with a
row softmax on the output.  Parameters are kept in float64; the checkpoint
format stores them as little-endian float32 (see ``write_checkpoint``).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
from scipy.special import erf

from .errors import CacheError, ConfigError, DataError, FormatError, ShapeError

# Hidden widths of the standard head.  786 is intentional (not 768); pass
# custom ``hidden_dims`` to override.
HIDDEN_DIMS = (1024, 786, 512, 1024)
N_LAYERS = 5

ACTIVATIONS = ("relu", "gelu", "tanh")

CHECKPOINT_MAGIC = b"SCPH"
CHECKPOINT_VERSION = 1
_ACTIVATION_TAGS = {"relu": 0, "gelu": 1, "tanh": 2}
_TAG_ACTIVATIONS = {v: k for k, v in _ACTIVATION_TAGS.items()}

_INV_SQRT2 = 1.0 / math.sqrt(2.0)
_INV_SQRT2PI = 1.0 / math.sqrt(2.0 * math.pi)


def _activate(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return np.maximum(z, 0.0)
    if kind == "gelu":
        return 0.5 * z * (1.0 + erf(z * _INV_SQRT2))
    if kind == "tanh":
        return np.tanh(z)
    raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def _activate_grad(z: np.ndarray, kind: str) -> np.ndarray:
    if kind == "relu":
        return (z > 0.0).astype(z.dtype)
    if kind == "gelu":
        return 0.5 * (1.0 + erf(z * _INV_SQRT2)) + z * _INV_SQRT2PI * np.exp(-0.5 * z * z)
    if kind == "tanh":
        t = np.tanh(z)
        return 1.0 - t * t
    raise ConfigError(f"unknown activation {kind!r}; expected one of {ACTIVATIONS}")


def softmax(logits: np.ndarray) -> np.ndarray:
    """Row softmax with max-subtraction for numerical stability."""
    shifted = logits - logits.max(axis=1, keepdims=True)
    e = np.exp(shifted)
    return e / e.sum(axis=1, keepdims=True)


@dataclass
class AssignmentBatch:
    """Soft cluster assignments for a batch: probs is the row softmax of logits."""

    probs: np.ndarray   # (B, K), rows nonnegative, each summing to 1
    logits: np.ndarray  # (B, K), pre-softmax outputs

    @property
    def batch_size(self) -> int:
        return self.probs.shape[0]

    @property
    def n_clusters(self) -> int:
        return self.probs.shape[1]

    @classmethod
    def from_probs(cls, probs: np.ndarray, eps: float = 1e-12) -> "AssignmentBatch":
        """Wrap an explicit probability matrix; logits are clamped row logs."""
        p = np.asarray(probs, dtype=np.float64)
        if p.ndim != 2:
            raise ShapeError(f"probs must be 2-d, got shape {p.shape}")
        return cls(probs=p, logits=np.log(np.maximum(p, eps)))

    @classmethod
    def from_labels(cls, labels: np.ndarray, n_clusters: int) -> "AssignmentBatch":
        """One-hot assignment batch from hard labels."""
        labels = np.asarray(labels, dtype=np.int64)
        if labels.ndim != 1:
            raise ShapeError(f"labels must be 1-d, got shape {labels.shape}")
        if labels.size and (labels.min() < 0 or labels.max() >= n_clusters):
            raise DataError("labels out of range for one-hot encoding")
        probs = np.zeros((labels.size, n_clusters), dtype=np.float64)
        probs[np.arange(labels.size), labels] = 1.0
        return cls.from_probs(probs)

    def hard_labels(self) -> np.ndarray:
        """Row argmax; ties resolve to the lowest cluster index."""
        return np.argmax(self.probs, axis=1)


@dataclass
class ClusterHead:
    """Trainable parameters of the cluster head.

    weights[i] has shape (layer_dims[i+1], layer_dims[i]); biases[i] has
    length layer_dims[i+1].  ``version`` increments whenever parameters are
    mutated and is used to invalidate stale forward caches.
    """

    layer_dims: list[int]
    weights: list[np.ndarray]
    biases: list[np.ndarray]
    hidden_activation: str = "relu"
    rng_seed: int = 0
    version: int = field(default=0, compare=False)

    def __post_init__(self):
        if len(self.layer_dims) != N_LAYERS + 1:
            raise ConfigError(
                f"head needs {N_LAYERS + 1} layer dims, got {len(self.layer_dims)}"
            )
        if self.hidden_activation not in ACTIVATIONS:
            raise ConfigError(
                f"unknown activation {self.hidden_activation!r}; expected one of {ACTIVATIONS}"
            )
        for i, (w, b) in enumerate(zip(self.weights, self.biases)):
            want = (self.layer_dims[i + 1], self.layer_dims[i])
            if w.shape != want:
                raise ShapeError(f"weight {i} has shape {w.shape}, expected {want}")
            if b.shape != (self.layer_dims[i + 1],):
                raise ShapeError(
                    f"bias {i} has shape {b.shape}, expected ({self.layer_dims[i + 1]},)"
                )

    @property
    def dim_in(self) -> int:
        return self.layer_dims[0]

    @property
    def n_clusters(self) -> int:
        return self.layer_dims[-1]

    @property
    def param_count(self) -> int:
        return sum(
            (self.layer_dims[i] + 1) * self.layer_dims[i + 1] for i in range(N_LAYERS)
        )

    def parameters(self) -> list[np.ndarray]:
        """Interleaved [W0, b0, W1, b1, ...] list of the trainable arrays."""
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def mark_updated(self) -> None:
        """Invalidate outstanding forward caches after in-place mutation."""
        self.version += 1

    def all_finite(self) -> bool:
        return all(np.isfinite(p).all() for p in self.parameters())


@dataclass
class ParamGrads:
    """Gradients mirroring ClusterHead parameter shapes."""

    weights: list[np.ndarray]
    biases: list[np.ndarray]

    def parameters(self) -> list[np.ndarray]:
        out: list[np.ndarray] = []
        for w, b in zip(self.weights, self.biases):
            out.append(w)
            out.append(b)
        return out

    def add_(self, other: "ParamGrads") -> "ParamGrads":
        """In-place elementwise sum; used to merge the two views' gradients."""
        for mine, theirs in zip(self.parameters(), other.parameters()):
            mine += theirs
        return self


@dataclass
class ForwardCache:
    """Everything backward needs: layer inputs, pre-activations, and probs."""

    head: ClusterHead
    head_version: int
    inputs: list[np.ndarray]    # inputs[i] fed into layer i, len N_LAYERS
    pre_acts: list[np.ndarray]  # hidden pre-activations z_1..z_{N_LAYERS-1}
    probs: np.ndarray


def init_head(
    dim_in: int,
    n_clusters: int,
    activation: str = "relu",
    seed: int = 0,
    hidden_dims: tuple[int, ...] = HIDDEN_DIMS,
) -> ClusterHead:
    """Build a head with fan-in-scaled uniform weights and zero biases.

    Weight entries are drawn from U(-b, b) with b = sqrt(6 / fan_in), which
    keeps pre-activation variance roughly constant across layers.  The draw
    is fully determined by ``seed``.
    """
    if n_clusters < 2:
        raise ConfigError(f"invalid cluster count {n_clusters}: need at least 2 clusters")
    if dim_in < 1:
        raise ConfigError(f"invalid input dimension {dim_in}: need at least 1")
    if len(hidden_dims) != N_LAYERS - 1:
        raise ConfigError(f"need {N_LAYERS - 1} hidden dims, got {len(hidden_dims)}")
    dims = [int(dim_in), *[int(h) for h in hidden_dims], int(n_clusters)]
    if any(d < 1 for d in dims):
        raise ConfigError(f"invalid dimension in {dims}: all must be positive")

    rng = np.random.default_rng(seed)
    weights, biases = [], []
    for fan_in, fan_out in zip(dims[:-1], dims[1:]):
        bound = math.sqrt(6.0 / fan_in)
        weights.append(rng.uniform(-bound, bound, size=(fan_out, fan_in)))
        biases.append(np.zeros(fan_out, dtype=np.float64))
    return ClusterHead(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=activation,
        rng_seed=int(seed),
    )


def forward(head: ClusterHead, features: np.ndarray) -> tuple[AssignmentBatch, ForwardCache]:
    """Run the affine/activation chain and the output softmax.

    Returns the assignment batch together with the cache that ``backward``
    consumes.  Raises ShapeError on a width mismatch and DataError on
    non-finite input.
    """
    x = np.asarray(features, dtype=np.float64)
    if x.ndim != 2:
        raise ShapeError(f"features must be 2-d (B, D), got shape {x.shape}")
    if x.shape[1] != head.dim_in:
        raise ShapeError(
            f"feature width {x.shape[1]} does not match head input dim {head.dim_in}"
        )
    if not np.isfinite(x).all():
        raise DataError("non-finite entries in input features")

    inputs: list[np.ndarray] = []
    pre_acts: list[np.ndarray] = []
    a = x
    for i in range(N_LAYERS - 1):
        inputs.append(a)
        z = a @ head.weights[i].T + head.biases[i]
        pre_acts.append(z)
        a = _activate(z, head.hidden_activation)
    inputs.append(a)
    logits = a @ head.weights[-1].T + head.biases[-1]
    probs = softmax(logits)

    cache = ForwardCache(
        head=head,
        head_version=head.version,
        inputs=inputs,
        pre_acts=pre_acts,
        probs=probs,
    )
    return AssignmentBatch(probs=probs, logits=logits), cache


def backward(head: ClusterHead, cache: ForwardCache, grad_wrt_probs: np.ndarray) -> ParamGrads:
    """Analytic gradients of a scalar loss through probs for every parameter.

    The softmax Jacobian is applied first, so callers differentiate losses
    with respect to probabilities, not logits.
    """
    if cache.head is not head:
        raise CacheError("cache was produced by a different head")
    if cache.head_version != head.version:
        raise CacheError(
            "stale cache: head parameters changed since the matching forward call"
        )
    g = np.asarray(grad_wrt_probs, dtype=np.float64)
    if g.shape != cache.probs.shape:
        raise CacheError(
            f"grad_wrt_probs shape {g.shape} does not match forward batch {cache.probs.shape}"
        )

    # dL/dlogits = p * (g - sum_k g_k p_k) row-wise (softmax Jacobian).
    p = cache.probs
    dz = p * (g - (g * p).sum(axis=1, keepdims=True))

    grads_w: list[np.ndarray] = [None] * N_LAYERS  # type: ignore[list-item]
    grads_b: list[np.ndarray] = [None] * N_LAYERS  # type: ignore[list-item]
    for i in range(N_LAYERS - 1, -1, -1):
        grads_w[i] = dz.T @ cache.inputs[i]
        grads_b[i] = dz.sum(axis=0)
        if i > 0:
            da = dz @ head.weights[i]
            dz = da * _activate_grad(cache.pre_acts[i - 1], head.hidden_activation)
    return ParamGrads(weights=grads_w, biases=grads_b)


def _pack_u32(value: int) -> bytes:
    return int(value).to_bytes(4, "little")


def _read_exact(buf: bytes, offset: int, size: int, what: str) -> tuple[bytes, int]:
    end = offset + size
    if end > len(buf):
        raise FormatError(
            f"truncated checkpoint while reading {what}: "
            f"need bytes [{offset}, {end}), file has {len(buf)}"
        )
    return buf[offset:end], end


def write_checkpoint(
    path: str,
    head: ClusterHead,
    extra_sections: dict[bytes, bytes] | None = None,
) -> None:
    """Serialize a head (and optional tagged sections) to the SCPH format.

    Layout, all little-endian: magic "SCPH", version u32, activation tag u8,
    6 layer dims as u32, then per layer the weight matrix row-major and the
    bias, both float32.  Each extra section is a 4-byte tag, a u64 payload
    length, and the payload.
    """
    parts = [CHECKPOINT_MAGIC, _pack_u32(CHECKPOINT_VERSION)]
    parts.append(bytes([_ACTIVATION_TAGS[head.hidden_activation]]))
    for d in head.layer_dims:
        parts.append(_pack_u32(d))
    for w, b in zip(head.weights, head.biases):
        parts.append(np.ascontiguousarray(w, dtype="<f4").tobytes())
        parts.append(np.ascontiguousarray(b, dtype="<f4").tobytes())
    for tag, payload in (extra_sections or {}).items():
        if len(tag) != 4:
            raise ConfigError(f"section tag must be 4 bytes, got {tag!r}")
        parts.append(tag)
        parts.append(len(payload).to_bytes(8, "little"))
        parts.append(payload)
    with open(path, "wb") as fh:
        fh.write(b"".join(parts))


def read_checkpoint(path: str) -> tuple[ClusterHead, dict[bytes, bytes]]:
    """Load a head checkpoint; returns the head and any tagged sections."""
    with open(path, "rb") as fh:
        buf = fh.read()

    raw, off = _read_exact(buf, 0, 4, "magic")
    if raw != CHECKPOINT_MAGIC:
        raise FormatError(f"bad checkpoint magic {raw!r}, expected {CHECKPOINT_MAGIC!r}")
    raw, off = _read_exact(buf, off, 4, "version")
    version = int.from_bytes(raw, "little")
    if version != CHECKPOINT_VERSION:
        raise FormatError(f"unsupported checkpoint version {version}")
    raw, off = _read_exact(buf, off, 1, "activation tag")
    tag = raw[0]
    if tag not in _TAG_ACTIVATIONS:
        raise FormatError(f"unknown activation tag {tag}")
    activation = _TAG_ACTIVATIONS[tag]

    dims = []
    for i in range(N_LAYERS + 1):
        raw, off = _read_exact(buf, off, 4, f"layer dim {i}")
        dims.append(int.from_bytes(raw, "little"))
    if any(d < 1 for d in dims):
        raise FormatError(f"non-positive layer dim in header: {dims}")

    weights, biases = [], []
    for i in range(N_LAYERS):
        n_w = dims[i + 1] * dims[i]
        raw, off = _read_exact(buf, off, 4 * n_w, f"weight {i}")
        w = np.frombuffer(raw, dtype="<f4").astype(np.float64).reshape(dims[i + 1], dims[i])
        raw, off = _read_exact(buf, off, 4 * dims[i + 1], f"bias {i}")
        b = np.frombuffer(raw, dtype="<f4").astype(np.float64)
        weights.append(w)
        biases.append(b)

    sections: dict[bytes, bytes] = {}
    while off < len(buf):
        tag_raw, off = _read_exact(buf, off, 4, "section tag")
        raw, off = _read_exact(buf, off, 8, f"section {tag_raw!r} length")
        length = int.from_bytes(raw, "little")
        payload, off = _read_exact(buf, off, length, f"section {tag_raw!r} payload")
        sections[tag_raw] = payload

    head = ClusterHead(
        layer_dims=dims,
        weights=weights,
        biases=biases,
        hidden_activation=activation,
    )
    if not head.all_finite():
        raise DataError("checkpoint contains non-finite parameters")
    return head, sections


def save_head(head: ClusterHead, path: str) -> None:
    write_checkpoint(path, head)


def load_head(path: str) -> ClusterHead:
    head, _ = read_checkpoint(path)
    return head
