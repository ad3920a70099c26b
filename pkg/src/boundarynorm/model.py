"""Feedforward classifier with an exposed penultimate feature layer.

ReLU is applied between hidden layers; the last hidden layer's output is the
feature vector z and feeds the final affine layer through the identity, so
features are real-valued (this is what makes 2-D feature visualizations with
clusters in every direction possible, and keeps the logit vector away from
exact zero for generic inputs). Logits are f = z @ W + b with the final
weight stored feature-by-class (m x c). Checkpoints use a fixed
little-endian binary layout that round-trips parameters bit-exactly.
"""

from __future__ import annotations

import struct
from dataclasses import dataclass, field

import numpy as np

from .rng import make_rng

CHECKPOINT_MAGIC = b"BNCKPT01"

# Tensor dimensions are stored as u32; anything larger is refused.
_MAX_DIM = 2**32 - 1


class CheckpointError(Exception):
    """Base class for checkpoint persistence failures."""


class CheckpointMagicError(CheckpointError):
    """File does not start with the expected magic bytes."""


class CheckpointTruncatedError(CheckpointError):
    """File ended before all declared tensor data could be read."""


class CheckpointDimensionError(CheckpointError):
    """Tensor dimensions are zero, absurd, or do not fit the format."""


@dataclass(frozen=True)
class LayerParams:
    """One hidden layer: weight (out x in) and bias (out)."""

    weight: np.ndarray
    bias: np.ndarray

    def __post_init__(self):
        if self.weight.ndim != 2 or self.bias.ndim != 1:
            raise ValueError("layer weight must be 2-D and bias 1-D")
        if self.weight.shape[0] != self.bias.shape[0]:
            raise ValueError(
                f"layer weight rows ({self.weight.shape[0]}) != bias length "
                f"({self.bias.shape[0]})"
            )
        if not (np.all(np.isfinite(self.weight)) and np.all(np.isfinite(self.bias))):
            raise ValueError("layer parameters must be finite")


@dataclass(frozen=True)
class ModelParams:
    """Hidden layer stack plus the final affine layer W (m x c), b (c)."""

    hidden: tuple[LayerParams, ...]
    final_weight: np.ndarray
    final_bias: np.ndarray
    activation: str = "relu"

    def __post_init__(self):
        if self.activation != "relu":
            raise ValueError(f"unsupported activation {self.activation!r}")
        if self.final_weight.ndim != 2 or self.final_bias.ndim != 1:
            raise ValueError("final weight must be 2-D and final bias 1-D")
        m, c = self.final_weight.shape
        if c < 2:
            raise ValueError(f"need at least 2 classes, got {c}")
        if m < 1:
            raise ValueError("feature dimension must be >= 1")
        if self.final_bias.shape[0] != c:
            raise ValueError("final bias length must equal class count")
        if not (np.all(np.isfinite(self.final_weight)) and np.all(np.isfinite(self.final_bias))):
            raise ValueError("final layer parameters must be finite")
        expect = self.input_dim
        for i, layer in enumerate(self.hidden):
            if layer.weight.shape[1] != expect:
                raise ValueError(
                    f"hidden layer {i} expects input {layer.weight.shape[1]}, "
                    f"chain provides {expect}"
                )
            expect = layer.weight.shape[0]
        if expect != m:
            raise ValueError(
                f"last hidden layer outputs {expect}, final layer expects {m}"
            )

    @property
    def feature_dim(self) -> int:
        return self.final_weight.shape[0]

    @property
    def n_classes(self) -> int:
        return self.final_weight.shape[1]

    @property
    def input_dim(self) -> int:
        if self.hidden:
            return self.hidden[0].weight.shape[1]
        return self.final_weight.shape[0]


@dataclass(frozen=True)
class ForwardBatch:
    """Per-sample penultimate features z (n x m) and logits f (n x c)."""

    features: np.ndarray
    logits: np.ndarray

    def __post_init__(self):
        if self.features.ndim != 2 or self.logits.ndim != 2:
            raise ValueError("features and logits must be 2-D")
        if self.features.shape[0] != self.logits.shape[0]:
            raise ValueError("features and logits must have the same sample count")


@dataclass
class ForwardCache:
    """Intermediate activations retained for backpropagation."""

    inputs: np.ndarray
    # Pre-activation values for each hidden layer, in forward order.
    pre_activations: list[np.ndarray] = field(default_factory=list)
    # Layer outputs: ReLU(pre) for all but the last hidden layer, identity
    # for the last one; activations[-1] is the feature matrix z.
    activations: list[np.ndarray] = field(default_factory=list)


def init_model(layer_sizes, seed: int) -> ModelParams:
    """Deterministic scaled-uniform fan-in init; biases zero.

    layer_sizes = (input_dim, hidden..., feature_dim, n_classes). Weights are
    drawn uniformly from [-sqrt(6/fan_in), sqrt(6/fan_in)].
    """
    sizes = [int(s) for s in layer_sizes]
    if len(sizes) < 2:
        raise ValueError("need at least (feature_dim, n_classes) sizes")
    if any(s < 1 for s in sizes):
        raise ValueError(f"all layer sizes must be >= 1, got {sizes}")
    rng = make_rng(seed)
    hidden: list[LayerParams] = []
    for fan_in, fan_out in zip(sizes[:-2], sizes[1:-1]):
        bound = np.sqrt(6.0 / fan_in)
        weight = rng.uniform(-bound, bound, size=(fan_out, fan_in))
        hidden.append(LayerParams(weight=weight, bias=np.zeros(fan_out)))
    m, c = sizes[-2], sizes[-1]
    bound = np.sqrt(6.0 / m)
    final_weight = rng.uniform(-bound, bound, size=(m, c))
    return ModelParams(
        hidden=tuple(hidden),
        final_weight=final_weight,
        final_bias=np.zeros(c),
    )


def forward_with_cache(model: ModelParams, inputs) -> tuple[ForwardBatch, ForwardCache]:
    """Forward pass keeping the per-layer activations needed for backprop."""
    x = np.asarray(inputs, dtype=np.float64)
    if x.ndim != 2:
        raise ValueError("inputs must be a 2-D batch")
    if x.shape[1] != model.input_dim:
        raise ValueError(
            f"input dimension {x.shape[1]} does not match model input "
            f"{model.input_dim}"
        )
    cache = ForwardCache(inputs=x)
    a = x
    last = len(model.hidden) - 1
    for idx, layer in enumerate(model.hidden):
        pre = a @ layer.weight.T + layer.bias
        a = pre if idx == last else np.maximum(pre, 0.0)
        cache.pre_activations.append(pre)
        cache.activations.append(a)
    logits = a @ model.final_weight + model.final_bias
    return ForwardBatch(features=a, logits=logits), cache


def forward(model: ModelParams, inputs) -> ForwardBatch:
    batch, _ = forward_with_cache(model, inputs)
    return batch


def reconstruction_error(model: ModelParams, batch: ForwardBatch) -> float:
    """Max-abs deviation of logits from features @ W + b."""
    rebuilt = batch.features @ model.final_weight + model.final_bias
    return float(np.max(np.abs(batch.logits - rebuilt))) if batch.logits.size else 0.0


def _write_tensor(out, array: np.ndarray) -> None:
    if array.ndim == 1:
        rows, cols = array.shape[0], 1
    else:
        rows, cols = array.shape
    if rows > _MAX_DIM or cols > _MAX_DIM:
        raise CheckpointDimensionError(f"tensor dimensions {rows}x{cols} exceed format")
    out.write(struct.pack("<II", rows, cols))
    out.write(np.ascontiguousarray(array, dtype="<f8").tobytes())


def _read_exact(fh, n: int) -> bytes:
    data = fh.read(n)
    if len(data) != n:
        raise CheckpointTruncatedError(
            f"checkpoint ended early: wanted {n} bytes, got {len(data)}"
        )
    return data


def _read_tensor(fh, file_size: int) -> np.ndarray:
    rows, cols = struct.unpack("<II", _read_exact(fh, 8))
    if rows == 0 or cols == 0:
        raise CheckpointDimensionError(f"tensor with zero dimension {rows}x{cols}")
    n_bytes = rows * cols * 8
    # A tensor that could never fit in the file signals corrupt dimensions;
    # short data within a plausible size is a truncation.
    if n_bytes > file_size:
        raise CheckpointDimensionError(
            f"tensor {rows}x{cols} larger than the whole file ({file_size} bytes)"
        )
    data = _read_exact(fh, n_bytes)
    return np.frombuffer(data, dtype="<f8").astype(np.float64).reshape(rows, cols)


def save_checkpoint(model: ModelParams, path) -> None:
    """Binary layout: magic, u32 layer count, then per-layer weight and bias
    tensors (u32 rows, u32 cols, row-major f64), final layer last with the
    weight stored m x c."""
    with open(path, "wb") as out:
        out.write(CHECKPOINT_MAGIC)
        out.write(struct.pack("<I", len(model.hidden) + 1))
        for layer in model.hidden:
            _write_tensor(out, layer.weight)
            _write_tensor(out, layer.bias)
        _write_tensor(out, model.final_weight)
        _write_tensor(out, model.final_bias)


def load_checkpoint(path) -> ModelParams:
    import os

    file_size = os.path.getsize(path)
    with open(path, "rb") as fh:
        magic = fh.read(len(CHECKPOINT_MAGIC))
        if magic != CHECKPOINT_MAGIC:
            raise CheckpointMagicError(
                f"bad checkpoint magic {magic!r}, expected {CHECKPOINT_MAGIC!r}"
            )
        (n_layers,) = struct.unpack("<I", _read_exact(fh, 4))
        if n_layers < 1:
            raise CheckpointDimensionError("checkpoint declares zero layers")
        tensors = []
        for _ in range(n_layers):
            weight = _read_tensor(fh, file_size)
            bias = _read_tensor(fh, file_size)
            tensors.append((weight, bias[:, 0]))
    hidden = tuple(LayerParams(weight=w, bias=b) for w, b in tensors[:-1])
    final_weight, final_bias = tensors[-1]
    return ModelParams(hidden=hidden, final_weight=final_weight, final_bias=final_bias)
