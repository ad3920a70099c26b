"""Training objectives: cross-entropy, logit-norm scaling, and the
boundary-distance variant, all with analytic gradients.

Every loss is a mean over the batch of -log softmax(f/s)_y for some
per-sample scale s: s = 1 (cross-entropy), s = tau * ||f|| (logit
normalization), or s = D(z), the average distance from the feature vector to
the decision boundaries of the predicted class. Gradients flow through the
scale unless explicitly detached.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import log_sum_exp_rows
from .model import ForwardBatch, ForwardCache, ModelParams, forward_with_cache

# Boundary distances are floored here so samples sitting exactly on a
# decision boundary cannot produce a zero scale.
BOUNDARY_FLOOR = 1e-6

# Default temperature for the logit-norm baseline (configurable everywhere).
DEFAULT_TAU = 0.04

LOSS_NAMES = ("cross_entropy", "logitnorm", "elogitnorm")


class DuplicateClassWeightsError(ValueError):
    """Two classifier columns coincide, so their boundary is undefined."""

    def __init__(self, class_a: int, class_b: int):
        self.class_pair = (class_a, class_b)
        super().__init__(
            f"classifier weight columns {class_a} and {class_b} coincide; "
            "the decision boundary between them is undefined"
        )


@dataclass(frozen=True)
class LossKind:
    name: str
    tau: float = DEFAULT_TAU

    def __post_init__(self):
        if self.name not in LOSS_NAMES:
            raise ValueError(
                f"unknown loss {self.name!r}; valid losses: {', '.join(LOSS_NAMES)}"
            )
        if self.tau <= 0:
            raise ValueError("tau must be positive")


@dataclass
class ModelGrads:
    """Gradient tensors, shape-congruent with ModelParams."""

    hidden: tuple[tuple[np.ndarray, np.ndarray], ...]
    final_weight: np.ndarray
    final_bias: np.ndarray


@dataclass
class LossResult:
    value: float
    grads: ModelGrads


@dataclass
class BoundaryDistance:
    per_sample: np.ndarray
    argmax_index: np.ndarray


def softmax_rows(logits: np.ndarray) -> np.ndarray:
    shift = logits - np.max(logits, axis=1, keepdims=True)
    e = np.exp(shift)
    return e / np.sum(e, axis=1, keepdims=True)


def _check_labels(labels, n_classes: int) -> np.ndarray:
    y = np.asarray(labels)
    if y.ndim != 1:
        raise ValueError("labels must be 1-D")
    if y.size and (y.min() < 0 or y.max() >= n_classes):
        raise ValueError(
            f"labels must lie in [0, {n_classes}), got range "
            f"[{y.min()}, {y.max()}]"
        )
    return y.astype(np.intp)


def _pair_norms_for_class(final_weight: np.ndarray, k: int) -> np.ndarray:
    """Distances ||w_k - w_i|| for every class i (0 at i = k)."""
    diff = final_weight[:, [k]] - final_weight
    return np.sqrt(np.sum(diff * diff, axis=0))


def boundary_distance(
    batch: ForwardBatch,
    final_weight: np.ndarray,
    final_bias: np.ndarray,
    floor: float = BOUNDARY_FLOOR,
) -> BoundaryDistance:
    """Mean point-to-hyperplane distance from each sample to the boundaries
    of its predicted class.

    Uses the identity |(w_k - w_i)^T z + (b_k - b_i)| = |f_k - f_i|, so only
    logits and classifier-column differences are needed. Raw distances are
    floored at `floor`; argmax ties break to the smallest class index.
    """
    logits = np.asarray(batch.logits, dtype=np.float64)
    n, c = logits.shape
    if c < 2:
        raise ValueError("boundary distance needs at least 2 classes")
    argmax = np.argmax(logits, axis=1)
    denom = np.empty((n, c))
    for k in np.unique(argmax):
        dists = _pair_norms_for_class(final_weight, int(k))
        zero = np.flatnonzero(dists == 0.0)
        zero = zero[zero != k]
        if zero.size:
            raise DuplicateClassWeightsError(int(k), int(zero[0]))
        rows = argmax == k
        denom[rows] = dists
    denom[np.arange(n), argmax] = 1.0
    gaps = logits[np.arange(n), argmax][:, None] - logits
    raw = np.sum(gaps / denom, axis=1) / (c - 1)
    return BoundaryDistance(per_sample=np.maximum(raw, floor), argmax_index=argmax)


def _backprop(
    model: ModelParams,
    cache: ForwardCache,
    d_logits: np.ndarray,
    extra_final_weight: np.ndarray | None = None,
) -> ModelGrads:
    """Propagate d(loss)/d(logits) back to every parameter tensor."""
    features = cache.activations[-1] if cache.activations else cache.inputs
    g_final_w = features.T @ d_logits
    if extra_final_weight is not None:
        g_final_w = g_final_w + extra_final_weight
    g_final_b = d_logits.sum(axis=0)
    g_act = d_logits @ model.final_weight.T
    hidden_grads: list[tuple[np.ndarray, np.ndarray]] = []
    last = len(model.hidden) - 1
    for idx in range(last, -1, -1):
        layer = model.hidden[idx]
        pre = cache.pre_activations[idx]
        prev = cache.activations[idx - 1] if idx > 0 else cache.inputs
        # The feature layer feeds the classifier through the identity.
        g_pre = g_act if idx == last else g_act * (pre > 0.0)
        hidden_grads.append((g_pre.T @ prev, g_pre.sum(axis=0)))
        g_act = g_pre @ layer.weight
    hidden_grads.reverse()
    return ModelGrads(
        hidden=tuple(hidden_grads),
        final_weight=g_final_w,
        final_bias=g_final_b,
    )


def _scaled_ce(
    logits: np.ndarray, labels: np.ndarray, scale: np.ndarray
) -> tuple[float, np.ndarray, np.ndarray]:
    """Value and softmax residual of mean -log softmax(f/s)_y.

    Returns (value, u, dl_ds) where u = softmax(f/s) - onehot(y) and
    dl_ds[i] = d(loss_i)/d(scale_i).
    """
    n = logits.shape[0]
    g = logits / scale[:, None]
    lse = log_sum_exp_rows(g)
    value = float(np.mean(lse - g[np.arange(n), labels]))
    u = softmax_rows(g)
    u[np.arange(n), labels] -= 1.0
    dl_ds = -np.sum(u * logits, axis=1) / (scale * scale)
    return value, u, dl_ds


def cross_entropy(model: ModelParams, inputs, labels) -> LossResult:
    """Mean -log softmax(f)_y with gradients by backpropagation."""
    batch, cache = forward_with_cache(model, inputs)
    y = _check_labels(labels, model.n_classes)
    n = batch.logits.shape[0]
    scale = np.ones(n)
    value, u, _ = _scaled_ce(batch.logits, y, scale)
    return LossResult(value=value, grads=_backprop(model, cache, u / n))


def adaptive_scaled_loss(model: ModelParams, inputs, labels, scale) -> LossResult:
    """Generalized per-sample scaled cross-entropy; the scale is treated as a
    constant (no gradient flows through it)."""
    batch, cache = forward_with_cache(model, inputs)
    y = _check_labels(labels, model.n_classes)
    s = np.asarray(scale, dtype=np.float64)
    if s.shape != (batch.logits.shape[0],):
        raise ValueError("scale must be one positive value per sample")
    if np.any(s <= 0):
        raise ValueError("scale entries must be positive")
    value, u, _ = _scaled_ce(batch.logits, y, s)
    n = batch.logits.shape[0]
    return LossResult(value=value, grads=_backprop(model, cache, u / s[:, None] / n))


def logitnorm_loss(
    model: ModelParams, inputs, labels, tau: float = DEFAULT_TAU
) -> LossResult:
    """Scale = tau * ||f||; gradients flow through the norm factor too."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    batch, cache = forward_with_cache(model, inputs)
    y = _check_labels(labels, model.n_classes)
    logits = batch.logits
    n = logits.shape[0]
    norms = np.sqrt(np.sum(logits * logits, axis=1))
    if np.any(norms == 0.0):
        bad = int(np.flatnonzero(norms == 0.0)[0])
        raise ValueError(f"sample {bad} has a zero-norm logit vector")
    s = tau * norms
    value, u, dl_ds = _scaled_ce(logits, y, s)
    # ds/df = tau * f / ||f||
    d_logits = (u / s[:, None] + (dl_ds * tau / norms)[:, None] * logits) / n
    return LossResult(value=value, grads=_backprop(model, cache, d_logits))


def _boundary_scale_grads(
    model: ModelParams,
    cache: ForwardCache,
    logits: np.ndarray,
    labels: np.ndarray,
    argmax: np.ndarray,
    denom: np.ndarray,
    floor: float,
    detach_scale: bool,
) -> LossResult:
    """Shared scaled-CE evaluation for both boundary-distance code paths.

    `denom` holds ||w_k - w_i|| per sample row (1.0 at the argmax position).
    Gradients flow through the logit gaps and the weight-difference norms
    unless detach_scale is set; samples on the floor contribute no scale
    gradient at all.
    """
    n, c = logits.shape
    rows = np.arange(n)
    gaps = logits[rows, argmax][:, None] - logits
    raw = np.sum(gaps / denom, axis=1) / (c - 1)
    s = np.maximum(raw, floor)
    value, u, dl_ds = _scaled_ce(logits, labels, s)

    if detach_scale:
        return LossResult(
            value=value,
            grads=_backprop(model, cache, u / s[:, None] / n),
        )

    active = raw > floor
    coeff = np.where(active, dl_ds, 0.0) / n

    # ds/df: -sgn_i / ((c-1) d_i) off the argmax, sum of the same at it.
    sgn = (gaps > 0.0).astype(np.float64)
    base = sgn / denom / (c - 1)
    ds_df = -base
    ds_df[rows, argmax] = np.sum(base, axis=1)
    d_logits = u / s[:, None] / n + coeff[:, None] * ds_df

    # ds/dW: column i of W gets coeff * gap_i * (w_k - w_i) / d_i^3 and the
    # argmax column accumulates the negated sum over i.
    w = model.final_weight
    a = coeff[:, None] * gaps / (denom**3) / (c - 1)
    a[rows, argmax] = 0.0
    w_k = w[:, argmax]  # m x n
    extra = w_k @ a - w * np.sum(a, axis=0)[None, :]
    row_sum = np.sum(a, axis=1)
    per_sample_k = w_k * row_sum[None, :] - w @ a.T  # m x n
    np.add.at(extra.T, argmax, -per_sample_k.T)

    return LossResult(value=value, grads=_backprop(model, cache, d_logits, extra))


def elogitnorm_loss(
    model: ModelParams,
    inputs,
    labels,
    floor: float = BOUNDARY_FLOOR,
    detach_scale: bool = False,
) -> LossResult:
    """Scale = D(z), the mean distance to the predicted class's boundaries.

    Hyperparameter-free: the scale is derived from the classifier geometry,
    with full differentiation through both the logit gaps and the
    weight-difference norms; detach_scale instead treats D(z) as a constant.
    """
    batch, cache = forward_with_cache(model, inputs)
    y = _check_labels(labels, model.n_classes)
    logits = batch.logits
    n, c = logits.shape
    argmax = np.argmax(logits, axis=1)
    denom = np.empty((n, c))
    for k in np.unique(argmax):
        dists = _pair_norms_for_class(model.final_weight, int(k))
        zero = np.flatnonzero(dists == 0.0)
        zero = zero[zero != k]
        if zero.size:
            raise DuplicateClassWeightsError(int(k), int(zero[0]))
        denom[argmax == k] = dists
    denom[np.arange(n), argmax] = 1.0
    return _boundary_scale_grads(
        model, cache, logits, y, argmax, denom, floor, detach_scale
    )


def pairwise_weight_norms(final_weight: np.ndarray) -> np.ndarray:
    """Full c x c matrix of ||w_i - w_j|| with the diagonal filled with 1.

    This is the O(c^2 m) step of the pairwise formulation; kept separate so
    its cost can be measured in isolation.
    """
    cols = final_weight.T  # c x m
    diff = cols[:, None, :] - cols[None, :, :]
    norms = np.sqrt(np.sum(diff * diff, axis=2))
    np.fill_diagonal(norms, 1.0)
    return norms


def elogitnorm_gap_form(
    model: ModelParams,
    inputs,
    labels,
    floor: float = BOUNDARY_FLOOR,
    detach_scale: bool = False,
) -> LossResult:
    """Pairwise-matrix formulation of the boundary-distance loss.

    Builds the full c x c weight-difference norm matrix up front (diagonal
    term zero via a unit denominator and a zero gap), then averages the
    per-class gap ratios with the same 1/(c-1) convention as
    elogitnorm_loss, so the two paths agree to float accuracy.
    """
    batch, cache = forward_with_cache(model, inputs)
    y = _check_labels(labels, model.n_classes)
    logits = batch.logits
    argmax = np.argmax(logits, axis=1)
    norms = pairwise_weight_norms(model.final_weight)
    for k in np.unique(argmax):
        zero = np.flatnonzero(norms[k] == 0.0)
        zero = zero[zero != k]
        if zero.size:
            raise DuplicateClassWeightsError(int(k), int(zero[0]))
    denom = norms[argmax]
    return _boundary_scale_grads(
        model, cache, logits, y, argmax, denom, floor, detach_scale
    )


def evaluate_loss(
    model: ModelParams,
    inputs,
    labels,
    kind: LossKind,
    detach_scale: bool = False,
) -> LossResult:
    if kind.name == "cross_entropy":
        return cross_entropy(model, inputs, labels)
    if kind.name == "logitnorm":
        return logitnorm_loss(model, inputs, labels, tau=kind.tau)
    return elogitnorm_loss(model, inputs, labels, detach_scale=detach_scale)
