"""Post-hoc OOD scoring over penultimate features and logits.

Every scorer returns one real per sample with the convention higher = more
in-distribution; methods that natively measure OOD-ness are negated. Scorers
that need training-set statistics (knn, fdbd, react, scale) take an
IdStatistics prepared once from ID training features.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import log_sum_exp_rows
from .model import ForwardBatch, ModelParams
from .objectives import boundary_distance, softmax_rows

SCORER_NAMES = ("msp", "max_logit", "energy", "gen", "knn", "fdbd", "react", "scale")

DEFAULT_GEN_GAMMA = 0.1
DEFAULT_KNN_K = 50
DEFAULT_REACT_PERCENTILE = 90.0
DEFAULT_SCALE_PERCENTILE = 85.0

_STATS_REQUIRED = frozenset({"knn", "fdbd", "react", "scale"})
_MODEL_REQUIRED = frozenset({"fdbd", "react", "scale"})


class MissingStatsError(ValueError):
    def __init__(self, scorer: str):
        super().__init__(
            f"scorer {scorer!r} requires IdStatistics prepared from ID "
            "training features (see prepare_stats)"
        )


@dataclass(frozen=True)
class ScorerSpec:
    name: str
    gamma: float = DEFAULT_GEN_GAMMA
    top_m: int | None = None  # None: min(n_classes, 100)
    k: int | None = None  # None: DEFAULT_KNN_K capped at the bank size
    react_percentile: float = DEFAULT_REACT_PERCENTILE
    scale_percentile: float = DEFAULT_SCALE_PERCENTILE

    def __post_init__(self):
        if self.name not in SCORER_NAMES:
            raise ValueError(
                f"unknown scorer {self.name!r}; valid scorers: "
                + ", ".join(SCORER_NAMES)
            )
        if not 0.0 < self.gamma <= 1.0:
            raise ValueError("gamma must lie in (0, 1]")
        if self.k is not None and self.k < 1:
            raise ValueError("k must be >= 1")
        for p in (self.react_percentile, self.scale_percentile):
            if not 0.0 < p < 100.0:
                raise ValueError("percentiles must lie in (0, 100)")


@dataclass(frozen=True)
class IdStatistics:
    """Training-feature statistics, computed once from ID data only."""

    train_features: np.ndarray  # unit-normalized rows (knn bank)
    feature_mean: np.ndarray
    clip_threshold: float


@dataclass(frozen=True)
class ScoreSet:
    id_scores: np.ndarray
    ood_scores: np.ndarray

    def __post_init__(self):
        if self.id_scores.size == 0 or self.ood_scores.size == 0:
            raise ValueError("both ID and OOD score sets must be nonempty")
        if not (np.all(np.isfinite(self.id_scores)) and np.all(np.isfinite(self.ood_scores))):
            raise ValueError("scores must be finite")


def _unit_rows(features: np.ndarray) -> np.ndarray:
    norms = np.sqrt(np.sum(features * features, axis=1, keepdims=True))
    safe = np.where(norms > 0.0, norms, 1.0)
    return features / safe


def prepare_stats(
    train_batch: ForwardBatch, react_percentile: float = DEFAULT_REACT_PERCENTILE
) -> IdStatistics:
    """Unit-normalized feature bank, feature mean, and the activation-clipping
    threshold (linear-interpolation percentile of the flattened activations)."""
    features = np.asarray(train_batch.features, dtype=np.float64)
    if features.shape[0] < 1:
        raise ValueError("need at least one training feature")
    return IdStatistics(
        train_features=_unit_rows(features),
        feature_mean=features.mean(axis=0),
        clip_threshold=float(np.percentile(features.ravel(), react_percentile)),
    )


def msp_score(logits: np.ndarray) -> np.ndarray:
    return np.max(softmax_rows(logits), axis=1)


def max_logit_score(logits: np.ndarray) -> np.ndarray:
    return np.max(logits, axis=1)


def energy_score(logits: np.ndarray) -> np.ndarray:
    return log_sum_exp_rows(logits)


def gen_score(logits: np.ndarray, gamma: float, top_m: int) -> np.ndarray:
    """Negated generalized-entropy over the top-m softmax probabilities."""
    probs = softmax_rows(logits)
    top = np.sort(probs, axis=1)[:, ::-1][:, :top_m]
    return -np.sum(top**gamma * (1.0 - top) ** gamma, axis=1)


def knn_score(features: np.ndarray, stats: IdStatistics, k: int) -> np.ndarray:
    """Negative distance to the k-th nearest unit-normalized training feature."""
    bank = stats.train_features
    if k > bank.shape[0]:
        raise ValueError(
            f"knn needs k <= bank size, got k={k} with {bank.shape[0]} features"
        )
    queries = _unit_rows(np.asarray(features, dtype=np.float64))
    # Squared distances via the expansion; unit rows make the norms 1.
    sq = np.maximum(
        np.sum(queries**2, axis=1)[:, None]
        - 2.0 * queries @ bank.T
        + np.sum(bank**2, axis=1)[None, :],
        0.0,
    )
    kth = np.partition(sq, k - 1, axis=1)[:, k - 1]
    return -np.sqrt(kth)


def fdbd_score(
    batch: ForwardBatch, model: ModelParams, stats: IdStatistics
) -> np.ndarray:
    """Mean boundary distance regularized by the distance to the training
    feature mean."""
    bd = boundary_distance(batch, model.final_weight, model.final_bias)
    offsets = batch.features - stats.feature_mean
    denom = np.sqrt(np.sum(offsets * offsets, axis=1))
    return bd.per_sample / np.maximum(denom, 1e-12)


def react_score(
    batch: ForwardBatch, model: ModelParams, stats: IdStatistics
) -> np.ndarray:
    """Energy recomputed after clamping features at the ID percentile."""
    clipped = np.minimum(batch.features, stats.clip_threshold)
    logits = clipped @ model.final_weight + model.final_bias
    return log_sum_exp_rows(logits)


def scale_score(
    batch: ForwardBatch, model: ModelParams, percentile: float
) -> np.ndarray:
    """Energy on features rescaled by exp(S1/S2), S1 the total activation and
    S2 the activation mass above the per-sample percentile.

    Degenerate rows (no mass above the percentile) keep factor 1; the
    exponent is capped at 700 so near-zero S2 cannot overflow to inf.
    """
    features = np.asarray(batch.features, dtype=np.float64)
    s1 = np.sum(features, axis=1)
    thresholds = np.percentile(features, percentile, axis=1)
    above = np.where(features > thresholds[:, None], features, 0.0)
    s2 = np.sum(above, axis=1)
    ratio = np.divide(s1, np.where(s2 > 0.0, s2, 1.0))
    factor = np.where(s2 > 0.0, np.exp(np.minimum(ratio, 700.0)), 1.0)
    logits = (features * factor[:, None]) @ model.final_weight + model.final_bias
    return log_sum_exp_rows(logits)


def score(
    spec: ScorerSpec | str,
    batch: ForwardBatch,
    model: ModelParams | None = None,
    stats: IdStatistics | None = None,
) -> np.ndarray:
    """Dispatch a scorer over a forward batch; higher = more ID."""
    if isinstance(spec, str):
        spec = ScorerSpec(name=spec)
    if spec.name in _STATS_REQUIRED and stats is None:
        raise MissingStatsError(spec.name)
    if spec.name in _MODEL_REQUIRED and model is None:
        raise ValueError(f"scorer {spec.name!r} requires the model's final layer")
    logits = batch.logits
    if spec.name == "msp":
        return msp_score(logits)
    if spec.name == "max_logit":
        return max_logit_score(logits)
    if spec.name == "energy":
        return energy_score(logits)
    if spec.name == "gen":
        top_m = spec.top_m if spec.top_m is not None else min(logits.shape[1], 100)
        return gen_score(logits, spec.gamma, top_m)
    if spec.name == "knn":
        k = spec.k
        if k is None:
            k = min(DEFAULT_KNN_K, stats.train_features.shape[0])
        return knn_score(batch.features, stats, k)
    if spec.name == "fdbd":
        return fdbd_score(batch, model, stats)
    if spec.name == "react":
        return react_score(batch, model, stats)
    return scale_score(batch, model, spec.scale_percentile)


def classify(scores: np.ndarray, threshold: float) -> np.ndarray:
    """ID flags: True where score >= threshold."""
    return np.asarray(scores) >= threshold


def export_scores_csv(score_set: ScoreSet, path) -> None:
    """Rows of `sample_id,score,origin` with origin in {id, ood}."""
    with open(path, "w", newline="\n") as fh:
        fh.write("sample_id,score,origin\n")
        idx = 0
        for value in score_set.id_scores:
            fh.write(f"{idx},{float(value)!r},id\n")
            idx += 1
        for value in score_set.ood_scores:
            fh.write(f"{idx},{float(value)!r},ood\n")
            idx += 1
