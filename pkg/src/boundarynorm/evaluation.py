"""Detection and calibration metrics: AUROC, FPR95, ECE, accuracy."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .model import ForwardBatch, ModelParams
from .objectives import DEFAULT_TAU, boundary_distance, softmax_rows
from .scoring import ScoreSet

CALIBRATION_MODES = ("raw", "logitnorm", "boundary")


@dataclass(frozen=True)
class EvalReport:
    auroc: float
    fpr95: float
    n_id: int
    n_ood: int

    def to_dict(self) -> dict:
        return {
            "auroc": self.auroc,
            "fpr95": self.fpr95,
            "n_id": self.n_id,
            "n_ood": self.n_ood,
        }


@dataclass(frozen=True)
class BinStats:
    confidence: float
    accuracy: float
    count: int


@dataclass(frozen=True)
class EceReport:
    ece: float
    bins: tuple[BinStats, ...]
    accuracy: float
    n_bins: int
    n_samples: int

    def to_dict(self) -> dict:
        return {
            "ece": self.ece,
            "accuracy": self.accuracy,
            "n_bins": self.n_bins,
            "n_samples": self.n_samples,
            "bins": [
                {"confidence": b.confidence, "accuracy": b.accuracy, "count": b.count}
                for b in self.bins
            ],
        }


def _average_ranks(values: np.ndarray) -> np.ndarray:
    """1-based ranks with ties assigned their group average."""
    _, inverse, counts = np.unique(values, return_inverse=True, return_counts=True)
    starts = np.concatenate(([0], np.cumsum(counts)[:-1]))
    group_avg = starts + (counts + 1) / 2.0
    return group_avg[inverse]


def auroc(scores: ScoreSet) -> float:
    """Probability a random ID score exceeds a random OOD score, ties 1/2.

    Mann-Whitney formulation over average ranks; O(n log n).
    """
    id_s, ood_s = scores.id_scores, scores.ood_scores
    n_id, n_ood = id_s.shape[0], ood_s.shape[0]
    ranks = _average_ranks(np.concatenate([id_s, ood_s]))
    rank_sum = float(np.sum(ranks[:n_id]))
    return (rank_sum - n_id * (n_id + 1) / 2.0) / (n_id * n_ood)


def fpr_at_95_tpr(scores: ScoreSet) -> float:
    """FPR at the largest threshold keeping >= 95% of ID scores at or above it."""
    id_s, ood_s = scores.id_scores, scores.ood_scores
    n = id_s.shape[0]
    keep = (95 * n + 99) // 100  # smallest integer count satisfying >= 0.95
    threshold = np.sort(id_s)[n - keep]
    return float(np.mean(ood_s >= threshold))


def ece(probabilities: np.ndarray, labels, n_bins: int = 15) -> EceReport:
    """Expected calibration error with equal-width right-closed bins on (0, 1].

    A sample with confidence p lands in bin ceil(p * n_bins) (p = 0 goes to
    bin 1; exact edges go to the lower bin).
    """
    probs = np.asarray(probabilities, dtype=np.float64)
    y = np.asarray(labels)
    if probs.ndim != 2:
        raise ValueError("probabilities must be n x c")
    if n_bins < 1:
        raise ValueError("n_bins must be >= 1")
    n, c = probs.shape
    if y.shape != (n,):
        raise ValueError("labels must be one per sample")
    if np.any(probs < -1e-9):
        raise ValueError("probabilities must be non-negative")
    sums = probs.sum(axis=1)
    if np.any(np.abs(sums - 1.0) > 1e-6):
        bad = int(np.argmax(np.abs(sums - 1.0)))
        raise ValueError(f"probability row {bad} sums to {sums[bad]}, not 1")
    if y.size and (y.min() < 0 or y.max() >= c):
        raise ValueError("labels out of range")

    confidence = np.max(probs, axis=1)
    predicted = np.argmax(probs, axis=1)
    correct = (predicted == y).astype(np.float64)
    # Small slack keeps exact bin edges (e.g. 0.2 * 15) in the lower bin.
    idx = np.clip(np.ceil(confidence * n_bins - 1e-9).astype(int) - 1, 0, n_bins - 1)

    bins: list[BinStats] = []
    total = 0.0
    for b in range(n_bins):
        members = idx == b
        count = int(np.sum(members))
        if count == 0:
            bins.append(BinStats(confidence=0.0, accuracy=0.0, count=0))
            continue
        conf_mean = float(np.mean(confidence[members]))
        acc = float(np.mean(correct[members]))
        bins.append(BinStats(confidence=conf_mean, accuracy=acc, count=count))
        total += (count / n) * abs(acc - conf_mean)
    return EceReport(
        ece=float(total),
        bins=tuple(bins),
        accuracy=float(np.mean(correct)),
        n_bins=n_bins,
        n_samples=n,
    )


def scaled_probabilities(
    batch: ForwardBatch,
    mode: str,
    tau: float = DEFAULT_TAU,
    model: ModelParams | None = None,
) -> np.ndarray:
    """Softmax over f, f/(tau*||f||), or f/D(z) per sample."""
    logits = np.asarray(batch.logits, dtype=np.float64)
    if mode == "raw":
        return softmax_rows(logits)
    if mode == "logitnorm":
        if tau <= 0:
            raise ValueError("tau must be positive")
        norms = np.sqrt(np.sum(logits * logits, axis=1))
        if np.any(norms == 0.0):
            bad = int(np.flatnonzero(norms == 0.0)[0])
            raise ValueError(f"sample {bad} has a zero-norm logit vector")
        return softmax_rows(logits / (tau * norms)[:, None])
    if mode == "boundary":
        if model is None:
            raise ValueError("boundary scaling requires the model's final layer")
        bd = boundary_distance(batch, model.final_weight, model.final_bias)
        return softmax_rows(logits / bd.per_sample[:, None])
    raise ValueError(
        f"unknown mode {mode!r}; valid modes: {', '.join(CALIBRATION_MODES)}"
    )


def accuracy(outputs: np.ndarray, labels) -> float:
    """Fraction of argmax predictions matching labels (ties to smallest index).

    Accepts either logits or probabilities; only the argmax matters.
    """
    outputs = np.asarray(outputs)
    y = np.asarray(labels)
    if outputs.shape[0] == 0:
        raise ValueError("need at least one sample")
    return float(np.mean(np.argmax(outputs, axis=1) == y))


def evaluate_detection(scores: ScoreSet) -> EvalReport:
    return EvalReport(
        auroc=auroc(scores),
        fpr95=fpr_at_95_tpr(scores),
        n_id=scores.id_scores.shape[0],
        n_ood=scores.ood_scores.shape[0],
    )
