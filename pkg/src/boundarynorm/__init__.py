"""Boundary-aware logit normalization toolkit.

Trains small feedforward classifiers under cross-entropy, logit-norm, and
boundary-distance objectives, scores out-of-distribution inputs with a suite
of post-hoc detectors, and verifies the geometric properties the
boundary-distance scaling relies on.
"""

__version__ = "0.1.0"

from .data import Dataset, SplitSpec, gaussian_blobs, load_idx, ring_ood, split
from .evaluation import (
    EceReport,
    EvalReport,
    accuracy,
    auroc,
    ece,
    evaluate_detection,
    fpr_at_95_tpr,
    scaled_probabilities,
)
from .geometry import (
    BoundaryGeometry,
    CollapseStats,
    NormBoundReport,
    SpectrumReport,
    check_norm_bound,
    collapse_stats,
    covariance_spectrum,
    min_scaling_subspace,
)
from .model import (
    ForwardBatch,
    LayerParams,
    ModelParams,
    forward,
    init_model,
    load_checkpoint,
    save_checkpoint,
)
from .objectives import (
    BoundaryDistance,
    LossKind,
    LossResult,
    adaptive_scaled_loss,
    boundary_distance,
    cross_entropy,
    elogitnorm_gap_form,
    elogitnorm_loss,
    logitnorm_loss,
)
from .scoring import IdStatistics, ScoreSet, ScorerSpec, classify, prepare_stats, score
from .trainer import TrainConfig, TrainLog, lr_at, train

__all__ = [
    "__version__",
    "Dataset", "SplitSpec", "gaussian_blobs", "ring_ood", "load_idx", "split",
    "ModelParams", "LayerParams", "ForwardBatch",
    "init_model", "forward", "save_checkpoint", "load_checkpoint",
    "LossKind", "LossResult", "BoundaryDistance",
    "cross_entropy", "logitnorm_loss", "elogitnorm_loss",
    "elogitnorm_gap_form", "adaptive_scaled_loss", "boundary_distance",
    "TrainConfig", "TrainLog", "train", "lr_at",
    "IdStatistics", "ScoreSet", "ScorerSpec", "prepare_stats", "score", "classify",
    "EvalReport", "EceReport", "auroc", "fpr_at_95_tpr", "ece",
    "scaled_probabilities", "accuracy", "evaluate_detection",
    "NormBoundReport", "BoundaryGeometry", "SpectrumReport", "CollapseStats",
    "check_norm_bound", "min_scaling_subspace", "covariance_spectrum",
    "collapse_stats",
]
