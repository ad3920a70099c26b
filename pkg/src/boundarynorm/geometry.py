"""Executable checks of the geometric claims behind the boundary-aware loss:
the logit/feature norm bound, the minimum-scaling affine subspace, the
feature-covariance spectrum, and origin-collapse statistics.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .linalg import least_squares_solve, matrix_rank, singular_values
from .model import ForwardBatch, ModelParams
from .objectives import boundary_distance

BOUND_SLACK = 1e-9

# Covariance singular values below this fraction of the largest count as
# collapsed directions.
COLLAPSE_REL_THRESHOLD = 1e-3


@dataclass(frozen=True)
class NormBoundReport:
    feature_norms: np.ndarray
    logit_norms: np.ndarray
    lower: np.ndarray
    upper: np.ndarray
    sigma_min: float
    sigma_max: float
    sigma_bar: float
    bias_norm: float
    relative_bias: float
    pearson_r: float
    n_violations: int
    eta_mean: float
    eta_std: float

    def to_dict(self) -> dict:
        return {
            "sigma_min": self.sigma_min,
            "sigma_max": self.sigma_max,
            "sigma_bar": self.sigma_bar,
            "bias_norm": self.bias_norm,
            "relative_bias": self.relative_bias,
            "pearson_r": self.pearson_r,
            "n_violations": self.n_violations,
            "n_samples": int(self.feature_norms.shape[0]),
            "eta_mean": self.eta_mean,
            "eta_std": self.eta_std,
        }


@dataclass(frozen=True)
class BoundaryGeometry:
    a_matrix: np.ndarray
    b_vector: np.ndarray
    rank: int
    null_dim: int
    lsq_solution: np.ndarray
    residual: float
    degenerate: bool

    def to_dict(self) -> dict:
        return {
            "rows": int(self.a_matrix.shape[0]),
            "feature_dim": int(self.a_matrix.shape[1]),
            "rank": self.rank,
            "null_dim": self.null_dim,
            "residual": self.residual,
            "degenerate": self.degenerate,
            "lsq_solution": [float(v) for v in self.lsq_solution],
        }


@dataclass(frozen=True)
class SpectrumReport:
    values: np.ndarray  # singular values of the feature covariance, descending
    effective_rank: int
    collapse_ratio: float

    def to_dict(self) -> dict:
        return {
            "effective_rank": self.effective_rank,
            "collapse_ratio": self.collapse_ratio,
            "n_values": int(self.values.shape[0]),
        }


@dataclass(frozen=True)
class CollapseStats:
    id_feature_norm: float
    ood_feature_norm: float
    id_boundary_distance: float
    ood_boundary_distance: float

    @property
    def norm_ratio(self) -> float:
        return self.ood_feature_norm / self.id_feature_norm

    @property
    def boundary_ratio(self) -> float:
        return self.ood_boundary_distance / self.id_boundary_distance

    def to_dict(self) -> dict:
        return {
            "id_feature_norm": self.id_feature_norm,
            "ood_feature_norm": self.ood_feature_norm,
            "id_boundary_distance": self.id_boundary_distance,
            "ood_boundary_distance": self.ood_boundary_distance,
            "norm_ratio": self.norm_ratio,
            "boundary_ratio": self.boundary_ratio,
        }


def map_singular_extremes(final_weight: np.ndarray) -> tuple[float, float, float]:
    """(sigma_min, sigma_max, sigma_bar) of the map z -> W^T z on R^m.

    sigma_max and sigma_bar come from the matrix spectrum; sigma_min is the
    operator minimum, which is 0 whenever m > c because W^T then has a
    nontrivial null space on R^m.
    """
    m, c = final_weight.shape
    svals = singular_values(final_weight)
    sigma_max = float(svals[0])
    sigma_bar = float(np.mean(svals))
    sigma_min = 0.0 if m > c else float(svals[-1])
    return sigma_min, sigma_max, sigma_bar


def check_norm_bound(model: ModelParams, batch: ForwardBatch) -> NormBoundReport:
    """Verify sigma_min*||z|| - ||b|| <= ||f|| <= sigma_max*||z|| + ||b||
    per sample and report the proportionality statistics."""
    features = np.asarray(batch.features, dtype=np.float64)
    logits = np.asarray(batch.logits, dtype=np.float64)
    if features.shape[0] < 1:
        raise ValueError("need at least one sample")
    sigma_min, sigma_max, sigma_bar = map_singular_extremes(model.final_weight)
    bias_norm = float(np.sqrt(np.sum(model.final_bias**2)))
    z_norms = np.sqrt(np.sum(features * features, axis=1))
    f_norms = np.sqrt(np.sum(logits * logits, axis=1))
    lower = sigma_min * z_norms - bias_norm
    upper = sigma_max * z_norms + bias_norm
    violations = int(
        np.sum((f_norms < lower - BOUND_SLACK) | (f_norms > upper + BOUND_SLACK))
    )
    if z_norms.shape[0] >= 2 and np.std(z_norms) > 0 and np.std(f_norms) > 0:
        pearson = float(np.corrcoef(z_norms, f_norms)[0, 1])
    else:
        pearson = 0.0
    eta = f_norms - sigma_bar * z_norms
    return NormBoundReport(
        feature_norms=z_norms,
        logit_norms=f_norms,
        lower=lower,
        upper=upper,
        sigma_min=sigma_min,
        sigma_max=sigma_max,
        sigma_bar=sigma_bar,
        bias_norm=bias_norm,
        relative_bias=bias_norm / sigma_max if sigma_max > 0 else 0.0,
        pearson_r=pearson,
        n_violations=violations,
        eta_mean=float(np.mean(eta)),
        eta_std=float(np.std(eta)),
    )


def min_scaling_subspace(
    final_weight: np.ndarray, final_bias: np.ndarray, fmax: int
) -> BoundaryGeometry:
    """Geometry of the set where every boundary of the predicted class ties.

    Builds the (c-1) x m system with rows (w_fmax - w_i)^T and right-hand
    side b_fmax - b_i. With m >= c-1 and independent rows the solution set is
    an affine subspace of dimension m - c + 1; with m < c-1 the system is
    generically inconsistent and only the least-squares point exists.
    """
    m, c = final_weight.shape
    if c < 2:
        raise ValueError("need at least 2 classes")
    if not 0 <= fmax < c:
        raise ValueError(f"fmax must be a class index in [0, {c})")
    others = [i for i in range(c) if i != fmax]
    a = (final_weight[:, [fmax]] - final_weight[:, others]).T
    b = final_bias[fmax] - final_bias[others]
    rank = matrix_rank(a)
    lsq = least_squares_solve(a, b)
    return BoundaryGeometry(
        a_matrix=a,
        b_vector=b,
        rank=rank,
        null_dim=m - rank,
        lsq_solution=lsq.solution,
        residual=lsq.residual,
        degenerate=lsq.degenerate,
    )


def covariance_spectrum(
    features: np.ndarray, rel_threshold: float = COLLAPSE_REL_THRESHOLD
) -> SpectrumReport:
    """Singular values of the mean-centered feature covariance.

    effective_rank counts values above rel_threshold * sigma_max;
    collapse_ratio = 1 - effective_rank / m.
    """
    z = np.asarray(features, dtype=np.float64)
    if z.ndim != 2 or z.shape[0] < 2:
        raise ValueError("need an n x m feature matrix with n >= 2")
    centered = z - z.mean(axis=0)
    cov = centered.T @ centered / (z.shape[0] - 1)
    values = singular_values(cov)
    if values[0] > 0:
        effective = int(np.sum(values > rel_threshold * values[0]))
    else:
        effective = 0
    m = z.shape[1]
    return SpectrumReport(
        values=values,
        effective_rank=effective,
        collapse_ratio=1.0 - effective / m,
    )


def collapse_stats(
    id_batch: ForwardBatch, ood_batch: ForwardBatch, model: ModelParams
) -> CollapseStats:
    """Mean feature norm and mean boundary distance for ID vs OOD batches."""
    def norms(batch):
        f = np.asarray(batch.features, dtype=np.float64)
        return float(np.mean(np.sqrt(np.sum(f * f, axis=1))))

    def mean_bd(batch):
        bd = boundary_distance(batch, model.final_weight, model.final_bias)
        return float(np.mean(bd.per_sample))

    return CollapseStats(
        id_feature_norm=norms(id_batch),
        ood_feature_norm=norms(ood_batch),
        id_boundary_distance=mean_bd(id_batch),
        ood_boundary_distance=mean_bd(ood_batch),
    )


def spectrum_to_csv(report: SpectrumReport, path) -> None:
    with open(path, "w", newline="\n") as fh:
        fh.write("index,singular_value\n")
        for i, v in enumerate(report.values):
            fh.write(f"{i},{float(v)!r}\n")
