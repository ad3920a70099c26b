"""Dense real linear algebra primitives used throughout the toolkit.

Matrices are 2-D float64 numpy arrays (row-major), vectors are 1-D float64
arrays. Singular values come from a one-sided Jacobi iteration rather than
LAPACK so the decomposition backing the geometric checks is fully under our
control and can itself be validated against independent oracles.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Relative threshold separating "numerically zero" singular values from noise.
DEFAULT_RANK_TOL = 1e-10

# One-sided Jacobi stops once every normalized off-diagonal column product
# falls below this.
JACOBI_TOL = 1e-12
JACOBI_MAX_SWEEPS = 100


def as_matrix(m) -> np.ndarray:
    a = np.asarray(m, dtype=np.float64)
    if a.ndim != 2:
        raise ValueError(f"expected a 2-D matrix, got ndim={a.ndim}")
    return a


def as_vector(v) -> np.ndarray:
    a = np.asarray(v, dtype=np.float64)
    if a.ndim != 1:
        raise ValueError(f"expected a 1-D vector, got ndim={a.ndim}")
    return a


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = as_matrix(a)
    b = as_matrix(b)
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: {a.shape[0]}x{a.shape[1]} times "
            f"{b.shape[0]}x{b.shape[1]}"
        )
    return a @ b


def l2_norm(v) -> float:
    """Euclidean norm sqrt(sum v_i^2)."""
    v = np.asarray(v, dtype=np.float64)
    return float(np.sqrt(np.sum(v * v)))


def log_sum_exp(v) -> float:
    """log(sum exp(v_i)) via max-shift; overflow-safe for entries up to ~1e4."""
    v = np.asarray(v, dtype=np.float64)
    m = np.max(v)
    return float(m + np.log(np.sum(np.exp(v - m))))


def log_sum_exp_rows(m: np.ndarray) -> np.ndarray:
    """Row-wise max-shifted log-sum-exp for an n x c matrix."""
    m = np.asarray(m, dtype=np.float64)
    shift = np.max(m, axis=1, keepdims=True)
    return (shift + np.log(np.sum(np.exp(m - shift), axis=1, keepdims=True)))[:, 0]


def _jacobi_svd(m: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """One-sided Jacobi SVD of a tall-or-square matrix (rows >= cols).

    Orthogonalizes column pairs with plane rotations until all normalized
    off-diagonal products fall below JACOBI_TOL. Returns (u, s, vt) with
    u (rows x cols), s descending, vt (cols x cols); columns of u with zero
    singular value are left as zero vectors.
    """
    a = m.copy()
    n_rows, n_cols = a.shape
    v = np.eye(n_cols)

    for _ in range(JACOBI_MAX_SWEEPS):
        off = 0.0
        for p in range(n_cols - 1):
            for q in range(p + 1, n_cols):
                ap = a[:, p]
                aq = a[:, q]
                alpha = ap @ ap
                beta = aq @ aq
                gamma = ap @ aq
                if alpha * beta == 0.0:
                    continue
                ratio = abs(gamma) / np.sqrt(alpha * beta)
                off = max(off, ratio)
                if ratio <= JACOBI_TOL:
                    continue
                zeta = (beta - alpha) / (2.0 * gamma)
                t = np.sign(zeta) / (abs(zeta) + np.sqrt(1.0 + zeta * zeta))
                if zeta == 0.0:
                    t = 1.0
                c = 1.0 / np.sqrt(1.0 + t * t)
                s = c * t
                a_p = c * ap - s * aq
                a_q = s * ap + c * aq
                a[:, p] = a_p
                a[:, q] = a_q
                v_p = c * v[:, p] - s * v[:, q]
                v_q = s * v[:, p] + c * v[:, q]
                v[:, p] = v_p
                v[:, q] = v_q
        if off <= JACOBI_TOL:
            break

    sigma = np.sqrt(np.sum(a * a, axis=0))
    order = np.argsort(sigma)[::-1]
    sigma = sigma[order]
    a = a[:, order]
    v = v[:, order]

    u = np.zeros((n_rows, n_cols))
    nonzero = sigma > 0.0
    u[:, nonzero] = a[:, nonzero] / sigma[nonzero]
    return u, sigma, v.T


def svd(m) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Thin SVD m = u @ diag(s) @ vt with s sorted descending.

    u is rows x k and vt is k x cols where k = min(rows, cols). Wide inputs
    are handled by decomposing the transpose.
    """
    m = as_matrix(m)
    if m.size == 0:
        raise ValueError("svd of an empty matrix")
    if not np.all(np.isfinite(m)):
        raise ValueError("svd requires finite entries")
    if m.shape[0] >= m.shape[1]:
        return _jacobi_svd(m)
    ut, s, vt = _jacobi_svd(m.T)
    return vt.T, s, ut.T


def singular_values(m) -> np.ndarray:
    """Singular values of m, non-negative and sorted descending.

    Returns min(rows, cols) values. Note these are the matrix spectrum; as an
    operator on the larger space a wide (or transposed-tall) matrix also
    annihilates a null space, i.e. its smallest operator singular value is 0.
    """
    _, s, _ = svd(m)
    return s


def matrix_rank(m, tol: float = DEFAULT_RANK_TOL) -> int:
    """Number of singular values above tol * sigma_max."""
    if tol <= 0:
        raise ValueError("tol must be positive")
    m = as_matrix(m)
    if m.size == 0 or not np.any(m):
        return 0
    s = singular_values(m)
    return int(np.sum(s > tol * s[0]))


@dataclass(frozen=True)
class LeastSquaresResult:
    solution: np.ndarray
    residual: float
    degenerate: bool


def least_squares_solve(a, b, tol: float = DEFAULT_RANK_TOL) -> LeastSquaresResult:
    """Minimum-norm least-squares solution of a @ x = b.

    Solves via the Jacobi SVD: components along singular directions with
    sigma <= tol * sigma_max are dropped, which yields the minimum-norm
    minimizer and flags the system degenerate when the normal equations are
    rank-deficient (rank < cols).
    """
    a = as_matrix(a)
    b = as_vector(b)
    if a.shape[0] != b.shape[0]:
        raise ValueError(
            f"least_squares dimension mismatch: a has {a.shape[0]} rows, "
            f"b has {b.shape[0]} entries"
        )
    u, s, vt = svd(a)
    cutoff = tol * s[0] if s[0] > 0 else 0.0
    keep = s > cutoff
    rank = int(np.sum(keep))
    coeffs = np.zeros_like(s)
    if rank > 0:
        coeffs[keep] = (u[:, keep].T @ b) / s[keep]
    x = vt.T @ coeffs
    residual = l2_norm(a @ x - b)
    return LeastSquaresResult(solution=x, residual=residual, degenerate=rank < a.shape[1])
