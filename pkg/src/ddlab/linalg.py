"""Dense linear-algebra kernels: pseudo-inverse, pseudo-determinant,
minimum-norm solves, projections, and log-scale Gram determinants.

All functions are pure and operate on plain numpy arrays. Rank decisions
use a shared singular-value cutoff so that the same matrix is never
"full rank" in one routine and "deficient" in another.
"""

from __future__ import annotations

import numpy as np

__all__ = [
    "zero_threshold",
    "pseudo_inverse",
    "pseudo_determinant",
    "min_norm_solve",
    "projection_complement",
    "log_det_gram",
]

_EPS = np.finfo(float).eps


def _as_matrix(A) -> np.ndarray:
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise ValueError(f"expected a 2-d array, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ValueError("matrix contains non-finite entries")
    return A


def zero_threshold(singular_values: np.ndarray, shape: tuple[int, int]) -> float:
    """Cutoff below which singular values are treated as exactly zero.

    sigma <= eps * sigma_max * max(rows, cols), the standard numerically
    safe rank cutoff.
    """
    if singular_values.size == 0:
        return 0.0
    return _EPS * float(np.max(singular_values)) * max(shape)


def pseudo_inverse(A) -> np.ndarray:
    """Moore-Penrose inverse via SVD with the shared zero threshold."""
    A = _as_matrix(A)
    if 0 in A.shape:
        return np.zeros((A.shape[1], A.shape[0]))
    U, s, Vt = np.linalg.svd(A, full_matrices=False)
    cut = zero_threshold(s, A.shape)
    inv = np.where(s > cut, 1.0 / np.where(s > cut, s, 1.0), 0.0)
    return (Vt.T * inv) @ U.T


def pseudo_determinant(A, sym_tol: float = 1e-8) -> float:
    """Product of nonzero eigenvalues of a symmetric PSD matrix.

    The 0x0 matrix has pseudo-determinant 1 (empty product).
    """
    A = _as_matrix(A)
    n, m = A.shape
    if n != m:
        raise ValueError(f"pseudo_determinant needs a square matrix, got {A.shape}")
    if n == 0:
        return 1.0
    scale = float(np.max(np.abs(A)))
    if scale > 0 and float(np.max(np.abs(A - A.T))) > sym_tol * scale:
        raise ValueError("matrix is not symmetric within tolerance")
    w = np.linalg.eigvalsh(0.5 * (A + A.T))
    cut = _EPS * max(float(np.max(np.abs(w))), 0.0) * n
    nz = w[np.abs(w) > cut]
    if nz.size == 0:
        return 1.0
    return float(np.prod(nz))


def min_norm_solve(X, y) -> np.ndarray:
    """Minimum-norm least-squares solution X^+ y.

    For a wide full-rank X this is the least-norm interpolant; for a tall
    X it is the ordinary least-squares solution.
    """
    X = _as_matrix(X)
    y = np.asarray(y, dtype=float).reshape(-1)
    if not np.all(np.isfinite(y)):
        raise ValueError("response vector contains non-finite entries")
    if y.shape[0] != X.shape[0]:
        raise ValueError(f"dimension mismatch: X has {X.shape[0]} rows, y has {y.shape[0]}")
    if 0 in X.shape:
        return np.zeros(X.shape[1])
    w, *_ = np.linalg.lstsq(X, y, rcond=None)
    return w


def projection_complement(X) -> np.ndarray:
    """I - X^+ X, the projection onto the orthocomplement of the row span.

    Symmetric idempotent with trace d - rank(X). An empty (0 x d) design
    spans nothing, so the result is the identity.
    """
    X = _as_matrix(X)
    d = X.shape[1]
    if X.shape[0] == 0:
        return np.eye(d)
    # Row space basis from the SVD right singular vectors.
    _, s, Vt = np.linalg.svd(X, full_matrices=False)
    cut = zero_threshold(s, X.shape)
    V = Vt[s > cut]
    return np.eye(d) - V.T @ V


def log_det_gram(X) -> float:
    """log det(X X^T) for a k x d matrix with k <= d.

    Returns -inf when X is rank deficient; the empty 0 x d design gives
    log(1) = 0. Computed from singular values so no Gram matrix is formed.
    """
    X = _as_matrix(X)
    k, d = X.shape
    if k > d:
        raise ValueError(f"log_det_gram needs k <= d, got {k} x {d}")
    if k == 0:
        return 0.0
    s = np.linalg.svd(X, compute_uv=False)
    cut = zero_threshold(s, X.shape)
    if np.any(s <= cut):
        return -np.inf
    return float(2.0 * np.sum(np.log(s)))
