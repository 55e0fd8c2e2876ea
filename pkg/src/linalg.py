"""
KAR Learner - Dense linear algebra: Moore-Penrose pseudo-inverse and least squares
"""
import logging
from dataclasses import dataclass
from typing import Optional

import numpy as np
import scipy.linalg

from src.errors import DegenerateShape, NonFiniteInput, ShapeMismatch

logger = logging.getLogger(__name__)

SVD_TRUNCATION = "svd_truncation"
RIDGE_LIMIT = "ridge_limit"
PINV_MODES = (SVD_TRUNCATION, RIDGE_LIMIT)

DEFAULT_LAMBDA = 1e-8


@dataclass(frozen=True)
class PinvConfig:
    """
    How pseudo-inverses are computed.

    rcond=None means machine-epsilon x max(rows, cols), resolved per matrix.
    lam is only read in ridge_limit mode.
    """
    mode: str = SVD_TRUNCATION
    rcond: Optional[float] = None
    lam: float = DEFAULT_LAMBDA

    def __post_init__(self):
        if self.mode not in PINV_MODES:
            raise ValueError(f"unknown pinv mode {self.mode!r}, expected one of {PINV_MODES}")
        if self.rcond is not None and not self.rcond > 0:
            raise ValueError(f"rcond must be > 0, got {self.rcond}")
        if not self.lam >= 0:
            raise ValueError(f"lambda must be >= 0, got {self.lam}")

    def cutoff(self, shape) -> float:
        """Relative singular-value cutoff for a matrix of the given shape"""
        if self.rcond is not None:
            return self.rcond
        return np.finfo(np.float64).eps * max(shape)


def as_matrix(A, what: str = "matrix") -> np.ndarray:
    """Validate and return A as a finite 2-D float64 array"""
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2:
        raise ShapeMismatch(f"{what} must be 2-dimensional, got shape {A.shape}")
    if A.shape[0] == 0 or A.shape[1] == 0:
        raise DegenerateShape(f"{what} has degenerate shape {A.shape}")
    if not np.isfinite(A).all():
        raise NonFiniteInput(what)
    return A


def _svd(A: np.ndarray):
    try:
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesdd")
    except np.linalg.LinAlgError:
        # gesdd occasionally fails to converge on badly scaled input
        logger.debug("gesdd did not converge on %s matrix, retrying with gesvd", A.shape)
        return scipy.linalg.svd(A, full_matrices=False, lapack_driver="gesvd")


def _pinv_svd(A: np.ndarray, cfg: PinvConfig) -> np.ndarray:
    U, s, Vh = _svd(A)
    if s.size == 0 or s[0] == 0.0:
        return np.zeros((A.shape[1], A.shape[0]))
    keep = s > cfg.cutoff(A.shape) * s[0]
    s_inv = np.zeros_like(s)
    s_inv[keep] = 1.0 / s[keep]
    return (Vh.T * s_inv) @ U.T


def _pinv_ridge(A: np.ndarray, cfg: PinvConfig) -> np.ndarray:
    rows, cols = A.shape
    if rows <= cols:
        # right form A^T (A A^T + lam I)^{-1}; the Gram matrix is symmetric
        gram = A @ A.T + cfg.lam * np.eye(rows)
        return scipy.linalg.solve(gram, A, assume_a="pos").T
    gram = A.T @ A + cfg.lam * np.eye(cols)
    return scipy.linalg.solve(gram, A.T, assume_a="pos")


def pinv(A, cfg: Optional[PinvConfig] = None) -> np.ndarray:
    """
    Moore-Penrose pseudo-inverse.

    Args:
        A: m x n matrix, all entries finite
        cfg: truncated SVD (default) or the ridge-limit form

    Returns:
        n x m matrix A†
    """
    cfg = cfg or PinvConfig()
    A = as_matrix(A)
    if cfg.mode == RIDGE_LIMIT:
        return _pinv_ridge(A, cfg)
    return _pinv_svd(A, cfg)


class CountingPinv:
    """pinv wrapper that counts how many times it has been called"""

    def __init__(self, cfg: Optional[PinvConfig] = None):
        self.cfg = cfg or PinvConfig()
        self.calls = 0

    def __call__(self, A) -> np.ndarray:
        self.calls += 1
        return pinv(A, self.cfg)


def solve_min_norm(X, Y, cfg: Optional[PinvConfig] = None) -> np.ndarray:
    """
    Minimum-norm least squares solution W = X† Y of X W = Y.

    Among all minimisers of the sum of squared errors the returned W has the
    smallest Frobenius norm.
    """
    X = as_matrix(X, "X")
    Y = as_matrix(Y, "Y")
    if X.shape[0] != Y.shape[0]:
        raise ShapeMismatch(f"X has {X.shape[0]} rows but Y has {Y.shape[0]}")
    return pinv(X, cfg) @ Y


def sse(X, W, Y) -> float:
    """Sum of squared errors trace((XW - Y)^T (XW - Y))"""
    X = np.asarray(X, dtype=np.float64)
    W = np.asarray(W, dtype=np.float64)
    Y = np.asarray(Y, dtype=np.float64)
    if X.ndim != 2 or W.ndim != 2 or Y.ndim != 2:
        raise ShapeMismatch("sse operands must be 2-dimensional")
    if X.shape[1] != W.shape[0] or (X.shape[0], W.shape[1]) != Y.shape:
        raise ShapeMismatch(f"cannot compare {X.shape} x {W.shape} against {Y.shape}")
    residual = X @ W - Y
    return float(np.sum(residual * residual))


def rank(A, cfg: Optional[PinvConfig] = None) -> int:
    """Numerical rank under the same truncation rule pinv uses"""
    cfg = cfg or PinvConfig()
    A = as_matrix(A)
    s = scipy.linalg.svdvals(A)
    if s[0] == 0.0:
        return 0
    return int(np.count_nonzero(s > cfg.cutoff(A.shape) * s[0]))


def null_space_basis(X, cfg: Optional[PinvConfig] = None) -> np.ndarray:
    """
    Orthonormal basis of the kernel of X.

    Returns:
        d x k matrix whose columns span {w : X w = 0}; k may be 0
    """
    X = as_matrix(X)
    U, s, Vh = scipy.linalg.svd(X, full_matrices=True)
    r = rank(X, cfg)
    return Vh[r:].T.copy()
