"""
Dense kernels: Gram determinants, minimal-norm least squares, null spaces
and symmetric eigenvalues. Every rank decision goes through the SVD with
the cutoff 1e-10 * sigma_1 * max(r, c).
"""
import math
from dataclasses import dataclass
from typing import Optional, Tuple

import numpy as np
import scipy.linalg

from ctkkt.core.exceptions import AsymmetricMatrixError, DimensionError

RANK_RTOL = 1e-10
LOG_SPACE_ROWS = 20


def rank_tolerance(s: np.ndarray, shape: Tuple[int, int]) -> float:
    if s.size == 0:
        return 0.0
    return RANK_RTOL * float(s[0]) * max(shape)


@dataclass(frozen=True)
class GramReport:
    """
    det(M M') of an r x c matrix, read off its singular values.

    For r > 20 the determinant is carried as (log_det, sign); `det` is then
    exp(log_det), which may under- or overflow to 0 or inf.
    """

    shape: Tuple[int, int]
    singular_values: Tuple[float, ...]
    det: float
    log_det: float
    sign: int
    spectral_norm: float
    rank: int

    @property
    def full_row_rank(self) -> bool:
        return self.rank == self.shape[0]

    def to_dict(self) -> dict:
        return {
            "shape": list(self.shape),
            "singular_values": list(self.singular_values),
            "det": self.det,
            "log_det": self.log_det,
            "sign": self.sign,
            "spectral_norm": self.spectral_norm,
            "rank": self.rank,
        }


def singular_values(M: np.ndarray) -> np.ndarray:
    M = np.asarray(M, dtype=float)
    if M.size == 0:
        return np.zeros(0)
    return scipy.linalg.svdvals(M)


def gram_det(M: np.ndarray) -> GramReport:
    """det(M M') as the product of squared singular values of M."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    r, c = M.shape
    if r > c:
        raise DimensionError(f"gram_det needs r <= c, got {r} x {c}")
    s = singular_values(M)
    if r == 0:
        return GramReport((r, c), (), 1.0, 0.0, 1, 0.0, 0)
    tol = rank_tolerance(s, (r, c))
    rank = int(np.sum(s > tol))
    if np.any(s == 0.0):
        log_det, sign = -math.inf, 0
    else:
        log_det, sign = float(2.0 * np.sum(np.log(s))), 1
    if r > LOG_SPACE_ROWS:
        det = math.exp(log_det) if sign else 0.0
    else:
        det = float(np.prod(s * s))
    return GramReport(
        shape=(r, c),
        singular_values=tuple(float(x) for x in s),
        det=det,
        log_det=log_det,
        sign=sign,
        spectral_norm=float(s[0]),
        rank=rank,
    )


def numerical_rank(M: np.ndarray) -> int:
    M = np.atleast_2d(np.asarray(M, dtype=float))
    s = singular_values(M)
    return int(np.sum(s > rank_tolerance(s, M.shape))) if s.size else 0


def inverse_norm_bound(K: float, L: float, p: int) -> float:
    """
    Bound on ||M^-1|| for p x p matrices with det(M) >= K and ||M|| <= L.
    """
    if K <= 0 or L <= 0:
        raise ValueError(f"K and L must be positive, got K={K}, L={L}")
    if p < 1:
        raise ValueError(f"p must be >= 1, got {p}")
    return L ** (p - 1) / K


def min_norm_lsq(
    M: np.ndarray, b: np.ndarray, tol_rank: Optional[float] = None
) -> np.ndarray:
    """Minimal-norm least-squares solution of M x = b via the SVD pseudo-inverse."""
    M = np.atleast_2d(np.asarray(M, dtype=float))
    b = np.asarray(b, dtype=float).reshape(-1)
    r, c = M.shape
    if b.shape[0] != r:
        raise DimensionError(f"rhs has length {b.shape[0]}, matrix has {r} rows")
    if M.size == 0:
        return np.zeros(c)
    U, s, Vh = scipy.linalg.svd(M, full_matrices=False)
    if tol_rank is None:
        tol_rank = rank_tolerance(s, (r, c))
    s_inv = np.zeros_like(s)
    keep = s > tol_rank
    s_inv[keep] = 1.0 / s[keep]
    return Vh.T @ (s_inv * (U.T @ b))


def nullspace_basis(M: np.ndarray, tol_rank: Optional[float] = None) -> np.ndarray:
    """Orthonormal c x k basis of ker(M); k may be 0."""
    M = np.asarray(M, dtype=float)
    if M.ndim == 1:
        M = M.reshape(1, -1) if M.size else M.reshape(0, 0)
    r, c = M.shape
    if r == 0 or not np.any(M):
        return np.eye(c)
    U, s, Vh = scipy.linalg.svd(M, full_matrices=True)
    if tol_rank is None:
        tol_rank = rank_tolerance(s, (r, c))
    rank = int(np.sum(s > tol_rank))
    return Vh[rank:].T.copy()


def max_eig_sym(S: np.ndarray) -> float:
    """Largest eigenvalue of a symmetric matrix; -inf for the 0 x 0 matrix."""
    S = np.asarray(S, dtype=float)
    if S.size == 0:
        return -math.inf
    if S.ndim != 2 or S.shape[0] != S.shape[1]:
        raise DimensionError(f"expected a square matrix, got shape {S.shape}")
    norm = float(np.linalg.norm(S, 2))
    asym = float(np.max(np.abs(S - S.T)))
    if asym > 1e-12 * norm:
        raise AsymmetricMatrixError(
            f"asymmetry {asym:.3e} exceeds 1e-12 * |S| = {1e-12 * norm:.3e}"
        )
    S = 0.5 * (S + S.T)
    return float(scipy.linalg.eigvalsh(S)[-1])


def project_sym(S: np.ndarray, B: np.ndarray) -> np.ndarray:
    """B' S B, symmetrised."""
    P = B.T @ S @ B
    return 0.5 * (P + P.T)
