"""
Dense matrix values, SVD access and the nuclear-norm proximal operator.

Matrices are plain ``numpy.ndarray`` values of dtype float64 and shape
(rows, cols). Every solver step goes through :func:`svt`.
"""
import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .exceptions import ConvergenceFailure, DimMismatch, NonFiniteValues

logger = logging.getLogger(__name__)

# Singular values below RANK_RTOL * s_max count as zero when reporting rank.
RANK_RTOL = 1e-12


def as_mat(values, *, name: str = 'matrix') -> np.ndarray:
    """Coerce to a finite 2-D float64 array."""
    mat = np.asarray(values, dtype=np.float64)
    if mat.ndim != 2:
        raise DimMismatch(f"{name} must be 2-D, got shape {mat.shape}")
    if not np.all(np.isfinite(mat)):
        raise NonFiniteValues(f"{name} contains NaN or Inf")
    return mat


def check_same_shape(a: np.ndarray, b: np.ndarray) -> None:
    if a.shape != b.shape:
        raise DimMismatch(f"shape {a.shape} does not match {b.shape}")


@dataclass(frozen=True)
class SvdFactors:
    """Thin SVD ``u @ diag(s) @ v.T`` with ``k = min(rows, cols)``."""

    u: np.ndarray
    s: np.ndarray
    v: np.ndarray

    @property
    def k(self) -> int:
        return self.s.shape[0]

    def rank(self, rtol: float = RANK_RTOL) -> int:
        if self.k == 0 or self.s[0] == 0.0:
            return 0
        return int(np.count_nonzero(self.s > rtol * self.s[0]))

    def reconstruct(self) -> np.ndarray:
        return (self.u * self.s) @ self.v.T


def svd(m: np.ndarray) -> SvdFactors:
    """Thin SVD with singular values sorted nonincreasing.

    Falls back from the divide-and-conquer driver to ``gesvd`` before
    giving up with :class:`ConvergenceFailure`.
    """
    mat = as_mat(m)
    try:
        u, s, vh = scipy.linalg.svd(mat, full_matrices=False, check_finite=False)
    except np.linalg.LinAlgError:
        logger.debug("gesdd failed on %s matrix, retrying with gesvd", mat.shape)
        try:
            u, s, vh = scipy.linalg.svd(
                mat, full_matrices=False, check_finite=False, lapack_driver='gesvd'
            )
        except np.linalg.LinAlgError as exc:
            raise ConvergenceFailure(f"SVD did not converge on {mat.shape} matrix") from exc
    return SvdFactors(u=u, s=s, v=vh.T)


def svt(g: np.ndarray, tau: float) -> np.ndarray:
    """Singular value soft-thresholding ``U (D - tau)_+ V^T``.

    This is the proximal map of ``tau * ||.||_*`` at ``g``.
    """
    if tau < 0:
        raise ValueError(f"threshold must be nonnegative, got {tau}")
    if tau == 0:
        return as_mat(g).copy()
    factors = svd(g)
    shrunk = factors.s - tau
    keep = shrunk > 0
    if not np.any(keep):
        return np.zeros((factors.u.shape[0], factors.v.shape[0]))
    return (factors.u[:, keep] * shrunk[keep]) @ factors.v[:, keep].T


def frob_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 'fro'))


def nuclear_norm(m: np.ndarray) -> float:
    return float(np.sum(svd(m).s))


def spectral_norm(m: np.ndarray) -> float:
    s = svd(m).s
    return float(s[0]) if s.size else 0.0


def numerical_rank(m: np.ndarray, rtol: float = RANK_RTOL) -> int:
    return svd(m).rank(rtol)


def inner_product(a: np.ndarray, b: np.ndarray) -> float:
    """Trace inner product ``Tr(a^T b)``."""
    check_same_shape(a, b)
    return float(np.vdot(a, b))
