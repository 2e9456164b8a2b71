"""Dense linear algebra around the Gram matrix ``F F^T``.

Everything is routed through one thin SVD of ``F`` (rows are neurons,
columns are signal coordinates).  Squared singular values are the nonzero
eigenvalues of ``F F^T``; anything below ``tol_rank * lambda_max`` counts
as zero.
"""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .errors import AllZeroMatrix, DimensionMismatch

TOL_RANK = 1e-10


def as_matrix(F) -> np.ndarray:
    F = np.array(F, dtype=float)
    if F.ndim != 2 or F.shape[0] < 1 or F.shape[1] < 1:
        raise DimensionMismatch(f"expected a non-empty 2-D matrix, got shape {F.shape}")
    if not np.all(np.isfinite(F)):
        raise ValueError("matrix has non-finite entries")
    return F


def as_vector(x, length: int, name: str = "vector") -> np.ndarray:
    x = np.array(x, dtype=float).reshape(-1)
    if x.shape[0] != length:
        raise DimensionMismatch(f"{name} has length {x.shape[0]}, expected {length}")
    return x


@dataclass(frozen=True)
class SpectralData:
    lambda_min_nz: float
    lambda_max: float
    kappa: float
    rank: int


class GramFactor:
    """Cached SVD of ``F`` exposing the Gram-matrix quantities.

    Build one per matrix when the same ``F`` is queried many times (the
    simulation loop does this); the module-level functions construct a
    throwaway instance per call.
    """

    def __init__(self, F, tol_rank: float = TOL_RANK):
        self.F = as_matrix(F)
        self.n, self.m = self.F.shape
        self.tol_rank = tol_rank
        U, s, Vt = np.linalg.svd(self.F, full_matrices=False)
        eig = s**2
        if eig.size == 0 or eig[0] <= 0.0:
            raise AllZeroMatrix("F F^T has no nonzero eigenvalue")
        keep = eig >= tol_rank * eig[0]
        self._U = U[:, keep]
        self._s = s[keep]
        self._V = Vt[keep].T
        self.eigenvalues = eig[keep]

    @cached_property
    def spectral(self) -> SpectralData:
        lmax = float(self.eigenvalues[0])
        lmin = float(self.eigenvalues[-1])
        return SpectralData(lmin, lmax, lmax / lmin, int(self.eigenvalues.size))

    @cached_property
    def gram(self) -> np.ndarray:
        return self.F @ self.F.T

    @cached_property
    def gram_pinv(self) -> np.ndarray:
        W = self._U / self.eigenvalues
        return W @ self._U.T

    def project_rowspace(self, x: np.ndarray) -> np.ndarray:
        x = as_vector(x, self.m, "x")
        return self._V @ (self._V.T @ x)

    def pinv_norm(self, w: np.ndarray) -> float:
        w = as_vector(w, self.n, "w")
        return float(np.linalg.norm((self._U.T @ w) / self._s))

    def min_norm_solution(self, x: np.ndarray) -> np.ndarray:
        """``(F F^T)^+ F x``, the minimum-norm least-squares rate."""
        x = as_vector(x, self.m, "x")
        return self._U @ ((self._V.T @ x) / self._s)


def spectral(F, tol_rank: float = TOL_RANK) -> SpectralData:
    """Extreme nonzero eigenvalues, condition number and rank of ``F F^T``.

    Raises
    ------
    AllZeroMatrix
        If no eigenvalue survives the relative rank threshold.
    """
    return GramFactor(F, tol_rank).spectral


def project_rowspace(F, x) -> np.ndarray:
    """Orthogonal projection of ``x`` onto the row space of ``F``."""
    F = as_matrix(F)
    x = as_vector(x, F.shape[1], "x")
    if not np.any(F):
        return np.zeros_like(x)
    return GramFactor(F).project_rowspace(x)


def gram_norm(F, r) -> float:
    F = as_matrix(F)
    r = as_vector(r, F.shape[0], "r")
    return float(np.linalg.norm(F.T @ r))


def pinv_gram_norm(F, w) -> float:
    """``sqrt(w^T (F F^T)^+ w)`` with the same rank threshold as ``spectral``."""
    F = as_matrix(F)
    w = as_vector(w, F.shape[0], "w")
    if not np.any(F):
        return 0.0
    return GramFactor(F).pinv_norm(w)


def residual_l2(F, x, r) -> float:
    F = as_matrix(F)
    x = as_vector(x, F.shape[1], "x")
    r = as_vector(r, F.shape[0], "r")
    return float(np.linalg.norm(x - F.T @ r))
