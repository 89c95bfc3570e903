"""Dense complex matrix kernel.

Matrix exponentials, Sylvester solves, definiteness tests and left null
spaces for the small (n, m <= ~64) matrices used by the GBDT engines.
All functions are pure.
"""
from __future__ import annotations

import logging
from typing import NamedTuple

import numpy as np
import scipy.linalg as sla

from .errors import (
    NonFiniteError,
    NotPositiveDefiniteError,
    ShapeError,
    SpectralSeparationError,
)

__all__ = [
    "as_cmatrix",
    "fro",
    "hermitian_part",
    "mat_exp",
    "min_spectral_gap",
    "sylvester_solve",
    "sylvester_residual_bound",
    "PosdefResult",
    "posdef_check",
    "HermitianFactor",
    "left_nullspace_basis",
]

log = logging.getLogger(__name__)

EPS = np.finfo(float).eps
COND_WARN = 1e12
# Kronecker linearization is (n*p)^2 dense; beyond this use Bartels-Stewart.
_KRON_MAX = 16


def as_cmatrix(M, name="matrix", square=False) -> np.ndarray:
    """Coerce to a finite 2-D complex array, optionally requiring squareness."""
    arr = np.asarray(M, dtype=complex)
    if arr.ndim == 0:
        arr = arr.reshape(1, 1)
    if arr.ndim != 2:
        raise ShapeError(f"{name} must be 2-D, got shape {arr.shape}")
    if square and arr.shape[0] != arr.shape[1]:
        raise ShapeError(f"{name} must be square, got shape {arr.shape}")
    if not np.all(np.isfinite(arr)):
        raise NonFiniteError(f"{name} has non-finite entries")
    return arr


def fro(M) -> float:
    return float(np.linalg.norm(M))


def hermitian_part(S: np.ndarray) -> np.ndarray:
    return 0.5 * (S + S.conj().T)


def mat_exp(M) -> np.ndarray:
    """Matrix exponential by scaling and squaring with a Pade core.

    Backed by :func:`scipy.linalg.expm` (Al-Mohy & Higham), whose backward
    error is at the level of unit roundoff for every input norm.
    """
    M = as_cmatrix(M, "M", square=True)
    return sla.expm(M)


def min_spectral_gap(A, B) -> float:
    """Smallest distance between an eigenvalue of A and one of B."""
    la = sla.eigvals(A)
    lb = sla.eigvals(B)
    if la.size == 0 or lb.size == 0:
        return np.inf
    return float(np.min(np.abs(la[:, None] - lb[None, :])))


def sylvester_residual_bound(A, B, X) -> float:
    return 1e3 * EPS * (fro(A) + fro(B)) * fro(X)


def sylvester_solve(A, B, C, sep_tol=None) -> np.ndarray:
    """Solve ``A X - X B = C`` for X.

    Parameters
    ----------
    A : (n, n) array_like
    B : (p, p) array_like
    C : (n, p) array_like
    sep_tol : float, optional
        Required minimum distance between the spectra of A and B.
        Defaults to ``1e-10 * (||A|| + ||B||)``.

    Raises
    ------
    SpectralSeparationError
        If some eigenvalue of A lies within ``sep_tol`` of one of B.
    """
    A = as_cmatrix(A, "A", square=True)
    B = as_cmatrix(B, "B", square=True)
    C = as_cmatrix(C, "C")
    n, p = A.shape[0], B.shape[0]
    if C.shape != (n, p):
        raise ShapeError(f"C must be {(n, p)}, got {C.shape}")
    if sep_tol is None:
        sep_tol = 1e-10 * (fro(A) + fro(B))
    gap = min_spectral_gap(A, B)
    if not gap > sep_tol:
        raise SpectralSeparationError(gap, sep_tol)

    if n * p <= _KRON_MAX * _KRON_MAX:
        # column-major vec: vec(AX - XB) = (I_p (x) A - B^T (x) I_n) vec(X)
        K = np.kron(np.eye(p), A) - np.kron(B.T, np.eye(n))
        x = np.linalg.solve(K, C.reshape(-1, order="F"))
        X = x.reshape((n, p), order="F")
    else:
        X = sla.solve_sylvester(A, -B, C)
    if not np.all(np.isfinite(X)):
        raise NonFiniteError("Sylvester solution is not finite")
    return X


class PosdefResult(NamedTuple):
    hermitian_defect: float
    min_eig: float
    is_pd: bool


def posdef_check(S, tol=1e-12) -> PosdefResult:
    """Hermitian defect and smallest eigenvalue of the Hermitian part.

    ``is_pd`` holds iff ``||S - S*|| <= tol*||S||`` and the smallest
    eigenvalue of ``(S + S*)/2`` exceeds ``tol*||S||``.
    """
    S = as_cmatrix(S, "S", square=True)
    if tol < 0:
        raise ValueError("tol must be nonnegative")
    scale = fro(S)
    defect = fro(S - S.conj().T)
    min_eig = float(np.linalg.eigvalsh(hermitian_part(S))[0])
    is_pd = defect <= tol * scale and min_eig > tol * scale
    return PosdefResult(defect, min_eig, bool(is_pd))


class HermitianFactor:
    """Cholesky factorization of the Hermitian part of a positive matrix.

    Used for every application of S^{-1}; no explicit inverses are formed
    except by :meth:`inverse`, which solves against the identity.
    """

    def __init__(self, S, what="S", context=""):
        S = as_cmatrix(S, what, square=True)
        self.matrix = hermitian_part(S)
        self.what = what
        try:
            self._cho = sla.cho_factor(self.matrix, lower=True, check_finite=False)
        except sla.LinAlgError:
            min_eig = np.linalg.eigvalsh(self.matrix)[0]
            raise NotPositiveDefiniteError(what, min_eig, context) from None
        ev = np.linalg.eigvalsh(self.matrix)
        self.min_eig = float(ev[0])
        self.cond = float(ev[-1] / ev[0]) if ev[0] > 0 else np.inf
        if self.cond > COND_WARN:
            log.warning("%s ill-conditioned (cond ~ %.2e) %s", what, self.cond, context)

    def solve(self, B) -> np.ndarray:
        return sla.cho_solve(self._cho, B, check_finite=False)

    def inverse(self) -> np.ndarray:
        inv = self.solve(np.eye(self.matrix.shape[0], dtype=complex))
        return hermitian_part(inv)


def left_nullspace_basis(M, rank_tol=1e-12) -> np.ndarray:
    """Orthonormal rows spanning the numerical left null space of M.

    The numerical rank r is the smallest integer for which the discarded
    singular values satisfy ``sqrt(sum s_i^2, i > r) <= rank_tol*||M||``, so
    the returned ``(p - r, p)`` matrix W always meets
    ``||W M|| <= rank_tol*||M||`` in the Frobenius norm.
    """
    M = as_cmatrix(M, "M")
    p = M.shape[0]
    U, s, _ = np.linalg.svd(M, full_matrices=True)
    total = fro(M)
    # tails[r] = norm of singular values beyond the first r
    tails = np.sqrt(np.append(np.cumsum((s**2)[::-1])[::-1], 0.0))
    r = int(np.argmax(tails <= rank_tol * total))
    return U[:, r:].conj().T.copy()
