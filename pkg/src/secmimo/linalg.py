"""Dense complex Hermitian kernels used throughout the package."""

from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import ConditioningError, NotPSDError, ValidationError

HERMITIAN_ATOL = 1e-12
PSD_RTOL = 1e-10


@dataclass(frozen=True)
class EigenDecomposition:
    """Eigenvalues in descending order and the matching unitary eigenvector matrix (columns)."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        V = self.eigenvectors
        return (V * self.eigenvalues) @ V.conj().T


def check_hermitian(A: np.ndarray, atol: float = HERMITIAN_ATOL) -> np.ndarray:
    """Validate that ``A`` is square and Hermitian; return it as a complex array.

    The per-entry tolerance is ``atol * max(1, max|A|)`` so that matrices with
    large entries (traces of order N_t) are not rejected over rounding.
    """
    A = np.asarray(A)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValidationError(f"expected a square matrix, got shape {A.shape}")
    A = A.astype(complex, copy=False)
    if not np.all(np.isfinite(A)):
        raise ValidationError("matrix contains non-finite entries")
    diff = np.abs(A - A.conj().T)
    tol = atol * max(1.0, float(np.max(np.abs(A), initial=0.0)))
    if diff.size and diff.max() > tol:
        a, b = np.unravel_index(int(np.argmax(diff)), diff.shape)
        raise ValidationError(
            f"matrix is not Hermitian: entries ({a}, {b}) and ({b}, {a}) differ by {diff[a, b]:.3e}"
        )
    return A


def hermitize(A: np.ndarray) -> np.ndarray:
    return 0.5 * (A + np.swapaxes(A, -1, -2).conj())


def hermitian_eig(A: np.ndarray) -> EigenDecomposition:
    """Eigendecomposition of a Hermitian matrix, eigenvalues sorted descending.

    Equal eigenvalues keep the (reversed) order returned by LAPACK ``heevd``,
    which is deterministic for a fixed input.
    """
    A = hermitize(check_hermitian(A))
    w, V = np.linalg.eigh(A)
    return EigenDecomposition(w[::-1].copy(), V[:, ::-1].copy())


def _clamped_spectrum(A: np.ndarray, scale: float | None = None) -> EigenDecomposition:
    dec = hermitian_eig(A)
    lam = dec.eigenvalues
    lam_max = lam[0] if lam.size else 0.0
    ref = max(lam_max, 0.0) if scale is None else max(lam_max, scale)
    if lam.size and lam[-1] < -PSD_RTOL * ref:
        raise NotPSDError(lam[-1], lam_max)
    return EigenDecomposition(np.clip(lam, 0.0, None), dec.eigenvectors)


def hermitian_sqrt(A: np.ndarray) -> np.ndarray:
    """Principal (Hermitian PSD) square root S with S @ S^H = A.

    Tiny negative eigenvalues (>= -1e-10 * lambda_max) are clamped to zero, and
    eigenvalues at rounding level (<= dim * eps * lambda_max) are treated as
    exact zeros so that low-rank supports are preserved.
    """
    dec = _clamped_spectrum(A)
    V = dec.eigenvectors
    lam = dec.eigenvalues
    if lam.size:
        lam = np.where(lam <= lam.size * np.finfo(float).eps * lam[0], 0.0, lam)
    S = (V * np.sqrt(lam)) @ V.conj().T
    return hermitize(S)


def null_space_basis(A: np.ndarray, rel_tol: float, scale: float | None = None) -> np.ndarray:
    """Orthonormal basis of the eigenvectors of PSD ``A`` with eigenvalue <= rel_tol * scale.

    ``scale`` defaults to lambda_max(A); pass the original scale when ``A`` is
    itself a projection that is already close to zero. Returns an array of
    shape (dim, M). The zero matrix yields the identity (M = dim).
    """
    if not 0.0 < rel_tol < 1.0:
        raise ValidationError(f"rel_tol must lie in (0, 1), got {rel_tol}")
    dec = _clamped_spectrum(A, scale)
    lam = dec.eigenvalues
    dim = lam.size
    if scale is None:
        scale = lam[0] if dim else 0.0
    if scale <= 0.0:
        return np.eye(dim, dtype=complex)
    mask = lam <= rel_tol * scale
    return dec.eigenvectors[:, mask].copy()


def solve_hermitian(A: np.ndarray, B: np.ndarray) -> np.ndarray:
    """Solve A X = B for Hermitian positive definite A."""
    A = hermitize(check_hermitian(A))
    B = np.asarray(B, dtype=complex)
    try:
        with warnings.catch_warnings():
            warnings.simplefilter("error", scipy.linalg.LinAlgWarning)
            return scipy.linalg.solve(A, B, assume_a="pos", check_finite=False)
    except (np.linalg.LinAlgError, scipy.linalg.LinAlgError, scipy.linalg.LinAlgWarning):
        raise ConditioningError(np.linalg.cond(A)) from None


def trace_product(A: np.ndarray, B: np.ndarray) -> complex:
    """tr(A @ B) without forming the product."""
    return complex(np.einsum("ij,ji->", A, B))
