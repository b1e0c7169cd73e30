"""Dense matrix helpers and the symmetric eigensolver.

Every matrix in this package is a 2-D ``float64`` numpy array.  The helpers
here validate that contract at API boundaries and provide the eigensolver
used by spectral clustering.  All arithmetic is double precision throughout.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

__all__ = [
    "as_matrix",
    "as_label_vector",
    "matmul",
    "SymEigenResult",
    "sym_eig",
    "canonicalize_eigenvector_signs",
]

# Largest tolerated |a_ij - a_ji| before sym_eig refuses the input.
SYM_EIG_ASYMMETRY_TOL = 1e-10


def as_matrix(a, name: str = "matrix") -> np.ndarray:
    """Validate and return ``a`` as a finite 2-D float64 array.

    Raises ValueError for empty, non-2-D, or non-finite input.
    """
    out = np.asarray(a, dtype=np.float64)
    if out.ndim != 2:
        raise ValueError(f"{name} must be 2-D, got shape {out.shape}")
    if out.shape[0] < 1 or out.shape[1] < 1:
        raise ValueError(f"{name} must have at least one row and column, got shape {out.shape}")
    if not np.all(np.isfinite(out)):
        raise ValueError(f"{name} contains non-finite entries")
    return out


def as_label_vector(labels, name: str = "labels") -> np.ndarray:
    """Validate and return ``labels`` as a 1-D int64 array."""
    out = np.asarray(labels)
    if out.ndim != 1:
        raise ValueError(f"{name} must be 1-D, got shape {out.shape}")
    if out.size == 0:
        raise ValueError(f"{name} is empty")
    if not np.issubdtype(out.dtype, np.integer):
        as_int = np.asarray(out, dtype=np.int64)
        if not np.array_equal(as_int, out):
            raise ValueError(f"{name} must be integers")
        out = as_int
    return out.astype(np.int64)


def matmul(a, b) -> np.ndarray:
    """Matrix product with an explicit dimension check."""
    a = as_matrix(a, "left operand")
    b = as_matrix(b, "right operand")
    if a.shape[1] != b.shape[0]:
        raise ValueError(
            f"matmul dimension mismatch: left is {a.shape}, right is {b.shape}"
        )
    return a @ b


@dataclass(frozen=True)
class SymEigenResult:
    """Eigendecomposition of a symmetric matrix.

    ``eigenvalues`` is sorted ascending; column ``i`` of ``eigenvectors`` is
    the unit-norm eigenvector for ``eigenvalues[i]``, with the sign convention
    that each column's largest-magnitude entry is positive.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def canonicalize_eigenvector_signs(vectors: np.ndarray) -> np.ndarray:
    """Flip eigenvector columns so the largest-|entry| of each is positive.

    Makes the decomposition reproducible across runs; ties break on the
    first occurrence of the maximal magnitude.
    """
    out = vectors.copy()
    idx = np.argmax(np.abs(out), axis=0)
    for j, i in enumerate(idx):
        if out[i, j] < 0:
            out[:, j] = -out[:, j]
    return out


def sym_eig(a) -> SymEigenResult:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending.

    The input must be square with ``|a_ij - a_ji| <= 1e-10``; it is
    symmetrized by averaging before decomposition.  Backed by LAPACK via
    ``numpy.linalg.eigh``, with signs canonicalized for reproducibility.
    """
    a = as_matrix(a, "eigensolver input")
    if a.shape[0] != a.shape[1]:
        raise ValueError(f"eigensolver input must be square, got shape {a.shape}")
    asym = np.max(np.abs(a - a.T)) if a.size else 0.0
    if asym > SYM_EIG_ASYMMETRY_TOL:
        raise ValueError(
            f"eigensolver input is asymmetric: max |a_ij - a_ji| = {asym:.3e} "
            f"exceeds {SYM_EIG_ASYMMETRY_TOL:.0e}"
        )
    sym = (a + a.T) / 2.0
    values, vectors = np.linalg.eigh(sym)
    return SymEigenResult(values, canonicalize_eigenvector_signs(vectors))
