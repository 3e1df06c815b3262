"""Dense small-matrix primitives shared by the direction-memory and subproblem code.

Everything here operates on matrices with at most a few dozen columns
(direction blocks are d x k with k <= memory size, Gram blocks are k x k),
so plain LAPACK-backed numpy routines are used throughout.
"""
from dataclasses import dataclass

import numpy as np

RANK_TOL = 1e-14  # relative singular-value cutoff signalling rank deficiency


class RankDeficientError(ValueError):
    """A direction block lost full column rank.

    ``column`` is the index of the first offending column when known.
    """

    def __init__(self, msg, column=None):
        super().__init__(msg)
        self.column = column


class NonFiniteError(ValueError):
    """Input contains NaN or Inf entries."""


@dataclass
class SymEig:
    """Eigendecomposition of a symmetric matrix, eigenvalues ascending."""

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray


def qr_orthonormalize(a: np.ndarray) -> np.ndarray:
    """Return an orthonormal basis Q with span(Q) = span(a), columns in order.

    Raises RankDeficientError when a column is (numerically) dependent on the
    previous ones: the residual after projecting it out falls below
    1e-12 times the column's own norm.
    """
    a = np.asarray(a, dtype=float)
    if a.ndim != 2:
        raise ValueError("expected a 2-d array")
    if not np.all(np.isfinite(a)):
        raise NonFiniteError("non-finite entries in matrix to orthonormalize")
    if a.shape[1] == 0:
        return a.copy()
    q, r = np.linalg.qr(a)
    col_norms = np.linalg.norm(a, axis=0)
    # |r[i, i]| is the norm of column i's residual against span of columns < i.
    for i in range(a.shape[1]):
        if abs(r[i, i]) < 1e-12 * col_norms[i] or col_norms[i] == 0.0:
            raise RankDeficientError(
                f"column {i} is dependent on the previous columns", column=i
            )
    return q


def sym_eig(h: np.ndarray) -> SymEig:
    """Symmetric eigendecomposition with ascending eigenvalues.

    The input is symmetrized as (h + h^T)/2 first; entries must be finite.
    """
    h = np.asarray(h, dtype=float)
    if not np.all(np.isfinite(h)):
        raise NonFiniteError("non-finite entries in symmetric matrix")
    hs = 0.5 * (h + h.T)
    w, v = np.linalg.eigh(hs)
    return SymEig(eigenvalues=w, eigenvectors=v)


def condition_number(d: np.ndarray) -> float:
    """kappa_D = sqrt(||D^T D|| ||(D^T D)^-1||) = s_max / s_min.

    Returns +inf when the smallest singular value is below RANK_TOL times the
    largest (rank deficiency is a value here, not an error).
    """
    d = np.asarray(d, dtype=float)
    if d.ndim != 2 or d.shape[1] == 0:
        raise ValueError("expected a matrix with at least one column")
    s = np.linalg.svd(d, compute_uv=False)
    if s[0] == 0.0 or s[-1] < RANK_TOL * s[0]:
        return float("inf")
    return float(s[0] / s[-1])


def spectral_norm(a: np.ndarray) -> float:
    a = np.asarray(a, dtype=float)
    if a.size == 0:
        return 0.0
    return float(np.linalg.svd(a, compute_uv=False)[0])


def project(d: np.ndarray, v: np.ndarray) -> np.ndarray:
    """Orthogonal projection of v onto span(D): P v with P = D (D^T D)^-1 D^T."""
    d = np.asarray(d, dtype=float)
    v = np.asarray(v, dtype=float)
    if d.shape[1] == 0:
        return np.zeros_like(v)
    if not np.isfinite(condition_number(d)):
        raise RankDeficientError("projection requires full column rank")
    coef, *_ = np.linalg.lstsq(d, v, rcond=None)
    return d @ coef


def projector_matrix(d: np.ndarray) -> np.ndarray:
    """Dense P = D (D^T D)^-1 D^T; convenient for k-dimensional diagnostics."""
    d = np.asarray(d, dtype=float)
    if d.shape[1] == 0:
        return np.zeros((d.shape[0], d.shape[0]))
    if not np.isfinite(condition_number(d)):
        raise RankDeficientError("projector requires full column rank")
    gram = d.T @ d
    return d @ np.linalg.solve(gram, d.T)
