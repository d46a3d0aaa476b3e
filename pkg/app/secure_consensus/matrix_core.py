#!/usr/bin/env python3
"""
Matrix Core - Dense Linear Algebra Kernel

Description: Validated dense matrices, Kronecker products, a cyclic Jacobi
symmetric eigensolver, definiteness margins, Cholesky tests and pivoted
linear solves. Every certificate the toolkit prints is an eigenvalue computed
here, so the kernel stays small and deterministic.

Time Complexity: O(n^3) per Jacobi sweep, O(n^3) per solve
Space Complexity: O(n^2)

Dependencies: numpy, scipy.linalg
Author: ThinkCraft
"""

from dataclasses import dataclass
from typing import Sequence, Union
import logging
import warnings

import numpy as np
from scipy import linalg

from .core.errors import DimensionMismatch, NoConvergence, NotSymmetric, Singular

logger = logging.getLogger(__name__)

ArrayLike = Union[np.ndarray, Sequence[Sequence[float]], Sequence[float], float]

SYMMETRY_TOLERANCE = 1e-10
MAX_SWEEPS = 100
PIVOT_FLOOR = 1e-12


@dataclass(frozen=True)
class SymEigResult:
    """Ascending eigenvalues with orthonormal eigenvectors as columns."""
    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    @property
    def lambda_min(self) -> float:
        return float(self.eigenvalues[0])

    @property
    def lambda_max(self) -> float:
        return float(self.eigenvalues[-1])


def as_matrix(data: ArrayLike, name: str = "matrix") -> np.ndarray:
    """
    Build a validated 2-D float matrix.

    Scalars become 1x1 matrices and flat sequences become column vectors.

    Args:
        data: Nested row arrays, a numpy array or a scalar
        name: Label used in error messages

    Returns:
        A fresh float64 array of shape (rows, cols)

    Raises:
        ValueError: If the input has more than two axes or non-finite entries

    Examples:
        >>> as_matrix(3.0).shape
        (1, 1)
        >>> as_matrix([[1, 2], [3, 4]]).shape
        (2, 2)
    """
    array = np.array(data, dtype=float)
    if array.ndim == 0:
        array = array.reshape(1, 1)
    elif array.ndim == 1:
        array = array.reshape(-1, 1)
    elif array.ndim > 2:
        raise ValueError(f"{name} must be at most 2-D, got shape {array.shape}")
    if not np.all(np.isfinite(array)):
        raise ValueError(f"{name} contains non-finite entries")
    return array


def kron(a: ArrayLike, b: ArrayLike) -> np.ndarray:
    """
    Kronecker product: block (i, j) of the result equals a[i, j] * b.

    Examples:
        >>> kron(np.eye(2), [[3.0]])
        array([[3., 0.],
               [0., 3.]])
    """
    return np.kron(as_matrix(a, "a"), as_matrix(b, "b"))


def symmetrize(s: np.ndarray) -> np.ndarray:
    """Return (S + S^T) / 2."""
    s = np.asarray(s, dtype=float)
    return 0.5 * (s + s.T)


def relative_asymmetry(s: np.ndarray) -> float:
    """Frobenius norm of S - S^T relative to the norm of S."""
    scale = np.linalg.norm(s)
    if scale == 0.0:
        return 0.0
    return float(np.linalg.norm(s - s.T) / scale)


def _rotation(app: float, aqq: float, apq: float):
    """Cosine and sine of the Jacobi rotation that zeroes a[p, q]."""
    theta = (aqq - app) / (2.0 * apq)
    t = np.sign(theta) / (abs(theta) + np.sqrt(theta * theta + 1.0))
    if theta == 0.0:
        t = 1.0
    c = 1.0 / np.sqrt(t * t + 1.0)
    return c, t * c


def sym_eig(s: ArrayLike) -> SymEigResult:
    """
    Symmetric eigendecomposition by cyclic Jacobi rotations.

    Each sweep visits every (p, q) pair above the diagonal once and annihilates
    a[p, q] with a plane rotation accumulated into V. Sweeps stop when the
    off-diagonal mass falls below round-off of the matrix norm.

    Args:
        s: Square symmetric matrix

    Returns:
        SymEigResult with ascending eigenvalues; each eigenvector is signed so
        its largest-magnitude component is positive

    Raises:
        DimensionMismatch: If s is not square
        NotSymmetric: If relative asymmetry exceeds 1e-10
        NoConvergence: If 100 sweeps do not diagonalize s

    Time Complexity: O(n^3) per sweep, a handful of sweeps in practice
    Space Complexity: O(n^2)

    Examples:
        >>> sym_eig([[1, -1], [-1, 1]]).eigenvalues.round(12) + 0.0
        array([0., 2.])
    """
    a = as_matrix(s, "s")
    n, cols = a.shape
    if n != cols:
        raise DimensionMismatch(f"sym_eig needs a square matrix, got {a.shape}")
    asymmetry = relative_asymmetry(a)
    if asymmetry > SYMMETRY_TOLERANCE:
        raise NotSymmetric(asymmetry)

    a = symmetrize(a)
    v = np.eye(n)
    scale = np.linalg.norm(a)
    tolerance = 1e-15 * scale

    for sweep in range(MAX_SWEEPS):
        off = np.linalg.norm(a - np.diag(np.diag(a)))
        if off <= tolerance:
            break
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= 1e-18 * (abs(a[p, p]) + abs(a[q, q])):
                    a[p, q] = a[q, p] = 0.0
                    continue
                c, sn = _rotation(a[p, p], a[q, q], apq)
                row_p = a[p, :].copy()
                row_q = a[q, :].copy()
                a[p, :] = c * row_p - sn * row_q
                a[q, :] = sn * row_p + c * row_q
                col_p = a[:, p].copy()
                col_q = a[:, q].copy()
                a[:, p] = c * col_p - sn * col_q
                a[:, q] = sn * col_p + c * col_q
                a[p, q] = a[q, p] = 0.0
                vp = v[:, p].copy()
                vq = v[:, q].copy()
                v[:, p] = c * vp - sn * vq
                v[:, q] = sn * vp + c * vq
    else:
        raise NoConvergence(f"Jacobi eigensolver did not converge in {MAX_SWEEPS} sweeps",
                            iterations=MAX_SWEEPS)

    eigenvalues = np.diag(a).copy()
    order = np.argsort(eigenvalues, kind="stable")
    eigenvalues = eigenvalues[order]
    v = v[:, order]

    # sign convention: largest-magnitude component positive
    pivots = np.argmax(np.abs(v), axis=0)
    signs = np.sign(v[pivots, np.arange(n)])
    signs[signs == 0] = 1.0
    v = v * signs

    logger.debug(f"sym_eig converged for n={n} after {sweep} sweeps")
    return SymEigResult(eigenvalues=eigenvalues, eigenvectors=v)


def definiteness_margin(s: ArrayLike) -> float:
    """
    Largest eigenvalue of the symmetrized input.

    A negative return certifies negative definiteness with that margin.

    Examples:
        >>> float(definiteness_margin(-np.eye(3)))
        -1.0
        >>> round(float(definiteness_margin([[-2, 1], [1, -2]])), 12)
        -1.0
    """
    return sym_eig(symmetrize(as_matrix(s, "s"))).lambda_max


def lambda_min(s: ArrayLike) -> float:
    """Smallest eigenvalue of the symmetrized input."""
    return sym_eig(symmetrize(as_matrix(s, "s"))).lambda_min


def is_positive_definite(s: ArrayLike) -> bool:
    """True iff a Cholesky factorization of the symmetrized input succeeds."""
    matrix = symmetrize(as_matrix(s, "s"))
    if matrix.shape[0] != matrix.shape[1]:
        return False
    try:
        linalg.cholesky(matrix, lower=True)
    except linalg.LinAlgError:
        return False
    return True


def solve_linear(a: ArrayLike, rhs: ArrayLike) -> np.ndarray:
    """
    Solve a x = rhs by LU factorization with partial pivoting.

    Args:
        a: Square coefficient matrix
        rhs: Right-hand side, a vector or a matrix with a.rows rows

    Returns:
        Solution with the same shape as rhs

    Raises:
        DimensionMismatch: If shapes are inconsistent
        Singular: If a pivot magnitude is below 1e-12 * ||a||

    Examples:
        >>> solve_linear([[1, 1], [1, -1]], [3, 1])
        array([2., 1.])
    """
    matrix = as_matrix(a, "a")
    rhs_array = np.array(rhs, dtype=float)
    vector_rhs = rhs_array.ndim == 1
    b = as_matrix(rhs_array, "rhs")

    n, cols = matrix.shape
    if n != cols:
        raise DimensionMismatch(f"solve_linear needs a square matrix, got {matrix.shape}")
    if b.shape[0] != n:
        raise DimensionMismatch(f"rhs has {b.shape[0]} rows, expected {n}")

    floor = PIVOT_FLOOR * np.linalg.norm(matrix, ord=np.inf)
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", linalg.LinAlgWarning)
        lu, piv = linalg.lu_factor(matrix, check_finite=False)
    pivot = float(np.min(np.abs(np.diag(lu)))) if n else 0.0
    if floor == 0.0 or pivot < floor:
        raise Singular(pivot, floor)

    x = linalg.lu_solve((lu, piv), b, check_finite=False)
    return x.ravel() if vector_rhs else x
