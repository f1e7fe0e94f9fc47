"""Dense linear-algebra kernel.

Symmetric and general eigenvalue problems, range/nullspace splitting of
PSD matrices, Kronecker products and the symmetrization operator
``gamma(A) = (A + A^T) / 2``.  Everything here is a pure function of its
inputs; matrices are plain ``numpy`` arrays.
"""
from dataclasses import dataclass

import numpy as np
from scipy.optimize import linear_sum_assignment

from .exceptions import ContractError, DimensionError, NotPSDError

DEFAULT_TOL = 1e-9

# relative asymmetry accepted by routines that require symmetric input
SYMMETRY_TOL = 1e-12


def _as_matrix(A, name="A"):
    A = np.asarray(A, dtype=float)
    if A.ndim != 2:
        raise DimensionError(f"{name} must be 2-D, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        raise ContractError(f"{name} has non-finite entries")
    return A


def _as_square(A, name="A"):
    A = _as_matrix(A, name)
    if A.shape[0] != A.shape[1]:
        raise DimensionError(f"{name} must be square, got shape {A.shape}")
    return A


def asymmetry(A):
    """Relative Frobenius asymmetry ``||A - A^T|| / max(1, ||A||)``."""
    A = np.asarray(A, dtype=float)
    return np.linalg.norm(A - A.T) / max(1.0, np.linalg.norm(A))


def _require_symmetric(A, name="A"):
    A = _as_square(A, name)
    if asymmetry(A) > SYMMETRY_TOL:
        raise ContractError(
            f"{name} is not symmetric (relative asymmetry {asymmetry(A):.3e})"
        )
    return A


def gamma(A):
    """Symmetric part ``(A + A^T) / 2`` of a square matrix."""
    A = _as_square(A)
    return 0.5 * (A + A.T)


def symmetric_eig(A):
    """Eigendecomposition of a symmetric matrix.

    Returns ``(w, V)`` with eigenvalues ``w`` in descending order and
    orthonormal eigenvectors as the columns of ``V``.
    """
    A = _require_symmetric(A)
    # eigh reads one triangle only; symmetrize so both halves count
    w, V = np.linalg.eigh(0.5 * (A + A.T))
    return w[::-1].copy(), V[:, ::-1].copy()


def sort_spectrum(values):
    """Sort complex values by (real, imag) ascending."""
    values = np.asarray(values, dtype=complex).ravel()
    order = np.lexsort((values.imag, values.real))
    return values[order]


def general_eig(A):
    """Eigenvalues of a real square matrix, sorted by (real, imag).

    LAPACK's Hessenberg reduction followed by shifted QR (``dgeev``) does the
    work; no eigenvectors are formed.
    """
    A = _as_square(A)
    if A.shape[0] == 0:
        return np.zeros(0, dtype=complex)
    return sort_spectrum(np.linalg.eigvals(A))


def match_spectra(computed, predicted):
    """Maximum pairwise distance under an optimal one-to-one assignment.

    The assignment minimises the total distance between the two multisets
    (Hungarian algorithm); the returned residual is the largest distance
    among the matched pairs.
    """
    a = np.asarray(computed, dtype=complex).ravel()
    b = np.asarray(predicted, dtype=complex).ravel()
    if a.shape != b.shape:
        raise DimensionError(
            f"spectra differ in size: {a.size} computed vs {b.size} predicted"
        )
    if a.size == 0:
        return 0.0
    cost = np.abs(a[:, None] - b[None, :])
    rows, cols = linear_sum_assignment(cost)
    return float(cost[rows, cols].max())


@dataclass(frozen=True)
class SpectralSplit:
    """Range/nullspace split ``L = U1 diag(Lambda) U1^T`` of a PSD matrix."""

    U1: np.ndarray
    Lambda: np.ndarray
    U2: np.ndarray
    rank: int
    tolerance_used: float

    def lift(self, d):
        """Kronecker lift ``(U1 (x) I_d, Lambda (x) I_d, U2 (x) I_d)``."""
        eye = np.eye(d)
        return (
            np.kron(self.U1, eye),
            np.kron(self.Lambda, np.ones(d)),
            np.kron(self.U2, eye),
        )

    def reconstruct(self):
        return (self.U1 * self.Lambda) @ self.U1.T


def split_range_nullspace(L, tol=DEFAULT_TOL):
    """Split a symmetric PSD matrix into its range and nullspace.

    An eigenvalue counts as nonzero when it exceeds ``tol * max(1, lambda_max)``.
    Raises :class:`NotPSDError` if an eigenvalue falls below minus that
    threshold.
    """
    w, V = symmetric_eig(L)
    n = w.size
    scale = max(1.0, float(w[0])) if n else 1.0
    threshold = tol * scale
    if n and w[-1] < -threshold:
        raise NotPSDError(
            f"matrix is indefinite: min eigenvalue {w[-1]:.6g} < {-threshold:.3g}",
            float(w[-1]),
        )
    p = int(np.count_nonzero(w > threshold))
    return SpectralSplit(
        U1=V[:, :p], Lambda=w[:p], U2=V[:, p:], rank=p, tolerance_used=threshold
    )


def kron(A, B):
    """Kronecker product ``A (x) B``: block ``(i, j)`` equals ``A[i, j] * B``."""
    return np.kron(_as_matrix(A, "A"), _as_matrix(B, "B"))


def is_positive_definite(A, tol=DEFAULT_TOL):
    """Return ``(min_eigenvalue > tol, min_eigenvalue)`` for symmetric ``A``."""
    w, _ = symmetric_eig(A)
    lo = float(w[-1])
    return lo > tol, lo
