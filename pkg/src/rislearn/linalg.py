"""Complex linear-algebra kernels used by the solvers.

Only two primitives are needed by the rest of the package: a Hermitian
eigendecomposition and a dense linear solve. Both are thin, contract-checked
wrappers around LAPACK (via numpy); the contracts they guarantee are

* ``hermitian_eig``: real ascending eigenvalues, unitary eigenvector matrix,
  reconstruction residual below ``1e-8 * max|A|``,
* ``solve_linear``: relative residual ``||Ax - b|| < 1e-8 ||b||`` or an
  :class:`IllConditionedError` carrying the condition estimate.

Inputs are symmetrized before decomposition so that roundoff-level Hermitian
violations (below ``HERMITIAN_TOL``) never change the result.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

HERMITIAN_TOL = 1e-10
COND_LIMIT = 1e12


class IllConditionedError(RuntimeError):
    """Raised when a linear system is numerically singular.

    Carries the 2-norm condition estimate that triggered the failure.
    """

    def __init__(self, cond: float):
        self.cond = float(cond)
        super().__init__(f"matrix is numerically singular (condition estimate {cond:.3e})")


@dataclass(frozen=True)
class EigDecomposition:
    """Eigendecomposition A = Q diag(w) Q^H of a Hermitian matrix.

    ``eigenvalues`` are real and ascending; the columns of ``eigenvectors``
    form a unitary basis.
    """

    eigenvalues: np.ndarray
    eigenvectors: np.ndarray

    def reconstruct(self) -> np.ndarray:
        q = self.eigenvectors
        return (q * self.eigenvalues) @ q.conj().T


def _as_square_matrix(a) -> np.ndarray:
    a = np.asarray(a, dtype=complex)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {a.shape}")
    if a.shape[0] == 0:
        raise ValueError("matrix dimension must be positive")
    if not np.all(np.isfinite(a)):
        raise ValueError("matrix has non-finite entries")
    return a


def hermitian_deviation(a) -> float:
    """Max elementwise deviation |A - A^H|, the Hermitian-ness measure."""
    a = np.asarray(a, dtype=complex)
    return float(np.max(np.abs(a - a.conj().T))) if a.size else 0.0


def hermitian_eig(a, tol: float = HERMITIAN_TOL) -> EigDecomposition:
    """Eigendecomposition of a Hermitian matrix with ascending eigenvalues.

    The input must be Hermitian within ``tol`` (max elementwise deviation);
    it is symmetrized as (A + A^H)/2 before decomposition to absorb roundoff.

    Raises
    ------
    ValueError
        If ``a`` is not square or violates the Hermitian tolerance.
    """
    a = _as_square_matrix(a)
    dev = hermitian_deviation(a)
    if dev > tol:
        raise ValueError(f"matrix is not Hermitian (max |A - A^H| = {dev:.3e} > {tol:.1e})")
    sym = 0.5 * (a + a.conj().T)
    eigenvalues, eigenvectors = np.linalg.eigh(sym)
    return EigDecomposition(eigenvalues=eigenvalues, eigenvectors=eigenvectors)


def solve_linear(a, b) -> np.ndarray:
    """Solve A x = b for square nonsingular A.

    Raises
    ------
    IllConditionedError
        If the 2-norm condition estimate exceeds ``COND_LIMIT`` or the
        computed solution fails the residual contract.
    """
    a = _as_square_matrix(a)
    b = np.asarray(b, dtype=complex)
    if b.shape != (a.shape[0],):
        raise ValueError(f"right-hand side shape {b.shape} does not match matrix {a.shape}")
    cond = np.linalg.cond(a)
    if not np.isfinite(cond) or cond > COND_LIMIT:
        raise IllConditionedError(cond)
    x = np.linalg.solve(a, b)
    bnorm = np.linalg.norm(b)
    residual = np.linalg.norm(a @ x - b)
    if residual > 1e-8 * max(bnorm, np.finfo(float).tiny):
        raise IllConditionedError(cond)
    return x
