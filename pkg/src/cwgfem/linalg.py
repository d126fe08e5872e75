"""Symmetric sparse storage, dense SPD solves and Jacobi-preconditioned CG."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp

from ._fileio import atomic_write_text

__all__ = [
    "NotSPDError",
    "SparseSymMatrix",
    "SolverReport",
    "dense_solve_spd",
    "cg_solve",
]


class NotSPDError(np.linalg.LinAlgError):
    pass


class SparseSymMatrix:
    """Symmetric matrix in CSR storage with both triangles present.

    Built from triplets; duplicates are summed and column indices are
    sorted within each row.
    """

    def __init__(self, csr):
        csr = sp.csr_array(csr)
        csr.sum_duplicates()
        csr.sort_indices()
        if csr.shape[0] != csr.shape[1]:
            raise ValueError(f"matrix must be square, got {csr.shape}")
        self.csr = csr

    @classmethod
    def from_triplets(cls, rows, cols, vals, n: int) -> "SparseSymMatrix":
        coo = sp.coo_array(
            (np.ravel(vals), (np.ravel(rows), np.ravel(cols))), shape=(n, n)
        )
        return cls(coo.tocsr())

    @property
    def dim(self) -> int:
        return self.csr.shape[0]

    @property
    def indptr(self) -> np.ndarray:
        return self.csr.indptr

    @property
    def indices(self) -> np.ndarray:
        return self.csr.indices

    @property
    def values(self) -> np.ndarray:
        return self.csr.data

    @property
    def nnz(self) -> int:
        return self.csr.nnz

    def __matmul__(self, x):
        return self.csr @ x

    def diagonal(self) -> np.ndarray:
        return self.csr.diagonal()

    def todense(self) -> np.ndarray:
        return self.csr.toarray()

    def submatrix(self, idx) -> "SparseSymMatrix":
        return SparseSymMatrix(self.csr[idx][:, idx])

    def symmetry_error(self) -> float:
        """``max|A - A^T| / max|A|``."""
        d = abs(self.csr - self.csr.T)
        scale = abs(self.csr).max() if self.nnz else 1.0
        return float(d.max() / scale) if d.nnz else 0.0

    def dump(self, path) -> None:
        """Write ``i j value`` lines, 1-based, row-major."""
        coo = self.csr.tocoo()
        lines = [
            f"{i + 1} {j + 1} {v!r}" for i, j, v in zip(coo.row.tolist(), coo.col.tolist(), coo.data.tolist())
        ]
        atomic_write_text(path, "\n".join(lines) + "\n")


@dataclass(frozen=True)
class SolverReport:
    iterations: int
    residual: float
    converged: bool


def dense_solve_spd(M, rhs) -> np.ndarray:
    """Cholesky solve of a small dense SPD system."""
    try:
        factor = scipy.linalg.cho_factor(np.asarray(M, dtype=float))
    except np.linalg.LinAlgError:
        raise NotSPDError("matrix is not SPD") from None
    return scipy.linalg.cho_solve(factor, rhs)


def cg_solve(A, b, tol: float = 1e-10, max_iter: int | None = None, x0=None):
    """Conjugate gradients with diagonal (Jacobi) preconditioning.

    Parameters
    ----------
    A : SparseSymMatrix or array_like
        Symmetric positive definite operator.
    b : ndarray
        Right-hand side.
    tol : float
        Target relative residual ``|b - A x| / |b|``.
    max_iter : int, optional
        Iteration cap, ``10 * dim`` by default.

    Returns
    -------
    x : ndarray
        The last iterate; partial if not converged.
    report : SolverReport
    """
    mat = A.csr if isinstance(A, SparseSymMatrix) else A
    b = np.asarray(b, dtype=float)
    n = b.shape[0]
    if max_iter is None:
        max_iter = 10 * n
    diag = mat.diagonal() if hasattr(mat, "diagonal") else np.diag(mat)
    if np.any(diag <= 0):
        raise NotSPDError("non-positive diagonal entry")
    inv_d = 1.0 / diag

    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolverReport(0, 0.0, True)
    it = 0
    while True:
        # (re)start from the true residual; the recurrence one can drift
        r = b - mat @ x
        res = np.linalg.norm(r) / bnorm
        if res <= tol or it >= max_iter:
            return x, SolverReport(it, float(res), bool(res <= tol))
        z = inv_d * r
        p = z.copy()
        rz = r @ z
        while it < max_iter:
            it += 1
            ap = mat @ p
            pap = p @ ap
            if pap <= 0:
                raise NotSPDError("operator is not positive definite (p^T A p <= 0)")
            alpha = rz / pap
            x += alpha * p
            r -= alpha * ap
            if np.linalg.norm(r) <= tol * bnorm:
                break
            z = inv_d * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
