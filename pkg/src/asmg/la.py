"""Thin sparse/dense linear-algebra layer.

Sparse storage is scipy CSR throughout; this module pins the conventions
the rest of the package relies on (finalized index structure, symmetric
triple products, dense factor objects that report the failing pivot).
"""

from dataclasses import dataclass

import numpy as np
import scipy.io
import scipy.linalg
import scipy.sparse as sp
from scipy.linalg import lapack

from .errors import DimensionError, FactorizationError, InternalError


def finalize(A: sp.spmatrix) -> sp.csr_matrix:
    """Canonical CSR: sorted unique column indices, no stored zeros."""
    A = A.tocsr()
    A.sum_duplicates()
    A.eliminate_zeros()
    A.sort_indices()
    return A


def spmv(A: sp.spmatrix, x: np.ndarray) -> np.ndarray:
    if A.shape[1] != x.shape[0]:
        raise DimensionError(f"matvec shapes {A.shape} @ {x.shape}")
    return A @ x


def transpose(A: sp.spmatrix) -> sp.csr_matrix:
    return finalize(A.T)


def triple_product(Rt: sp.spmatrix, A: sp.spmatrix, R: sp.spmatrix) -> sp.csr_matrix:
    """Rt @ A @ R, symmetrized exactly when the result should be symmetric.

    When Rt is the transpose of R and A is symmetric the product is
    symmetric in exact arithmetic; averaging with the transpose restores
    that property bit-exactly without changing the exact value.
    """
    if Rt.shape[1] != A.shape[0] or A.shape[1] != R.shape[0]:
        raise DimensionError(
            f"triple product shapes {Rt.shape} x {A.shape} x {R.shape}"
        )
    C = finalize(Rt.tocsr() @ A.tocsr() @ R.tocsr())
    if Rt.shape[0] == R.shape[1] and _is_structural_transpose(Rt, R) and is_symmetric(A):
        C = finalize(0.5 * (C + C.T))
    return C


def _is_structural_transpose(Rt: sp.spmatrix, R: sp.spmatrix) -> bool:
    Rt = Rt.tocsr()
    Rc = R.T.tocsr()
    Rt.sort_indices()
    Rc.sort_indices()
    if Rt.nnz != Rc.nnz:
        return False
    return (
        np.array_equal(Rt.indptr, Rc.indptr)
        and np.array_equal(Rt.indices, Rc.indices)
        and np.array_equal(Rt.data, Rc.data)
    )


def is_symmetric(A: sp.spmatrix, tol: float = 1e-13) -> bool:
    if A.shape[0] != A.shape[1]:
        return False
    d = (A - A.T).tocoo()
    if d.nnz == 0:
        return True
    scale = max(np.abs(A.data).max() if A.nnz else 0.0, 1.0)
    return np.abs(d.data).max() <= tol * scale


def check_symmetry(A: sp.spmatrix, tol: float = 1e-13, what: str = "matrix"):
    if not is_symmetric(A, tol):
        raise InternalError(f"{what} lost symmetry beyond {tol}")


def extract(A: sp.spmatrix, row_set: np.ndarray, col_set: np.ndarray) -> sp.csr_matrix:
    """Submatrix A[row_set, :][:, col_set] with the given index order."""
    A = A.tocsr()
    row_set = np.asarray(row_set, dtype=np.int64)
    col_set = np.asarray(col_set, dtype=np.int64)
    if row_set.size and (row_set.min() < 0 or row_set.max() >= A.shape[0]):
        raise DimensionError("row set out of range")
    if col_set.size and (col_set.min() < 0 or col_set.max() >= A.shape[1]):
        raise DimensionError("column set out of range")
    return finalize(A[row_set, :][:, col_set])


def permute_sym(A: sp.spmatrix, p: np.ndarray) -> sp.csr_matrix:
    """Symmetric permutation A[p, :][:, p]."""
    p = np.asarray(p, dtype=np.int64)
    if A.shape[0] != A.shape[1] or p.shape[0] != A.shape[0]:
        raise DimensionError("permutation length must match square matrix")
    A = A.tocsr()
    return finalize(A[p, :][:, p])


@dataclass
class DenseFactor:
    kind: str  # "chol" or "lu"
    data: tuple
    n: int


def dense_cholesky(A: np.ndarray) -> DenseFactor:
    """Lower Cholesky factor of a dense SPD matrix, no pivoting."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected square matrix, got {A.shape}")
    c, info = lapack.dpotrf(A, lower=1)
    if info > 0:
        raise FactorizationError(
            f"matrix not positive definite at pivot {info - 1}", pivot=info - 1
        )
    if info < 0:
        raise InternalError(f"dpotrf illegal argument {-info}")
    return DenseFactor(kind="chol", data=(c, A), n=A.shape[0])


def dense_lu(A: np.ndarray) -> DenseFactor:
    """LU factorization with partial pivoting."""
    A = np.ascontiguousarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise DimensionError(f"expected square matrix, got {A.shape}")
    lu, piv, info = lapack.dgetrf(A)
    if info > 0:
        raise FactorizationError(
            f"matrix singular: zero pivot at {info - 1}", pivot=info - 1
        )
    if info < 0:
        raise InternalError(f"dgetrf illegal argument {-info}")
    return DenseFactor(kind="lu", data=(lu, piv, A), n=A.shape[0])


def _backsolve(factor: DenseFactor, b: np.ndarray) -> np.ndarray:
    if factor.kind == "chol":
        return scipy.linalg.cho_solve((factor.data[0], True), b)
    if factor.kind == "lu":
        return scipy.linalg.lu_solve(factor.data[:2], b)
    raise InternalError(f"unknown factor kind {factor.kind!r}")


def solve(factor: DenseFactor, b: np.ndarray) -> np.ndarray:
    b = np.asarray(b, dtype=np.float64)
    if b.shape[0] != factor.n:
        raise DimensionError(f"rhs length {b.shape[0]} != {factor.n}")
    x = _backsolve(factor, b)
    # one refinement step; high-contrast blocks reach condition numbers
    # around kappa/h^2 where the plain backsolve loses ~7 digits
    A = factor.data[-1]
    return x + _backsolve(factor, b - A @ x)


def write_matrix_market(path, A: sp.spmatrix):
    """Coordinate-format Matrix Market dump for offline inspection."""
    scipy.io.mmwrite(str(path), A.tocoo())
