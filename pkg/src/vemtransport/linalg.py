"""Sparse assembly with a frozen pattern, and direct/iterative solves."""

import time

import numpy as np
import scipy.sparse as sp
from scipy.sparse.linalg import LinearOperator, gmres, spilu, splu


class LinalgError(RuntimeError):
    pass


class StructuralSingularityError(LinalgError):
    """The matrix pattern itself admits no factorization (empty row/column)."""


class NumericBreakdownError(LinalgError):
    """Factorization or iteration broke down on the numeric values."""


class PatternMatrix:
    """CSR matrix whose sparsity pattern is fixed up front.

    Scatter targets outside the symbolic pattern are assembly bugs and
    raise immediately.
    """

    def __init__(self, csr):
        self.csr = csr

    @classmethod
    def from_dof_lists(cls, n_rows, n_cols, dof_lists):
        rows = []
        cols = []
        for dofs in dof_lists:
            dofs = np.asarray(dofs, dtype=int)
            r, c = np.meshgrid(dofs, dofs, indexing="ij")
            rows.append(r.ravel())
            cols.append(c.ravel())
        rows = np.concatenate(rows) if rows else np.zeros(0, dtype=int)
        cols = np.concatenate(cols) if cols else np.zeros(0, dtype=int)
        data = np.zeros(len(rows))
        csr = sp.coo_matrix((data, (rows, cols)), shape=(n_rows, n_cols)).tocsr()
        csr.sum_duplicates()
        csr.sort_indices()
        csr.data[:] = 0.0
        return cls(csr)

    def scatter_add(self, dofs, block):
        """Accumulate a dense local block at global indices `dofs`."""
        block = np.atleast_2d(block)
        if block.size == 0:
            return
        dofs = np.asarray(dofs, dtype=int)
        indptr, indices, data = self.csr.indptr, self.csr.indices, self.csr.data
        order = np.argsort(dofs, kind="stable")
        sorted_cols = dofs[order]
        for a, i in enumerate(dofs):
            seg = slice(indptr[i], indptr[i + 1])
            pos = np.searchsorted(indices[seg], sorted_cols)
            hi = indptr[i + 1] - indptr[i]
            if np.any(pos >= hi) or np.any(indices[seg][pos] != sorted_cols):
                raise LinalgError(f"dof pair outside the assembled pattern in row {i}")
            data[indptr[i] + pos] += block[a, order]

    def reset(self):
        self.csr.data[:] = 0.0

    def matrix(self):
        return self.csr


class SolveReport:
    """Outcome of one linear solve."""

    def __init__(self, method, residual, reused_factorization, seconds):
        self.method = method
        self.residual = residual
        self.reused_factorization = reused_factorization
        self.seconds = seconds

    def __repr__(self):
        return (
            f"SolveReport(method={self.method!r}, residual={self.residual:.3e}, "
            f"reused={self.reused_factorization}, seconds={self.seconds:.3f})"
        )


def _check_structure(A):
    csr = A.tocsr()
    nonzero_rows = np.zeros(A.shape[0], dtype=bool)
    nonzero_cols = np.zeros(A.shape[1], dtype=bool)
    mask = csr.data != 0.0
    rows = np.repeat(np.arange(A.shape[0]), np.diff(csr.indptr))
    nonzero_rows[rows[mask]] = True
    nonzero_cols[csr.indices[mask]] = True
    if not np.all(nonzero_rows):
        raise StructuralSingularityError("matrix has a row with no nonzero entries")
    if not np.all(nonzero_cols):
        raise StructuralSingularityError("matrix has a column with no nonzero entries")
    return A.tocsc()


class Factorization:
    """Reusable sparse LU factorization."""

    def __init__(self, A):
        csc = _check_structure(A)
        try:
            self._lu = splu(csc)
        except RuntimeError as exc:
            raise NumericBreakdownError(f"sparse LU failed: {exc}") from exc
        self.shape = A.shape
        self._A = csc

    def solve(self, b):
        x = self._lu.solve(np.asarray(b, dtype=float))
        if not np.all(np.isfinite(x)):
            raise NumericBreakdownError("factorization produced non-finite solution")
        return x

    def residual(self, x, b):
        r = np.linalg.norm(self._A @ x - b)
        scale = np.linalg.norm(b)
        return r / scale if scale > 0 else r


def solve(A, b, method="direct", tol=1e-10, factorization=None):
    """Solve A x = b, returning (x, SolveReport).

    method "direct" uses sparse LU (residual must reach tol); "iterative"
    uses GMRES with an incomplete-LU preconditioner. A prebuilt
    Factorization may be passed for reuse across right-hand sides.
    """
    b = np.asarray(b, dtype=float)
    t0 = time.perf_counter()
    if method == "direct":
        fact = factorization
        reused = fact is not None
        if fact is None:
            fact = Factorization(A)
        x = fact.solve(b)
        res = fact.residual(x, b)
        if res > tol:
            raise NumericBreakdownError(f"direct solve residual {res:.2e} exceeds {tol:.2e}")
        return x, SolveReport("direct", res, reused, time.perf_counter() - t0)
    if method == "iterative":
        csc = _check_structure(A)
        try:
            ilu = spilu(csc, drop_tol=1e-6, fill_factor=20)
        except RuntimeError as exc:
            raise NumericBreakdownError(f"ILU failed: {exc}") from exc
        M = LinearOperator(A.shape, ilu.solve)
        x, info = gmres(csc, b, rtol=tol, atol=0.0, M=M, maxiter=2000)
        if info != 0:
            raise NumericBreakdownError(f"GMRES failed to converge (info={info})")
        scale = np.linalg.norm(b)
        res = np.linalg.norm(csc @ x - b) / (scale if scale > 0 else 1.0)
        return x, SolveReport("iterative", res, False, time.perf_counter() - t0)
    raise ValueError(f"unknown solve method {method!r}")


def export_matrix_market(A, path):
    """Debug export of a sparse matrix in Matrix Market format."""
    from scipy.io import mmwrite

    mmwrite(str(path), A.tocoo())
