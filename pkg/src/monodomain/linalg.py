"""Jacobi-preconditioned conjugate gradients on CSR matrices.

The per-step linear system (alpha/dt * M + K) is symmetric positive
definite and mildly conditioned, so CG with a diagonal preconditioner
converges in a few dozen iterations.  Matrix-vector products parallelize
over rows (each row reduced serially, so results do not depend on the
thread count); the global reductions are kept serial for the same
reason.
"""

import numpy as np
from numba import njit, prange

from .errors import NonFiniteSolution, SolverDivergence


@njit(parallel=True, cache=True)
def csr_matvec(indptr, indices, data, x, out):
    for row in prange(indptr.shape[0] - 1):
        acc = 0.0
        for k in range(indptr[row], indptr[row + 1]):
            acc += data[k] * x[indices[k]]
        out[row] = acc


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _cg_kernel(indptr, indices, data, inv_diag, b, x, tol, max_iter):
    n = b.shape[0]
    r = np.empty(n)
    q = np.empty(n)
    csr_matvec(indptr, indices, data, x, q)
    for i in range(n):
        r[i] = b[i] - q[i]
    b_norm = np.sqrt(_dot(b, b))
    if b_norm == 0.0:
        for i in range(n):
            x[i] = 0.0
        return 0, 0.0
    res = np.sqrt(_dot(r, r))
    if res <= tol * b_norm:
        return 0, res / b_norm
    z = np.empty(n)
    p = np.empty(n)
    for i in range(n):
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]
    rz = _dot(r, z)
    for it in range(1, max_iter + 1):
        csr_matvec(indptr, indices, data, p, q)
        pq = _dot(p, q)
        alpha = rz / pq
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * q[i]
        res = np.sqrt(_dot(r, r))
        if res <= tol * b_norm:
            return it, res / b_norm
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    return -max_iter, res / b_norm


class JacobiCg:
    """CG solver bound to one CSR matrix with its inverse diagonal."""

    def __init__(self, matrix, tolerance=1e-10, max_iterations=2000):
        self.matrix = matrix.tocsr()
        self.tolerance = float(tolerance)
        self.max_iterations = int(max_iterations)
        diag = self.matrix.diagonal()
        if (diag <= 0).any():
            raise ValueError("system matrix has non-positive diagonal")
        self.inv_diag = 1.0 / diag
        self._indptr = self.matrix.indptr.astype(np.int64)

    def solve(self, rhs, initial_guess=None):
        """Solve to relative residual <= tolerance; returns (x, iters, res)."""
        if initial_guess is None:
            x = np.zeros_like(rhs)
        else:
            x = initial_guess.copy()
        iters, rel = _cg_kernel(
            self._indptr, self.matrix.indices, self.matrix.data,
            self.inv_diag, rhs, x, self.tolerance, self.max_iterations,
        )
        if iters < 0:
            raise SolverDivergence(-iters, rel)
        if not np.isfinite(x).all():
            raise NonFiniteSolution(
                "linear solve produced non-finite entries"
            )
        return x, iters, rel


def solve_cg(matrix, rhs, tolerance=1e-10, max_iterations=2000,
             initial_guess=None):
    """One-shot CG convenience wrapper around :class:`JacobiCg`."""
    return JacobiCg(matrix, tolerance, max_iterations).solve(
        rhs, initial_guess
    )
