"""Sparse matrix kernels, a matrix-free preconditioned conjugate-gradient
solver, and small dense Cholesky helpers.

The (w, b) block systems that dominate the ADMM iterations are never
materialized: they are applied as kappa*I plus low-rank products of the data
matrix, which keeps the per-iteration cost at two sparse mat-vecs even when
the feature dimension is 10^4-10^5.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg
import scipy.sparse as sp


class PcgBreakdownError(Exception):
    """Raised when CG meets a non-positive curvature direction (non-SPD operator)."""


class NotPositiveDefiniteError(Exception):
    """Raised when a Cholesky factorization fails (indefinite or rank-deficient)."""


def as_csr(matrix, shape=None):
    """Canonicalize any matrix-like input to float64 CSR with sorted, unique
    column indices per row."""
    m = sp.csr_matrix(matrix, shape=shape, dtype=float)
    m.sum_duplicates()
    m.sort_indices()
    return m


def spmv(M, x):
    """M @ x for CSR M; rows accumulate left to right, deterministically."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.shape[1],):
        raise ValueError(f"spmv: operand length {x.shape} != {M.shape[1]} columns")
    return M @ x


def spmv_t(M, x):
    """M.T @ x for CSR M, deterministic accumulation order."""
    x = np.asarray(x, dtype=float)
    if x.shape != (M.shape[0],):
        raise ValueError(f"spmv_t: operand length {x.shape} != {M.shape[0]} rows")
    return M.T @ x


class SymOperator:
    """A symmetric linear operator given by its dimension and application rule.

    ``dense_fn``, when provided, is a cheaper route to the materialized matrix
    than applying the operator to every unit vector.
    """

    def __init__(self, dim, matvec, dense_fn=None):
        self.dim = int(dim)
        self._matvec = matvec
        self._dense_fn = dense_fn

    def __call__(self, x):
        x = np.asarray(x, dtype=float)
        if x.shape != (self.dim,):
            raise ValueError(f"operator expects length {self.dim}, got {x.shape}")
        return self._matvec(x)

    def to_dense(self):
        if self._dense_fn is not None:
            return np.asarray(self._dense_fn(), dtype=float)
        cols = [self._matvec(col) for col in np.eye(self.dim)]
        return np.column_stack(cols)

    @classmethod
    def identity(cls, dim):
        return cls(dim, lambda x: x.copy(), dense_fn=lambda: np.eye(dim))

    @classmethod
    def diagonal(cls, diag):
        diag = np.asarray(diag, dtype=float)
        return cls(diag.size, lambda x: diag * x, dense_fn=lambda: np.diag(diag))

    @classmethod
    def from_matrix(cls, A):
        A = np.asarray(A, dtype=float)
        return cls(A.shape[0], lambda x: A @ x, dense_fn=lambda: A)


def jacobi_preconditioner(diag, floor=1e-30):
    """Inverse-diagonal preconditioner; entries are floored away from zero."""
    d = np.maximum(np.asarray(diag, dtype=float), floor)
    inv = 1.0 / d
    return SymOperator(d.size, lambda x: inv * x, dense_fn=lambda: np.diag(inv))


@dataclass
class PcgResult:
    x: np.ndarray
    converged: bool
    iterations: int
    residual: float  # final true residual norm ||A x - rhs||_2


def pcg_solve(A, rhs, precond=None, tol=1e-8, max_iter=200, x0=None):
    """Preconditioned conjugate gradients for SPD operators.

    Stops when the true residual satisfies ``||A x - rhs|| <= tol * ||rhs||``;
    otherwise returns the best iterate seen with ``converged=False``.
    Raises :class:`PcgBreakdownError` on a non-positive curvature direction.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    rhs = np.asarray(rhs, dtype=float)
    if rhs.shape != (A.dim,):
        raise ValueError("rhs length does not match operator dimension")
    if precond is None:
        precond = SymOperator.identity(A.dim)

    bnorm = np.linalg.norm(rhs)
    if bnorm == 0.0:
        return PcgResult(np.zeros(A.dim), True, 0, 0.0)
    target = tol * bnorm

    x = np.zeros(A.dim) if x0 is None else np.array(x0, dtype=float)
    r = rhs - A(x)
    rnorm = np.linalg.norm(r)
    best_x, best_rnorm = x.copy(), rnorm
    z = precond(r)
    p = z.copy()
    rz = float(r @ z)
    iterations = 0

    while iterations < max_iter:
        if rnorm <= target:
            # recursive residual can drift; confirm against the true residual
            true_r = rhs - A(x)
            rnorm = np.linalg.norm(true_r)
            if rnorm <= target:
                return PcgResult(x, True, iterations, float(rnorm))
            r = true_r
            z = precond(r)
            p = z.copy()
            rz = float(r @ z)
        Ap = A(p)
        pAp = float(p @ Ap)
        if pAp <= 0.0:
            raise PcgBreakdownError(
                f"non-positive curvature (p'Ap = {pAp:g}) at iteration {iterations}"
            )
        alpha = rz / pAp
        x = x + alpha * p
        r = r - alpha * Ap
        iterations += 1
        rnorm = np.linalg.norm(r)
        if rnorm < best_rnorm:
            best_x, best_rnorm = x.copy(), rnorm
        z = precond(r)
        rz_new = float(r @ z)
        beta = rz_new / rz
        p = z + beta * p
        rz = rz_new

    true_r = rhs - A(x)
    rnorm = np.linalg.norm(true_r)
    if rnorm <= target:
        return PcgResult(x, True, iterations, float(rnorm))
    if best_rnorm < rnorm:
        x = best_x
        rnorm = np.linalg.norm(rhs - A(x))
    return PcgResult(x, False, iterations, float(rnorm))


class CholeskyFactor:
    """Cached dense Cholesky factor of a small SPD matrix."""

    def __init__(self, A):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError("matrix must be square")
        if not np.allclose(A, A.T, rtol=0.0, atol=1e-12 * max(1.0, np.abs(A).max())):
            raise ValueError("matrix must be symmetric")
        try:
            self._factor = scipy.linalg.cho_factor(A, lower=True)
        except scipy.linalg.LinAlgError as exc:
            raise NotPositiveDefiniteError(str(exc)) from exc
        self.order = A.shape[0]

    def solve(self, rhs):
        rhs = np.asarray(rhs, dtype=float)
        if rhs.shape[0] != self.order:
            raise ValueError("rhs length does not match matrix order")
        return scipy.linalg.cho_solve(self._factor, rhs)


def cholesky_solve(A, rhs):
    """One-shot SPD solve A x = rhs via Cholesky factorization."""
    return CholeskyFactor(A).solve(rhs)


def wb_block_system(X, mu1, kappa1, kappa2):
    """Operator and Jacobi diagonal for the stacked (w, b) normal system

        [[kappa1*I + mu1*X'X, mu1*X'e], [mu1*e'X, mu1*N + kappa2]].

    Applications cost two sparse mat-vecs; nothing is materialized.
    """
    n_samples, n_features = X.shape
    col_sums = np.asarray(X.sum(axis=0)).ravel()
    col_sq = np.asarray(X.multiply(X).sum(axis=0)).ravel()

    def apply(v):
        w, beta = v[:n_features], v[n_features]
        z = X @ w + beta  # X w + beta * e
        out = np.empty(n_features + 1)
        out[:n_features] = kappa1 * w + mu1 * (X.T @ z)
        out[n_features] = mu1 * z.sum() + kappa2 * beta
        return out

    def dense():
        Xd = X.toarray()
        top = kappa1 * np.eye(n_features) + mu1 * (Xd.T @ Xd)
        M = np.zeros((n_features + 1, n_features + 1))
        M[:n_features, :n_features] = top
        M[:n_features, n_features] = mu1 * col_sums
        M[n_features, :n_features] = mu1 * col_sums
        M[n_features, n_features] = mu1 * n_samples + kappa2
        return M

    diag = np.empty(n_features + 1)
    diag[:n_features] = kappa1 + mu1 * col_sq
    diag[n_features] = mu1 * n_samples + kappa2
    op = SymOperator(n_features + 1, apply, dense_fn=dense)
    return op, jacobi_preconditioner(diag)
