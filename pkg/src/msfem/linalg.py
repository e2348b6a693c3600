"""Sparse patterns, assembly scatter, and Jacobi-preconditioned Krylov solvers.

Matrices are ``scipy.sparse.csr_matrix``; every matrix assembled on a given
:class:`Pattern` shares its ``indptr``/``indices`` so operators can be summed
through their data arrays.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

log = logging.getLogger(__name__)


class Pattern:
    """Symbolic CSR pattern for cell-local blocks scattered by ``cell_dofs``.

    ``free`` (optional) restricts rows and columns to a subset of dofs, which
    eliminates constrained dofs symmetrically at scatter time.
    """

    def __init__(self, cell_dofs: np.ndarray, n: int, free: np.ndarray | None = None):
        nc, nloc = cell_dofs.shape
        if free is None:
            renum = np.arange(n)
            size = n
        else:
            renum = np.full(n, -1)
            renum[free] = np.arange(len(free))
            size = len(free)
        local = renum[cell_dofs]
        rows = np.broadcast_to(local[:, :, None], (nc, nloc, nloc)).reshape(-1)
        cols = np.broadcast_to(local[:, None, :], (nc, nloc, nloc)).reshape(-1)
        keep = (rows >= 0) & (cols >= 0)
        keys = rows.astype(np.int64) * size + cols
        keys[~keep] = -1
        uniq, inv = np.unique(keys, return_inverse=True)
        if uniq.size and uniq[0] == -1:
            uniq = uniq[1:]
            inv = inv - 1  # dropped entries land at -1 ...
            inv[inv < 0] = uniq.size  # ... then in a discard slot past the end
        self.n = size
        self.nnz = uniq.size
        self.scatter = inv.reshape(nc, nloc, nloc).astype(np.int64)
        self.indices = (uniq % size).astype(np.int32)
        counts = np.bincount(uniq // size, minlength=size)
        self.indptr = np.concatenate([[0], np.cumsum(counts)]).astype(np.int32)
        self.renum = renum
        self.local = local

    def matrix(self, data: np.ndarray) -> sp.csr_matrix:
        return sp.csr_matrix((data, self.indices.copy(), self.indptr.copy()), shape=(self.n, self.n))

    def scatter_data(self, local: np.ndarray, index: np.ndarray | None = None) -> np.ndarray:
        """Sum cell-local values into CSR data order."""
        idx = (self.scatter if index is None else index).reshape(-1)
        vals = local.reshape(-1)
        if np.iscomplexobj(vals):
            return (np.bincount(idx, weights=vals.real, minlength=self.nnz + 1)[: self.nnz]
                    + 1j * np.bincount(idx, weights=vals.imag, minlength=self.nnz + 1)[: self.nnz])
        return np.bincount(idx, weights=vals, minlength=self.nnz + 1)[: self.nnz]

    def assemble(self, local: np.ndarray, index: np.ndarray | None = None) -> sp.csr_matrix:
        return self.matrix(self.scatter_data(local, index))

    def scatter_vector(self, local: np.ndarray) -> np.ndarray:
        """Sum cell-local vectors (nc, nloc) into a global vector on this pattern."""
        idx = self.local.reshape(-1)
        vals = local.reshape(-1)
        keep = idx >= 0
        if np.iscomplexobj(vals):
            return (np.bincount(idx[keep], weights=vals.real[keep], minlength=self.n)
                    + 1j * np.bincount(idx[keep], weights=vals.imag[keep], minlength=self.n))
        return np.bincount(idx[keep], weights=vals[keep], minlength=self.n)


@dataclass
class SolveReport:
    method: str
    iterations: int
    residual: float
    converged: bool


class SolverError(RuntimeError):
    def __init__(self, message: str, report: SolveReport):
        super().__init__(f"{message}: {report}")
        self.report = report


def relative_residual(A, x, b) -> float:
    bn = np.linalg.norm(b)
    r = np.linalg.norm(b - A @ x)
    return r / bn if bn > 0 else r


def _jacobi(A) -> np.ndarray:
    d = A.diagonal()
    if np.any(d == 0):
        raise ValueError("Jacobi preconditioner needs a nonzero diagonal")
    return 1.0 / d


def solve_spd(A, b, x0=None, rtol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned conjugate gradients for real SPD systems."""
    n = A.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    b = np.asarray(b, dtype=float)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n), SolveReport("pcg", 0, 0.0, True)
    dinv = _jacobi(A)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    r = b - A @ x
    it = 0
    while True:
        z = dinv * r
        p = z.copy()
        rz = r @ z
        while np.linalg.norm(r) > rtol * bnorm and it < maxiter:
            Ap = A @ p
            alpha = rz / (p @ Ap)
            x += alpha * p
            r -= alpha * Ap
            z = dinv * r
            rz_new = r @ z
            p = z + (rz_new / rz) * p
            rz = rz_new
            it += 1
        # The recursive residual can drift from the true one; restart on it.
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res <= rtol or it >= maxiter:
            break
    report = SolveReport("pcg", it, res, res <= rtol)
    if not report.converged:
        raise SolverError("conjugate gradients did not converge", report)
    return x, report


def solve_complex(A, b, x0=None, rtol: float = 1e-10, maxiter: int | None = None):
    """Jacobi-preconditioned BiCGSTAB for general complex systems."""
    n = A.shape[0]
    maxiter = 10 * n if maxiter is None else maxiter
    b = np.asarray(b, dtype=complex)
    bnorm = np.linalg.norm(b)
    if bnorm == 0.0:
        return np.zeros(n, dtype=complex), SolveReport("bicgstab", 0, 0.0, True)
    dinv = _jacobi(A)
    x = np.zeros(n, dtype=complex) if x0 is None else np.array(x0, dtype=complex)
    it = 0
    res = np.inf
    while it < maxiter:
        r = b - A @ x
        res = np.linalg.norm(r) / bnorm
        if res <= rtol:
            break
        rhat = r.copy()
        rho = alpha = omega = 1.0 + 0j
        v = np.zeros(n, dtype=complex)
        p = np.zeros(n, dtype=complex)
        while it < maxiter:
            rho_new = np.vdot(rhat, r)
            if rho_new == 0:
                break
            beta = (rho_new / rho) * (alpha / omega)
            rho = rho_new
            p = r + beta * (p - omega * v)
            phat = dinv * p
            v = A @ phat
            alpha = rho / np.vdot(rhat, v)
            s = r - alpha * v
            it += 1
            if np.linalg.norm(s) <= rtol * bnorm:
                x += alpha * phat
                break
            shat = dinv * s
            t = A @ shat
            tt = np.vdot(t, t)
            if tt == 0:
                x += alpha * phat
                break
            omega = np.vdot(t, s) / tt
            x += alpha * phat + omega * shat
            r = s - omega * t
            if np.linalg.norm(r) <= rtol * bnorm or omega == 0:
                break
    res = relative_residual(A, x, b)
    report = SolveReport("bicgstab", it, res, res <= rtol)
    if not report.converged:
        raise SolverError("BiCGSTAB did not converge", report)
    return x, report


def solve_dense(A, b):
    """Dense LU solve, the oracle for the Krylov paths (n <= 2000)."""
    n = A.shape[0]
    if n > 2000:
        raise ValueError(f"dense fallback limited to n <= 2000, got {n}")
    dense = A.toarray() if sp.issparse(A) else np.asarray(A)
    x = np.linalg.solve(dense, b)
    return x, SolveReport("dense", 1, relative_residual(A, x, b), True)


def solve_direct(A, b):
    """Sparse LU (SuperLU) for moderate systems."""
    from scipy.sparse.linalg import splu

    b = np.asarray(b)
    x = splu(sp.csc_matrix(A, dtype=np.result_type(A.dtype, b.dtype))).solve(b.astype(np.result_type(A.dtype, b.dtype)))
    return x, SolveReport("splu", 1, relative_residual(A, x, b), True)


def write_matrix_market(path, A) -> None:
    """Dump a matrix in MatrixMarket coordinate format (debugging aid)."""
    from scipy.io import mmwrite

    mmwrite(str(path), sp.coo_matrix(A))
