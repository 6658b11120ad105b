"""Sparse symmetric operators and a preconditioned conjugate gradient solver.

The solver is written against raw CSR arrays so the whole iteration runs
inside one compiled kernel; summations are plain left-to-right loops, which
makes results reproducible run to run on the same build.  Jacobi scaling is
the only preconditioner: the system matrices here are lumped-mass dominated
and extremely well conditioned, so anything heavier is wasted motion.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import SolverError

try:
    from numba import njit
except ImportError:  # pragma: no cover - declared dependency, belt and braces
    def njit(*args, **kwargs):
        if args and callable(args[0]):
            return args[0]

        def wrap(func):
            return func

        return wrap


@dataclass(frozen=True)
class SolverOptions:
    """Tolerances of the conjugate gradient solve.

    ``rel_tolerance`` bounds the 2-norm of the true residual relative to the
    right-hand side.  ``max_iterations`` of None means 10 * sqrt(n), rounded
    up.
    """

    rel_tolerance: float = 1e-10
    max_iterations: int | None = None

    def __post_init__(self):
        if not self.rel_tolerance > 0.0:
            raise SolverError(
                f"rel_tolerance must be > 0, got {self.rel_tolerance!r}"
            )
        if self.max_iterations is not None and self.max_iterations < 1:
            raise SolverError(
                f"max_iterations must be >= 1, got {self.max_iterations!r}"
            )

    def iteration_cap(self, n: int) -> int:
        if self.max_iterations is not None:
            return self.max_iterations
        return int(math.ceil(10.0 * math.sqrt(n)))


@dataclass(frozen=True)
class SparseSymOperator:
    """Symmetric positive definite matrix in CSR arrays with cached diagonal."""

    indptr: np.ndarray
    indices: np.ndarray
    data: np.ndarray
    diag: np.ndarray

    @property
    def n(self) -> int:
        return self.indptr.shape[0] - 1

    @classmethod
    def from_scipy(cls, mat, check_symmetry: bool = True) -> "SparseSymOperator":
        mat = sp.csr_matrix(mat)
        if mat.shape[0] != mat.shape[1]:
            raise SolverError(f"operator must be square, got shape {mat.shape}")
        if check_symmetry:
            gap = abs(mat - mat.T)
            scale = float(np.max(np.abs(mat.data))) if mat.nnz else 0.0
            if gap.nnz and float(gap.max()) > 1e-12 * max(scale, 1.0):
                raise SolverError("operator is not symmetric")
        diag = mat.diagonal()
        if np.any(diag <= 0.0):
            raise SolverError("operator has nonpositive diagonal entries")
        indptr = np.asarray(mat.indptr, dtype=np.int64)
        indices = np.asarray(mat.indices, dtype=np.int64)
        data = np.asarray(mat.data, dtype=np.float64)
        for arr in (indptr, indices, data, diag):
            arr.setflags(write=False)
        return cls(indptr=indptr, indices=indices, data=data, diag=diag)

    def matvec(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        if x.shape != (self.n,):
            raise SolverError(
                f"matvec: vector has shape {x.shape}, expected ({self.n},)"
            )
        out = np.empty(self.n)
        _csr_matvec(self.indptr, self.indices, self.data, x, out)
        return out


@njit(cache=True)
def _csr_matvec(indptr, indices, data, x, out):
    n = indptr.shape[0] - 1
    for i in range(n):
        acc = 0.0
        for p in range(indptr[i], indptr[i + 1]):
            acc += data[p] * x[indices[p]]
        out[i] = acc


@njit(cache=True)
def _dot(a, b):
    acc = 0.0
    for i in range(a.shape[0]):
        acc += a[i] * b[i]
    return acc


@njit(cache=True)
def _pcg_kernel(indptr, indices, data, inv_diag, b, x, tol_abs, max_iter):
    """Jacobi preconditioned CG on the recurrence residual.

    Mutates ``x`` in place; returns (iterations, residual_norm_sq, status)
    with status 0 converged, 1 iteration budget exhausted, 2 breakdown.
    """
    n = b.shape[0]
    r = np.empty(n)
    z = np.empty(n)
    p = np.empty(n)
    ap = np.empty(n)
    _csr_matvec(indptr, indices, data, x, ap)
    for i in range(n):
        r[i] = b[i] - ap[i]
    rr = _dot(r, r)
    if rr <= tol_abs * tol_abs:
        return 0, rr, 0
    for i in range(n):
        z[i] = inv_diag[i] * r[i]
        p[i] = z[i]
    rz = _dot(r, z)
    iters = 0
    while iters < max_iter:
        _csr_matvec(indptr, indices, data, p, ap)
        pap = _dot(p, ap)
        if pap <= 0.0:
            return iters, rr, 2
        alpha = rz / pap
        for i in range(n):
            x[i] += alpha * p[i]
            r[i] -= alpha * ap[i]
        iters += 1
        rr = _dot(r, r)
        if rr <= tol_abs * tol_abs:
            return iters, rr, 0
        for i in range(n):
            z[i] = inv_diag[i] * r[i]
        rz_new = _dot(r, z)
        beta = rz_new / rz
        rz = rz_new
        for i in range(n):
            p[i] = z[i] + beta * p[i]
    return iters, rr, 1


def cg_solve(op: SparseSymOperator, b: np.ndarray, x0: np.ndarray | None = None,
             options: SolverOptions | None = None):
    """Solve op @ x = b by Jacobi preconditioned conjugate gradients.

    Parameters
    ----------
    op : SparseSymOperator
    b : numpy.ndarray
        Right-hand side.
    x0 : numpy.ndarray, optional
        Warm start; not mutated.  Defaults to zero.
    options : SolverOptions, optional

    Returns
    -------
    (numpy.ndarray, int)
        Solution and iteration count.  On return the true residual
        ``|op @ x - b|`` (recomputed, not the recurrence value) satisfies
        the relative tolerance; a zero right-hand side returns the zero
        vector immediately.

    Raises
    ------
    SolverError
        If the iteration cap is hit or the operator is not positive
        definite.
    """
    if options is None:
        options = SolverOptions()
    b = np.asarray(b, dtype=float)
    n = op.n
    if b.shape != (n,):
        raise SolverError(f"rhs has shape {b.shape}, expected ({n},)")
    if x0 is None:
        x = np.zeros(n)
    else:
        x0 = np.asarray(x0, dtype=float)
        if x0.shape != (n,):
            raise SolverError(f"x0 has shape {x0.shape}, expected ({n},)")
        x = x0.copy()
    b_norm = float(np.linalg.norm(b))
    if b_norm == 0.0:
        return np.zeros(n), 0
    tol_abs = options.rel_tolerance * b_norm
    cap = options.iteration_cap(n)
    inv_diag = 1.0 / op.diag
    total = 0
    while True:
        iters, rr, status = _pcg_kernel(
            op.indptr, op.indices, op.data, inv_diag, b, x, tol_abs,
            cap - total,
        )
        total += iters
        if status == 2:
            raise SolverError(
                "conjugate gradient breakdown: operator is not positive definite",
                iterations=total, residual=math.sqrt(rr),
            )
        if status == 0:
            # the recurrence converged; accept only the true residual
            true_res = float(np.linalg.norm(op.matvec(x) - b))
            if true_res <= tol_abs:
                return x, total
        if total >= cap:
            true_res = float(np.linalg.norm(op.matvec(x) - b))
            raise SolverError(
                f"conjugate gradient did not reach rel_tolerance="
                f"{options.rel_tolerance:g} within {cap} iterations "
                f"(relative residual {true_res / b_norm:.3e})",
                iterations=total, residual=true_res,
            )
        # otherwise: budget remains and either the recurrence drifted from
        # the true residual or the kernel ran out of its slice; restart from
        # the current iterate with a fresh residual
