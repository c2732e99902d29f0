"""Dense two-phase simplex for ``min c @ x  s.t.  A @ x = b, x >= 0``."""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from . import kernels

PIVOT_TOL = 1e-9


class SimplexError(ArithmeticError):
    """The LP is infeasible, unbounded or the iteration budget ran out."""


@dataclass
class SimplexResult:
    x: np.ndarray
    objective: float
    iterations: int


def _run(T: np.ndarray, basis: np.ndarray, n_enter: int, max_iter: int) -> int:
    status, iters = kernels.impl().pivot_loop(T, basis, n_enter, PIVOT_TOL, max_iter)
    if status == kernels.UNBOUNDED:
        raise SimplexError("LP is unbounded")
    if status == kernels.ITERATION_LIMIT:
        raise SimplexError(f"simplex did not converge in {max_iter} iterations")
    return iters


def solve(c: np.ndarray, A: np.ndarray, b: np.ndarray, max_iter: int = 50_000) -> SimplexResult:
    """Two-phase simplex with Bland's anti-cycling rule."""
    c = np.asarray(c, dtype=np.float64)
    A = np.array(A, dtype=np.float64)
    b = np.array(b, dtype=np.float64)
    m, N = A.shape
    if m == 0:
        if np.any(c < 0):
            raise SimplexError("LP is unbounded")
        return SimplexResult(np.zeros(N), 0.0, 0)
    flip = b < 0
    A[flip] *= -1
    b[flip] *= -1

    # phase 1: artificials in columns N..N+m-1
    T = np.zeros((m + 1, N + m + 1))
    T[:m, :N] = A
    T[:m, N:N + m] = np.eye(m)
    T[:m, -1] = b
    T[m, :N] = -A.sum(axis=0)
    T[m, -1] = -b.sum()
    basis = np.arange(N, N + m, dtype=np.int_)
    iters = _run(T, basis, N, max_iter)
    if -T[m, -1] > PIVOT_TOL * max(1.0, float(b.sum())):
        raise SimplexError("LP is infeasible")

    # drive zero-level artificials out of the basis; drop redundant rows
    keep = []
    for i in range(m):
        if basis[i] >= N:
            cand = np.flatnonzero(np.abs(T[i, :N]) > PIVOT_TOL)
            if cand.size == 0:
                continue
            kernels.impl().pivot(T, i, int(cand[0]))
            basis[i] = int(cand[0])
        keep.append(i)

    # phase 2 on the original costs
    T2 = np.zeros((len(keep) + 1, N + 1))
    T2[:-1, :N] = T[keep, :N]
    T2[:-1, -1] = T[keep, -1]
    basis = np.ascontiguousarray(basis[keep], dtype=np.int_)
    cb = c[basis]
    T2[-1, :N] = c - cb @ T2[:-1, :N]
    T2[-1, -1] = -cb @ T2[:-1, -1]
    iters += _run(T2, basis, N, max_iter)

    x = np.zeros(N)
    x[basis] = np.maximum(T2[:-1, -1], 0.0)
    return SimplexResult(x, float(c @ x), iters)
