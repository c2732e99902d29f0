"""Pure numpy versions of the compiled kernels in ``_kernels.pyx``.

Both implementations follow the same rules operation for operation, so they
return identical results; the compiled one is simply faster.

Simplex tableau layout: rows ``0..m-1`` hold ``[A | b]``, row ``m`` holds the
reduced costs with ``-z`` in the last column.
"""
from __future__ import annotations

import numpy as np

OPTIMAL, UNBOUNDED, ITERATION_LIMIT = 0, 1, 2


def pivot(T: np.ndarray, r: int, j: int) -> None:
    T[r] /= T[r, j]
    T[r, j] = 1.0
    col = T[:, j].copy()
    col[r] = 0.0
    nz = np.flatnonzero(col)
    if nz.size:
        T[nz] -= col[nz, None] * T[r]
        T[nz, j] = 0.0


def pivot_loop(T: np.ndarray, basis: np.ndarray, n_enter: int, tol: float, max_iter: int) -> tuple[int, int]:
    """Bland's-rule simplex iterations in place; returns (status, iterations)."""
    m = T.shape[0] - 1
    for it in range(max_iter):
        neg = np.flatnonzero(T[m, :n_enter] < -tol)
        if neg.size == 0:
            return OPTIMAL, it
        j = int(neg[0])
        r = -1
        best = 0.0
        for i in np.flatnonzero(T[:m, j] > tol):
            ratio = T[i, -1] / T[i, j]
            if r < 0 or ratio < best - 1e-12 or (ratio <= best + 1e-12 and basis[i] < basis[r]):
                r, best = int(i), ratio
        if r < 0:
            return UNBOUNDED, it
        pivot(T, r, j)
        basis[r] = j
    return ITERATION_LIMIT, max_iter


def iou_to(starts: np.ndarray, ends: np.ndarray, s: float, e: float) -> np.ndarray:
    """Vectorized ``core.temporal_iou`` of every interval against [s, e]."""
    inter = np.minimum(ends, e) - np.maximum(starts, s)
    union = (ends - starts) + (e - s) - inter
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, inter / np.where(union > 0, union, 1.0), (starts == s) & (ends == e))
    return np.where(inter < 0, 0.0, iou)


def greedy_groups(starts: np.ndarray, ends: np.ndarray, threshold: float) -> np.ndarray:
    """Group id per interval, intervals given in rank order.

    Repeatedly the first ungrouped interval becomes an anchor and claims every
    ungrouped interval whose IoU with it exceeds ``threshold``; the group id is
    the anchor's position.
    """
    n = starts.shape[0]
    group = np.full(n, -1, dtype=np.int_)
    for a in range(n):
        if group[a] >= 0:
            continue
        rest = np.flatnonzero(group[a:] < 0) + a
        hit = rest[iou_to(starts[rest], ends[rest], starts[a], ends[a]) > threshold]
        group[hit] = a
        group[a] = a
    return group


def _runs_above(col: np.ndarray, theta: float) -> list[tuple[int, int]]:
    mask = np.concatenate(([False], col > theta, [False]))
    edges = np.flatnonzero(mask[1:] != mask[:-1])
    return [(int(a), int(b) - 1) for a, b in zip(edges[::2], edges[1::2])]


def class_runs(col: np.ndarray, thresholds: np.ndarray, alpha: float):
    """Distinct runs above each threshold (first-appearance order) and their contrast scores.

    Returns ``(firsts, lasts, scores)``: runs are closed [first, last]; the score
    is the inner mean minus the mean over flanking windows of
    max(1, round(alpha * (last - first))) snippets, clipped to the column.
    """
    runs: dict[tuple[int, int], None] = {}
    for theta in thresholds:
        runs.update(dict.fromkeys(_runs_above(col, theta)))
    if not runs:
        empty = np.zeros(0, dtype=np.int_)
        return empty, empty.copy(), np.zeros(0)
    firsts, lasts = np.array(list(runs), dtype=np.int_).T
    l = col.shape[0]
    csum = np.concatenate(([0.0], np.cumsum(col)))
    L = np.maximum(1, np.floor(alpha * (lasts - firsts) + 0.5).astype(np.int_))
    inner = (csum[lasts + 1] - csum[firsts]) / (lasts - firsts + 1)
    lo = np.maximum(0, firsts - L)
    hi = np.minimum(l, lasts + 1 + L)
    n_out = (firsts - lo) + (hi - lasts - 1)
    out_sum = (csum[firsts] - csum[lo]) + (csum[hi] - csum[lasts + 1])
    return firsts, lasts, inner - np.where(n_out > 0, out_sum / np.maximum(n_out, 1), 0.0)
