"""Pseudo labels from fused action instances via l1 minimization.

Each instance j becomes one linear constraint ``W[:, j] @ g == q_j`` where the
column weights the instance's inner snippets positively and its flanking margins
negatively. The nonnegative label ``g`` with the smallest sum that satisfies all
constraints is found by simplex, then snippets that share a membership pattern
are averaged so labels are flat inside every overlap region.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import simplex
from .core import ActionInstance, inner_snippets, outer_length, outer_windows

log = logging.getLogger(__name__)

SLACK_PENALTY = 1e4
SLACK_TOL = 1e-9

INNER, OUTER, NONE = 1, -1, 0


class WMode(str, Enum):
    NORMALIZED = "normalized"
    LITERAL = "literal"


class LpStatus(str, Enum):
    OPTIMAL = "optimal"
    RELAXED = "relaxed"
    DEGENERATE_EMPTY = "degenerate_empty"


@dataclass(frozen=True)
class ConstraintSystem:
    """``W`` is (l, n); ``memberships`` is (l, n) with entries INNER/OUTER/NONE."""

    W: np.ndarray
    q: np.ndarray
    memberships: np.ndarray
    alpha: float
    mode: WMode

    @property
    def num_snippets(self) -> int:
        return self.W.shape[0]

    @property
    def num_instances(self) -> int:
        return self.W.shape[1]


@dataclass(frozen=True)
class LpSolution:
    g: np.ndarray
    objective: float
    slack_used: np.ndarray
    status: LpStatus


@dataclass(frozen=True)
class PseudoLabel:
    G: np.ndarray

    def __post_init__(self) -> None:
        G = np.array(self.G, dtype=np.float64)
        if G.ndim != 2:
            raise ValueError(f"pseudo label must be l x K, got shape {G.shape}")
        if not np.all(np.isfinite(G)) or np.any(G < 0):
            raise ValueError("pseudo label entries must be finite and >= 0")
        G.setflags(write=False)
        object.__setattr__(self, "G", G)


def build_constraints(
    instances: Sequence[ActionInstance],
    num_snippets: int,
    alpha: float = 0.25,
    mode: WMode | str = WMode.NORMALIZED,
) -> ConstraintSystem:
    mode = WMode(mode)
    if len({a.class_id for a in instances}) > 1:
        raise ValueError("build_constraints expects instances of a single class")
    n = len(instances)
    W = np.zeros((num_snippets, n))
    member = np.zeros((num_snippets, n), dtype=np.int8)
    q = np.empty(n)
    for j, inst in enumerate(instances):
        inner = inner_snippets(inst.interval, num_snippets)
        if len(inner) == 0:
            raise ValueError(f"instance {inst} has no inner snippets within [0, {num_snippets - 1}]")
        left, right = outer_windows(inner, outer_length(inst.interval, alpha), num_snippets)
        n_outer = len(left) + len(right)
        if mode is WMode.LITERAL:
            w_in, w_out = 1.0, -1.0
        else:
            w_in = 1.0 / len(inner)
            w_out = -1.0 / n_outer if n_outer else 0.0
        for span, tag, w in ((inner, INNER, w_in), (left, OUTER, w_out), (right, OUTER, w_out)):
            member[span.start:span.stop, j] = tag
            W[span.start:span.stop, j] = w
        q[j] = inst.confidence
    return ConstraintSystem(W, q, member, float(alpha), mode)


def solve_l1_lp(cs: ConstraintSystem) -> LpSolution:
    """min sum(g) + SLACK_PENALTY * sum(u + v)  s.t.  W.T g + u - v = q,  g, u, v >= 0."""
    l, n = cs.W.shape
    if n == 0:
        return LpSolution(np.zeros(l), 0.0, np.zeros(0), LpStatus.DEGENERATE_EMPTY)
    A = np.hstack([cs.W.T, np.eye(n), -np.eye(n)])
    c = np.concatenate([np.ones(l), np.full(2 * n, SLACK_PENALTY)])
    res = simplex.solve(c, A, cs.q)
    g = res.x[:l]
    slack = res.x[l:l + n] + res.x[l + n:]
    status = LpStatus.RELAXED if np.any(slack > SLACK_TOL) else LpStatus.OPTIMAL
    return LpSolution(g, float(g.sum() + SLACK_PENALTY * slack.sum()), slack, status)


def equivalence_average(sol: LpSolution, cs: ConstraintSystem) -> np.ndarray:
    """Replace every snippet's value by the mean over snippets with the same membership row."""
    g = np.asarray(sol.g, dtype=np.float64)
    if cs.num_instances == 0:
        return g.copy()
    _, inverse = np.unique(cs.memberships, axis=0, return_inverse=True)
    inverse = inverse.ravel()
    sums = np.bincount(inverse, weights=g)
    counts = np.bincount(inverse)
    return (sums / counts)[inverse]


def generate_pseudo_label(
    fused: Sequence[ActionInstance],
    num_snippets: int,
    num_classes: int,
    alpha: float = 0.25,
    mode: WMode | str = WMode.NORMALIZED,
) -> PseudoLabel:
    """Pseudo label G (l x K); classes without usable instances get zero columns."""
    G = np.zeros((num_snippets, num_classes))
    by_class: dict[int, list[ActionInstance]] = {}
    for a in fused:
        if not 0 <= a.class_id < num_classes:
            log.warning("ignoring instance with class %d outside [0, %d)", a.class_id, num_classes)
            continue
        if a.confidence <= 0:
            log.warning("ignoring instance with non-positive confidence: %s", a)
            continue
        if len(inner_snippets(a.interval, num_snippets)) == 0:
            log.warning("ignoring instance with empty inner set: %s", a)
            continue
        by_class.setdefault(a.class_id, []).append(a)
    for c, insts in sorted(by_class.items()):
        try:
            cs = build_constraints(insts, num_snippets, alpha, mode)
            sol = solve_l1_lp(cs)
        except (ValueError, simplex.SimplexError) as exc:
            log.warning("class %d: pseudo label fell back to zeros (%s)", c, exc)
            continue
        if sol.status is LpStatus.RELAXED:
            log.debug("class %d: constraints infeasible, slack %.3g", c, sol.slack_used.sum())
        G[:, c] = np.maximum(equivalence_average(sol, cs), 0.0)
    return PseudoLabel(G)
