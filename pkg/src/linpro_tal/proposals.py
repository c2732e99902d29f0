"""Candidate action instances from a TCAM: multi-threshold sweep + inner-outer contrast."""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

from . import _fallback, kernels
from .core import (
    ActionInstance,
    Tcam,
    TemporalInterval,
    inner_snippets,
    outer_length,
    outer_windows,
    ranking_key,
)

def _default_thresholds() -> tuple[float, ...]:
    return tuple(float(x) for x in np.linspace(0.1, 0.9, 10))


@dataclass(frozen=True)
class ProposalConfig:
    thresholds: tuple[float, ...] = field(default_factory=_default_thresholds)
    alpha: float = 0.25
    min_confidence: float = 0.0
    class_gate: float = 0.5

    def __post_init__(self) -> None:
        ths = tuple(float(t) for t in self.thresholds)
        if not ths:
            raise ValueError("thresholds: must be nonempty")
        if any(not 0.0 < t < 1.0 for t in ths):
            raise ValueError("thresholds: every value must lie in (0, 1)")
        if any(b <= a for a, b in zip(ths, ths[1:])):
            raise ValueError("thresholds: must be strictly increasing")
        if not self.alpha > 0:
            raise ValueError(f"alpha: must be > 0, got {self.alpha}")
        if not 0.0 <= self.class_gate <= 1.0:
            raise ValueError(f"class_gate: must be in [0, 1], got {self.class_gate}")
        object.__setattr__(self, "thresholds", ths)


def normalize_scores(tcam: Tcam) -> np.ndarray:
    """Per-class min-max normalization over time; constant columns become zeros."""
    x = tcam.scores
    lo = x.min(axis=0)
    span = x.max(axis=0) - lo
    out = np.zeros_like(x)
    ok = span > 0
    out[:, ok] = (x[:, ok] - lo[ok]) / span[ok]
    return out


def _runs_above(col: np.ndarray, theta: float) -> list[tuple[int, int]]:
    """Maximal runs (first, last) of consecutive entries strictly above ``theta``."""
    return _fallback._runs_above(col, theta)


def _class_runs(col: np.ndarray, thresholds: Sequence[float]) -> list[tuple[int, int]]:
    """Distinct runs over all thresholds, in order of first appearance."""
    runs: dict[tuple[int, int], None] = {}
    for theta in thresholds:
        runs.update(dict.fromkeys(_runs_above(col, theta)))
    return list(runs)


def threshold_proposals(
    probs: np.ndarray, cfg: ProposalConfig, active_classes: Iterable[int]
) -> list[ActionInstance]:
    """Sweep every threshold over every active class; identical runs are kept once.

    Returned instances carry a placeholder confidence of 0.
    """
    probs = np.asarray(probs, dtype=np.float64)
    return [
        ActionInstance.make(c, 0.0, first, last)
        for c in sorted(set(int(k) for k in active_classes))
        for first, last in _class_runs(probs[:, c], cfg.thresholds)
    ]


def oic_confidence(probs_col: np.ndarray, interval: TemporalInterval, alpha: float) -> float:
    """Mean score over the inner snippets minus mean score over the flanking margins."""
    probs_col = np.asarray(probs_col, dtype=np.float64)
    l = probs_col.shape[0]
    inner = inner_snippets(interval, l)
    if len(inner) == 0:
        raise ValueError(f"interval {interval} has no inner snippets")
    left, right = outer_windows(inner, outer_length(interval, alpha), l)
    inner_mean = float(probs_col[inner.start:inner.stop].mean())
    n_outer = len(left) + len(right)
    if n_outer == 0:
        return inner_mean
    outer_sum = probs_col[left.start:left.stop].sum() + probs_col[right.start:right.stop].sum()
    return inner_mean - float(outer_sum) / n_outer


def build_candidate_pool(
    tcam: Tcam, video_scores: Sequence[float], cfg: ProposalConfig
) -> list[ActionInstance]:
    """Candidate pool A for one video, sorted by descending confidence."""
    scores = np.asarray(video_scores, dtype=np.float64)
    if scores.shape != (tcam.num_classes,):
        raise ValueError(f"video_scores has shape {scores.shape}, expected ({tcam.num_classes},)")
    active = [k for k in range(tcam.num_classes) if scores[k] > cfg.class_gate]
    if not active:
        return []
    probs = np.ascontiguousarray(normalize_scores(tcam).T)
    ths = np.array(cfg.thresholds)
    pool = []
    for c in active:
        firsts, lasts, q = kernels.impl().class_runs(probs[c], ths, float(cfg.alpha))
        pool.extend(
            ActionInstance.make(c, float(qi), int(f), int(e))
            for qi, f, e in zip(q.tolist(), firsts.tolist(), lasts.tolist())
            if qi > cfg.min_confidence
        )
    pool.sort(key=ranking_key)
    return pool
