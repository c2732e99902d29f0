"""Gaussian weighted instance fusion, with NMS and uniform-weight baselines."""
from __future__ import annotations

import math
from dataclasses import dataclass
from enum import Enum
from typing import Sequence

import numpy as np

from . import kernels
from .core import ActionInstance, TemporalInterval, ranking_key


class FusionMode(str, Enum):
    GAUSSIAN = "gaussian"
    UNIFORM = "uniform"
    NMS = "nms"


@dataclass(frozen=True)
class FusionConfig:
    h_fuse: float = 0.7
    temperature: float = 0.1
    mode: FusionMode = FusionMode.GAUSSIAN

    def __post_init__(self) -> None:
        if not 0.0 < self.h_fuse < 1.0:
            raise ValueError(f"h_fuse: must be in (0, 1), got {self.h_fuse}")
        if not (self.temperature > 0 and math.isfinite(self.temperature)):
            raise ValueError(f"temperature: must be > 0, got {self.temperature}")
        object.__setattr__(self, "mode", FusionMode(self.mode))


def sampling_weights(confidences: Sequence[float], temperature: float) -> np.ndarray:
    """Softmax of ``confidences / temperature``."""
    q = np.asarray(confidences, dtype=np.float64)
    if q.size == 0:
        raise ValueError("sampling_weights needs at least one confidence")
    if not temperature > 0:
        raise ValueError(f"temperature must be > 0, got {temperature}")
    z = (q - q.max()) / temperature
    w = np.exp(z)
    return w / w.sum()


def _fuse_with_weights(group: Sequence[ActionInstance], weights: np.ndarray) -> ActionInstance:
    q = np.array([a.confidence for a in group])
    s = np.array([a.start for a in group])
    e = np.array([a.end for a in group])
    # clamp to member extremes: a convex combination can drift by an ulp
    mu_q = float(np.clip(weights @ q, q.min(), q.max()))
    mu_s = float(np.clip(weights @ s, s.min(), s.max()))
    mu_e = float(np.clip(weights @ e, e.min(), e.max()))
    return ActionInstance(group[0].class_id, mu_q, TemporalInterval(mu_s, max(mu_s, mu_e)))


def _check_group(group: Sequence[ActionInstance]) -> None:
    if not group:
        raise ValueError("cannot fuse an empty group")
    if len({a.class_id for a in group}) != 1:
        raise ValueError("all instances in a fusion group must share class_id")


def fuse_group(group: Sequence[ActionInstance], temperature: float) -> ActionInstance:
    """Confidence-softmax weighted mean of (confidence, start, end)."""
    _check_group(group)
    if len(group) == 1:
        return group[0]
    return _fuse_with_weights(group, sampling_weights([a.confidence for a in group], temperature))


def uniform_fuse_group(group: Sequence[ActionInstance]) -> ActionInstance:
    _check_group(group)
    if len(group) == 1:
        return group[0]
    return _fuse_with_weights(group, np.full(len(group), 1.0 / len(group)))


def _greedy_groups(pool: Sequence[ActionInstance], iou_threshold: float):
    """Yield (anchor, group) per class: the anchor is the top-ranked remaining
    instance, the group every remaining instance with IoU > threshold to it."""
    by_class: dict[int, list[tuple[int, ActionInstance]]] = {}
    for idx, a in enumerate(pool):
        by_class.setdefault(a.class_id, []).append((idx, a))
    for c in sorted(by_class):
        ranked = [a for _, a in sorted(by_class[c], key=lambda p: (*ranking_key(p[1]), p[0]))]
        starts = np.array([a.start for a in ranked])
        ends = np.array([a.end for a in ranked])
        group_of = kernels.impl().greedy_groups(starts, ends, float(iou_threshold))
        members: dict[int, list[ActionInstance]] = {}
        for g, a in zip(group_of.tolist(), ranked):
            members.setdefault(g, []).append(a)
        for g, group in members.items():
            yield ranked[g], group


def nms(pool: Sequence[ActionInstance], iou_threshold: float) -> list[ActionInstance]:
    """Greedy per-class non-maximum suppression."""
    kept = [anchor for anchor, _ in _greedy_groups(pool, iou_threshold)]
    kept.sort(key=ranking_key)
    return kept


def gaussian_weighted_fusion(pool: Sequence[ActionInstance], cfg: FusionConfig) -> list[ActionInstance]:
    """Replace each greedy overlap group by its fused instance.

    ``cfg.mode`` selects softmax weights (gaussian), equal weights (uniform) or
    plain suppression (nms).
    """
    out = []
    for anchor, group in _greedy_groups(pool, cfg.h_fuse):
        if cfg.mode is FusionMode.NMS:
            out.append(anchor)
        elif cfg.mode is FusionMode.UNIFORM:
            out.append(uniform_fuse_group(group))
        else:
            out.append(fuse_group(group, cfg.temperature))
    out.sort(key=ranking_key)
    return out
