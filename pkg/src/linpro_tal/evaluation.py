"""Temporal detection evaluation: greedy matching, AP and mAP over IoU thresholds."""
from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping, Sequence

import numpy as np

from .core import ActionInstance, TemporalInterval, ranking_key

GroundTruth = tuple[int, TemporalInterval]

DEFAULT_THRESHOLDS = (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7)
BANDS = {
    "0.1:0.5": (0.1, 0.2, 0.3, 0.4, 0.5),
    "0.3:0.7": (0.3, 0.4, 0.5, 0.6, 0.7),
    "0.1:0.7": (0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7),
}


@dataclass
class EvalResult:
    per_class_ap: dict[int, dict[float, float]] = field(default_factory=dict)
    map_at: dict[float, float] = field(default_factory=dict)
    averages: dict[str, float] = field(default_factory=dict)


def _iou_matrix(dets: Sequence[ActionInstance], gts: Sequence[GroundTruth]) -> np.ndarray:
    """(len(dets), len(gts)) matrix of ``temporal_iou`` values."""
    if not dets or not gts:
        return np.zeros((len(dets), len(gts)))
    ds = np.array([d.start for d in dets])[:, None]
    de = np.array([d.end for d in dets])[:, None]
    gs = np.array([iv.start for _, iv in gts])[None, :]
    ge = np.array([iv.end for _, iv in gts])[None, :]
    inter = np.minimum(de, ge) - np.maximum(ds, gs)
    union = (de - ds) + (ge - gs) - inter
    same = (ds == gs) & (de == ge)
    with np.errstate(divide="ignore", invalid="ignore"):
        iou = np.where(union > 0, inter / union, same.astype(float))
    return np.clip(np.where(inter < 0, 0.0, iou), 0.0, 1.0)


def _greedy_match(iou: np.ndarray, same_class: np.ndarray | None, thr: float) -> np.ndarray:
    flags = np.zeros(iou.shape[0], dtype=bool)
    if iou.size == 0:
        return flags
    eligible = iou >= thr
    if same_class is not None:
        eligible &= same_class
    remaining = iou.shape[1]
    for i in np.flatnonzero(eligible.any(axis=1)):
        if remaining == 0:
            break
        row = np.where(eligible[i], iou[i], -1.0)
        k = int(np.argmax(row))  # first maximum: ties go to the earlier ground truth
        if row[k] >= 0:
            flags[i] = True
            eligible[:, k] = False
            remaining -= 1
    return flags


def match_detections(
    dets: Sequence[ActionInstance], gts: Sequence[GroundTruth], iou_thresh: float
) -> list[bool]:
    """TP flag per detection, in the given (confidence-sorted) order.

    Each detection takes the unmatched same-class ground truth with the highest
    IoU, provided that IoU >= ``iou_thresh``.
    """
    same = np.array([[d.class_id == c for c, _ in gts] for d in dets], dtype=bool).reshape(len(dets), len(gts))
    return _greedy_match(_iou_matrix(dets, gts), same, iou_thresh).tolist()


def average_precision(flags: Sequence[bool], num_gt: int) -> float | None:
    """All-points interpolated AP; None when there is no ground truth."""
    if num_gt <= 0:
        return None
    if len(flags) == 0:
        return 0.0
    tp = np.cumsum(np.asarray(flags, dtype=np.float64))
    fp = np.cumsum(~np.asarray(flags, dtype=bool))
    rec = np.concatenate(([0.0], tp / num_gt))
    prec = np.concatenate(([0.0], tp / (tp + fp)))
    prec = np.maximum.accumulate(prec[::-1])[::-1]
    return float(np.sum((rec[1:] - rec[:-1]) * prec[1:]))


def _close(a: float, b: float) -> bool:
    return math.isclose(a, b, abs_tol=1e-9)


def mean_ap(
    dets_by_video: Mapping[str, Sequence[ActionInstance]],
    gts_by_video: Mapping[str, Sequence[GroundTruth]],
    thresholds: Sequence[float] = DEFAULT_THRESHOLDS,
) -> EvalResult:
    """Per-class AP and mAP at every threshold plus the standard band averages.

    Classes without ground truth are excluded from the means; with no ground
    truth at all every mAP is reported as 0.
    """
    if not thresholds:
        raise ValueError("thresholds must be nonempty")
    classes = sorted({g[0] for gts in gts_by_video.values() for g in gts})
    videos = sorted(set(gts_by_video) | set(dets_by_video), key=str)
    res = EvalResult()
    for c in classes:
        # per video: ranked detections and their IoU against that video's ground truth
        per_video = []
        num_gt = 0
        for vid in videos:
            gts = [g for g in gts_by_video.get(vid, ()) if g[0] == c]
            dets = sorted((d for d in dets_by_video.get(vid, ()) if d.class_id == c), key=ranking_key)
            num_gt += len(gts)
            per_video.append((vid, dets, _iou_matrix(dets, gts)))
        keys = [(ranking_key(d), str(vid)) for vid, dets, _ in per_video for d in dets]
        order = np.array(sorted(range(len(keys)), key=keys.__getitem__), dtype=np.int_)
        for thr in thresholds:
            flags = [_greedy_match(iou, None, thr) for _, _, iou in per_video]
            pooled = np.concatenate(flags)[order] if flags else np.zeros(0, dtype=bool)
            res.per_class_ap.setdefault(c, {})[float(thr)] = average_precision(pooled, num_gt)
    for thr in thresholds:
        aps = [res.per_class_ap[c][float(thr)] for c in classes]
        res.map_at[float(thr)] = float(np.mean(aps)) if aps else 0.0
    for name, band in BANDS.items():
        vals = []
        for t in band:
            match = [v for k, v in res.map_at.items() if _close(k, t)]
            if not match:
                break
            vals.append(match[0])
        else:
            res.averages[name] = float(np.mean(vals))
    return res
