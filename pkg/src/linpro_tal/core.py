"""Shared domain types and interval arithmetic."""
from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

# Slack for ceil/floor on fused (fractional) boundaries so that e.g. 3.9999999999
# and 4.0000000001 both resolve to snippet 4.
_SNAP = 1e-9


@dataclass(frozen=True)
class TemporalInterval:
    """Closed interval in snippet units.

    A single-snippet run is represented as ``[i, i]``, so ``end == start``
    is allowed.
    """

    start: float
    end: float

    def __post_init__(self) -> None:
        s, e = float(self.start), float(self.end)
        if not (math.isfinite(s) and math.isfinite(e)):
            raise ValueError(f"non-finite interval [{self.start}, {self.end}]")
        if s < 0:
            raise ValueError(f"interval start must be >= 0, got {self.start}")
        if e < s:
            raise ValueError(f"invalid interval: end ({self.end}) < start ({self.start})")
        object.__setattr__(self, "start", s)
        object.__setattr__(self, "end", e)

    @property
    def length(self) -> float:
        return self.end - self.start

    def shifted(self, t: float) -> TemporalInterval:
        return TemporalInterval(self.start + t, self.end + t)


@dataclass(frozen=True)
class ActionInstance:
    class_id: int
    confidence: float
    interval: TemporalInterval

    def __post_init__(self) -> None:
        if int(self.class_id) < 0:
            raise ValueError(f"class_id must be >= 0, got {self.class_id}")
        if not math.isfinite(self.confidence):
            raise ValueError(f"confidence must be finite, got {self.confidence}")
        object.__setattr__(self, "class_id", int(self.class_id))
        object.__setattr__(self, "confidence", float(self.confidence))

    @property
    def start(self) -> float:
        return self.interval.start

    @property
    def end(self) -> float:
        return self.interval.end

    @classmethod
    def make(cls, class_id: int, confidence: float, start: float, end: float) -> ActionInstance:
        return cls(class_id, confidence, TemporalInterval(start, end))


@dataclass(frozen=True)
class Tcam:
    """Per-snippet, per-class score map of shape (l, K)."""

    scores: np.ndarray

    def __post_init__(self) -> None:
        arr = np.array(self.scores, dtype=np.float64)
        if arr.ndim != 2 or arr.shape[0] < 1 or arr.shape[1] < 1:
            raise ValueError(f"TCAM must be a non-empty l x K matrix, got shape {arr.shape}")
        if not np.all(np.isfinite(arr)):
            raise ValueError("TCAM contains non-finite entries")
        arr.setflags(write=False)
        object.__setattr__(self, "scores", arr)

    @property
    def num_snippets(self) -> int:
        return self.scores.shape[0]

    @property
    def num_classes(self) -> int:
        return self.scores.shape[1]


@dataclass(frozen=True)
class VideoRecord:
    id: str
    num_snippets: int
    features: np.ndarray
    video_labels: np.ndarray
    ground_truth: tuple[tuple[int, TemporalInterval], ...] = field(default_factory=tuple)

    def __post_init__(self) -> None:
        feats = np.array(self.features, dtype=np.float64)
        labels = np.array(self.video_labels, dtype=np.int64)
        if feats.ndim != 2 or feats.shape[0] != self.num_snippets:
            raise ValueError(f"features shape {feats.shape} does not match l={self.num_snippets}")
        if labels.ndim != 1 or not np.all((labels == 0) | (labels == 1)):
            raise ValueError("video_labels must be a binary vector")
        for c, iv in self.ground_truth:
            if not 0 <= c < labels.shape[0]:
                raise ValueError(f"ground-truth class {c} out of range")
            if iv.end > self.num_snippets:
                raise ValueError(f"ground-truth interval {iv} exceeds video length {self.num_snippets}")
        feats.setflags(write=False)
        labels.setflags(write=False)
        object.__setattr__(self, "features", feats)
        object.__setattr__(self, "video_labels", labels)
        object.__setattr__(self, "ground_truth", tuple(self.ground_truth))

    @property
    def num_classes(self) -> int:
        return self.video_labels.shape[0]


def temporal_iou(a: TemporalInterval, b: TemporalInterval) -> float:
    """IoU of two real intervals; 0 when disjoint, 1 for identical intervals."""
    inter = min(a.end, b.end) - max(a.start, b.start)
    if inter < 0.0:
        return 0.0
    union = (a.end - a.start) + (b.end - b.start) - inter
    if union <= 0.0:
        # both degenerate; only a shared point can get here
        return 1.0 if (a.start == b.start and a.end == b.end) else 0.0
    return min(1.0, max(0.0, inter / union))


def inner_snippets(interval: TemporalInterval, num_snippets: int | None = None) -> range:
    """Integer snippet indices i with ceil(start) <= i <= floor(end).

    When ``num_snippets`` is given the range is clipped to [0, num_snippets - 1].
    """
    lo = math.ceil(interval.start - _SNAP)
    hi = math.floor(interval.end + _SNAP)
    if num_snippets is not None:
        lo = max(lo, 0)
        hi = min(hi, num_snippets - 1)
    return range(lo, max(lo, hi + 1))


def outer_length(interval: TemporalInterval, alpha: float) -> int:
    """Margin window length: max(1, round(alpha * duration)), rounding half up."""
    return max(1, int(math.floor(alpha * interval.length + 0.5)))


def outer_windows(inner: range, length: int, num_snippets: int) -> tuple[range, range]:
    """Left and right flanking windows of ``length`` snippets around ``inner``, clipped."""
    left = range(max(0, inner.start - length), max(0, inner.start))
    right = range(min(num_snippets, inner.stop), min(num_snippets, inner.stop + length))
    return left, right


def ranking_key(inst: ActionInstance) -> tuple[float, float, int]:
    """Sort key: descending confidence, then earlier start, then smaller class id."""
    return (-inst.confidence, inst.start, inst.class_id)
