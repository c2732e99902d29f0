"""Desk-scale self-training on synthetic snippet features.

A linear snippet classifier is trained with a top-k MIL video loss; from
``pseudo_start_epoch`` on, pseudo labels are generated from its own detections
(proposals -> fusion -> LP labels) and fed back either raw or as differences
between consecutive generations.
"""
from __future__ import annotations

import logging
import zlib
from dataclasses import dataclass, field, replace
from enum import Enum
from typing import Sequence

import numpy as np

from .core import ActionInstance, Tcam, TemporalInterval, VideoRecord
from .delta import LabelHistory, delta_ce_grad, delta_ce_loss, delta_labels
from .evaluation import DEFAULT_THRESHOLDS, mean_ap
from .fusion import FusionConfig, FusionMode, gaussian_weighted_fusion
from .linpro import PseudoLabel, WMode, generate_pseudo_label
from .proposals import ProposalConfig, build_candidate_pool

log = logging.getLogger(__name__)

SEGMENT_GAP = 2


class LabelMode(str, Enum):
    NONE = "none"
    RAW_PSEUDO = "raw_pseudo"
    DELTA_PSEUDO = "delta_pseudo"


@dataclass(frozen=True)
class SynthConfig:
    num_videos: int = 40
    K: int = 4
    feature_dim: int = 16
    snippet_range: tuple[int, int] = (60, 120)
    segments_per_video: tuple[int, int] = (1, 3)
    segment_length_range: tuple[int, int] = (4, 16)
    feature_noise_sigma: float = 1.0
    prototype_separation: float = 3.0
    seed: int = 0

    def __post_init__(self) -> None:
        for name in ("snippet_range", "segments_per_video", "segment_length_range"):
            lo, hi = getattr(self, name)
            if lo > hi:
                raise ValueError(f"{name}: empty range ({lo}, {hi})")
            object.__setattr__(self, name, (int(lo), int(hi)))
        if self.num_videos < 1:
            raise ValueError("num_videos: must be >= 1")
        if self.K < 1:
            raise ValueError("K: must be >= 1")
        if self.feature_dim < self.K + 1:
            raise ValueError(f"feature_dim: must be >= K + 1 = {self.K + 1}")
        if self.snippet_range[0] < 1:
            raise ValueError("snippet_range: lengths must be >= 1")
        if self.segments_per_video[0] < 1:
            raise ValueError("segments_per_video: must request at least one segment")
        if self.segment_length_range[0] < 1:
            raise ValueError("segment_length_range: lengths must be >= 1")
        if self.feature_noise_sigma < 0:
            raise ValueError("feature_noise_sigma: must be >= 0")
        n, seg = self.segments_per_video[1], self.segment_length_range[1]
        if n * seg + (n - 1) * SEGMENT_GAP > self.snippet_range[0]:
            raise ValueError(
                f"segment_length_range: {n} segments of up to {seg} snippets do not fit "
                f"in videos of {self.snippet_range[0]} snippets"
            )


@dataclass
class ToyModel:
    weights: np.ndarray
    bias: np.ndarray

    @classmethod
    def init(cls, feature_dim: int, K: int, seed: int, scale: float = 0.01) -> ToyModel:
        rng = np.random.default_rng(seed)
        return cls(rng.normal(0.0, scale, (feature_dim, K + 1)), np.zeros(K + 1))


@dataclass(frozen=True)
class TrainSchedule:
    total_epochs: int = 60
    pseudo_start_epoch: int = 20
    renewal_epochs: tuple[int, ...] = (25, 30, 35, 40, 45)
    learning_rate: float = 0.05
    topk_ratio: float = 0.125
    delta_weight: float = 1.0
    fusion_cfg: FusionConfig = field(default_factory=FusionConfig)
    test_fusion_cfg: FusionConfig = field(default_factory=lambda: FusionConfig(temperature=0.03))
    proposal_cfg: ProposalConfig = field(default_factory=ProposalConfig)
    label_mode: LabelMode = LabelMode.DELTA_PSEUDO
    w_mode: WMode = WMode.NORMALIZED
    eval_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def __post_init__(self) -> None:
        renewals = tuple(int(e) for e in self.renewal_epochs)
        if list(renewals) != sorted(set(renewals)):
            raise ValueError("renewal_epochs: must be strictly increasing")
        if renewals and not self.pseudo_start_epoch < renewals[0]:
            raise ValueError("renewal_epochs: must start after pseudo_start_epoch")
        if renewals and not renewals[-1] < self.total_epochs:
            raise ValueError("renewal_epochs: must end before total_epochs")
        if not 0 <= self.pseudo_start_epoch < self.total_epochs:
            raise ValueError("pseudo_start_epoch: must lie in [0, total_epochs)")
        if not 0 < self.topk_ratio <= 1:
            raise ValueError("topk_ratio: must be in (0, 1]")
        if not self.learning_rate > 0:
            raise ValueError("learning_rate: must be > 0")
        object.__setattr__(self, "renewal_epochs", renewals)
        object.__setattr__(self, "label_mode", LabelMode(self.label_mode))
        object.__setattr__(self, "w_mode", WMode(self.w_mode))


METRIC_COLUMNS = ("epoch", "mil_loss", "delta_loss", "map_030", "map_050", "map_070", "map_avg", "renewed_flag")


@dataclass
class MetricHistory:
    rows: list[tuple] = field(default_factory=list)

    def append(self, epoch, mil, delta, ev, renewed) -> None:
        self.rows.append((
            int(epoch), float(mil), float(delta),
            ev.map_at.get(0.3, 0.0), ev.map_at.get(0.5, 0.0), ev.map_at.get(0.7, 0.0),
            ev.averages.get("0.1:0.7", 0.0), int(renewed),
        ))

    def column(self, name: str) -> list:
        i = METRIC_COLUMNS.index(name)
        return [r[i] for r in self.rows]


# ---------------------------------------------------------------- data


def prototypes(cfg: SynthConfig) -> np.ndarray:
    """(K + 1, d) class prototypes; row K is background."""
    P = np.zeros((cfg.K + 1, cfg.feature_dim))
    P[np.arange(cfg.K + 1), np.arange(cfg.K + 1)] = cfg.prototype_separation
    return P


def _place_segments(rng: np.random.Generator, l: int, lengths: list[int]) -> list[int]:
    free = l - sum(lengths) - SEGMENT_GAP * (len(lengths) - 1)
    # split the free snippets into len+1 gaps
    cuts = np.sort(rng.integers(0, free + 1, size=len(lengths)))
    gaps = np.diff(np.concatenate(([0], cuts)))
    starts, pos = [], 0
    for k, (gap, seg) in enumerate(zip(gaps, lengths)):
        pos += int(gap) + (SEGMENT_GAP if k else 0)
        starts.append(pos)
        pos += seg
    return starts


def generate_dataset(cfg: SynthConfig) -> list[VideoRecord]:
    """Deterministic synthetic videos; ground truth uses closed [first, last] snippet intervals."""
    rng = np.random.default_rng(cfg.seed)
    P = prototypes(cfg)
    videos = []
    for v in range(cfg.num_videos):
        l = int(rng.integers(cfg.snippet_range[0], cfg.snippet_range[1] + 1))
        n = int(rng.integers(cfg.segments_per_video[0], cfg.segments_per_video[1] + 1))
        lengths = [int(x) for x in rng.integers(cfg.segment_length_range[0], cfg.segment_length_range[1] + 1, size=n)]
        classes = [int(x) for x in rng.integers(0, cfg.K, size=n)]
        starts = _place_segments(rng, l, lengths)
        snippet_cls = np.full(l, cfg.K)
        gts = []
        for c, s, n_snip in zip(classes, starts, lengths):
            snippet_cls[s:s + n_snip] = c
            gts.append((c, TemporalInterval(s, s + n_snip - 1)))
        feats = P[snippet_cls] + rng.normal(0.0, cfg.feature_noise_sigma, (l, cfg.feature_dim))
        labels = np.zeros(cfg.K, dtype=np.int64)
        labels[classes] = 1
        videos.append(VideoRecord(f"vid_{v:04d}", l, feats, labels, tuple(gts)))
    return videos


def is_heldout(video_id: str) -> bool:
    """Stable 25% split by CRC32 of the video id."""
    return zlib.crc32(video_id.encode()) % 4 == 0


def split(dataset: Sequence[VideoRecord]) -> tuple[list[VideoRecord], list[VideoRecord]]:
    train = [v for v in dataset if not is_heldout(v.id)]
    held = [v for v in dataset if is_heldout(v.id)]
    return train, held


# ---------------------------------------------------------------- model


def forward(model: ToyModel, features: np.ndarray) -> np.ndarray:
    features = np.asarray(features, dtype=np.float64)
    if features.ndim != 2 or features.shape[1] != model.weights.shape[0]:
        raise ValueError(f"features {features.shape} do not match weights {model.weights.shape}")
    return features @ model.weights + model.bias


def _topk_count(l: int, topk_ratio: float) -> int:
    return max(1, int(np.floor(topk_ratio * l)))


def _topk_index(logits: np.ndarray, k: int) -> np.ndarray:
    # stable ordering keeps ties deterministic
    return np.argsort(-logits, axis=0, kind="stable")[:k]


def pooled_scores(logits: np.ndarray, topk_ratio: float) -> np.ndarray:
    """Mean of the top-k snippet logits for each action class."""
    act = logits[:, :-1]
    idx = _topk_index(act, _topk_count(act.shape[0], topk_ratio))
    return np.take_along_axis(act, idx, axis=0).mean(axis=0)


def _log_sigmoid(x):
    return -np.logaddexp(0.0, -x)


def mil_loss(logits: np.ndarray, video_labels: np.ndarray, topk_ratio: float) -> tuple[float, np.ndarray]:
    """Summed per-class BCE on top-k pooled logits; returns (loss, d loss / d logits)."""
    logits = np.asarray(logits, dtype=np.float64)
    y = np.asarray(video_labels, dtype=np.float64)
    act = logits[:, :-1]
    k = _topk_count(act.shape[0], topk_ratio)
    idx = _topk_index(act, k)
    pooled = np.take_along_axis(act, idx, axis=0).mean(axis=0)
    loss = -(y * _log_sigmoid(pooled) + (1 - y) * _log_sigmoid(-pooled)).sum()
    dpooled = 1.0 / (1.0 + np.exp(-pooled)) - y
    grad = np.zeros_like(logits)
    np.put_along_axis(grad[:, :-1], idx, np.broadcast_to(dpooled / k, idx.shape), axis=0)
    return float(loss), grad


def _video_scores(logits: np.ndarray, topk_ratio: float) -> np.ndarray:
    return 1.0 / (1.0 + np.exp(-pooled_scores(logits, topk_ratio)))


def detect(model: ToyModel, video: VideoRecord, schedule: TrainSchedule, gate_scores=None) -> list[ActionInstance]:
    """Test-time detections: proposals on the action logits, then test-time fusion."""
    logits = forward(model, video.features)
    scores = _video_scores(logits, schedule.topk_ratio) if gate_scores is None else gate_scores
    pool = build_candidate_pool(Tcam(logits[:, :-1]), scores, schedule.proposal_cfg)
    return gaussian_weighted_fusion(pool, schedule.test_fusion_cfg)


def pseudo_label(model: ToyModel, video: VideoRecord, schedule: TrainSchedule) -> PseudoLabel:
    """Training-time label: classes gated by the known video labels."""
    logits = forward(model, video.features)
    pool = build_candidate_pool(Tcam(logits[:, :-1]), video.video_labels.astype(float), schedule.proposal_cfg)
    fused = gaussian_weighted_fusion(pool, schedule.fusion_cfg)
    return generate_pseudo_label(fused, video.num_snippets, video.num_classes,
                                 schedule.proposal_cfg.alpha, schedule.w_mode)


def evaluate(model: ToyModel, videos: Sequence[VideoRecord], schedule: TrainSchedule):
    dets = {v.id: detect(model, v, schedule) for v in videos}
    gts = {v.id: v.ground_truth for v in videos}
    return mean_ap(dets, gts, schedule.eval_thresholds)


def train(
    dataset: Sequence[VideoRecord], schedule: TrainSchedule, synth_seed: int = 0
) -> tuple[ToyModel, MetricHistory]:
    """Full-batch gradient descent on the MIL loss plus the pseudo-label term."""
    train_set, held = split(dataset)
    if not train_set:
        raise ValueError("training split is empty")
    d = train_set[0].features.shape[1]
    K = train_set[0].num_classes
    model = ToyModel.init(d, K, synth_seed)
    history = MetricHistory()
    generations = {schedule.pseudo_start_epoch, *schedule.renewal_epochs}
    use_labels = schedule.label_mode is not LabelMode.NONE
    label_hist: dict[str, LabelHistory] = {v.id: LabelHistory() for v in train_set}
    targets: dict[str, np.ndarray] = {}
    n = len(train_set)

    for epoch in range(schedule.total_epochs):
        if use_labels and epoch in generations:
            for v in train_set:
                G = pseudo_label(model, v, schedule)
                if schedule.label_mode is LabelMode.DELTA_PSEUDO:
                    targets[v.id] = delta_labels(G, label_hist[v.id]).dG
                else:
                    targets[v.id] = G.G
                label_hist[v.id] = label_hist[v.id].renewed(G)

        gW = np.zeros_like(model.weights)
        gb = np.zeros_like(model.bias)
        mil_total = delta_total = 0.0
        for v in train_set:
            logits = forward(model, v.features)
            loss, grad = mil_loss(logits, v.video_labels, schedule.topk_ratio)
            mil_total += loss
            if v.id in targets:
                w = schedule.delta_weight / v.num_snippets
                delta_total += delta_ce_loss(logits, targets[v.id], w)
                grad = grad + delta_ce_grad(logits, targets[v.id], w)
            gW += v.features.T @ grad
            gb += grad.sum(axis=0)
        model.weights -= schedule.learning_rate * gW / n
        model.bias -= schedule.learning_rate * gb / n
        if not (np.all(np.isfinite(model.weights)) and np.all(np.isfinite(model.bias))):
            raise FloatingPointError(f"parameters diverged at epoch {epoch}")

        ev = evaluate(model, held, schedule) if held else mean_ap({}, {}, schedule.eval_thresholds)
        history.append(epoch, mil_total / n, delta_total / n, ev, epoch in schedule.renewal_epochs)
    return model, history


# ---------------------------------------------------------------- experiments


@dataclass(frozen=True)
class Variant:
    """Named overrides applied on top of a base schedule."""

    name: str
    label_mode: LabelMode | None = None
    train_fusion_mode: FusionMode | None = None
    test_fusion_mode: FusionMode | None = None
    train_temperature: float | None = None
    test_temperature: float | None = None
    delta_weight: float | None = None

    def apply(self, base: TrainSchedule) -> TrainSchedule:
        fus, test = base.fusion_cfg, base.test_fusion_cfg
        if self.train_fusion_mode is not None:
            fus = replace(fus, mode=FusionMode(self.train_fusion_mode))
        if self.train_temperature is not None:
            fus = replace(fus, temperature=self.train_temperature)
        if self.test_fusion_mode is not None:
            test = replace(test, mode=FusionMode(self.test_fusion_mode))
        if self.test_temperature is not None:
            test = replace(test, temperature=self.test_temperature)
        out = replace(base, fusion_cfg=fus, test_fusion_cfg=test)
        if self.label_mode is not None:
            out = replace(out, label_mode=LabelMode(self.label_mode))
        if self.delta_weight is not None:
            out = replace(out, delta_weight=self.delta_weight)
        return out


@dataclass
class ExperimentRow:
    variant: str
    seed: int
    map_030: float
    map_050: float
    map_070: float
    map_avg: float


def _run_cell(args) -> ExperimentRow:
    variant, seed, synth, base = args
    data = generate_dataset(replace(synth, seed=seed))
    _, hist = train(data, variant.apply(base), synth_seed=seed)
    last = hist.rows[-1]
    return ExperimentRow(variant.name, seed, last[3], last[4], last[5], last[6])


def run_experiment(
    variants: Sequence[Variant],
    seeds: Sequence[int],
    synth: SynthConfig | None = None,
    base: TrainSchedule | None = None,
    workers: int = 1,
) -> list[ExperimentRow]:
    """Train every (variant, seed) cell; the dataset seed and the init seed are both ``seed``."""
    if len(variants) < 2:
        raise ValueError("run_experiment needs at least two variants")
    if not seeds:
        raise ValueError("run_experiment needs at least one seed")
    synth = synth or SynthConfig()
    base = base or TrainSchedule()
    cells = [(v, int(s), synth, base) for v in variants for s in seeds]
    if workers > 1:
        from concurrent.futures import ProcessPoolExecutor

        with ProcessPoolExecutor(workers) as ex:
            return list(ex.map(_run_cell, cells))
    return [_run_cell(c) for c in cells]


def summarize(rows: Sequence[ExperimentRow]) -> dict[str, dict[str, tuple[float, float]]]:
    """Per-variant (mean, std) of each metric, in first-seen variant order."""
    out: dict[str, dict[str, tuple[float, float]]] = {}
    names = list(dict.fromkeys(r.variant for r in rows))
    for name in names:
        sub = [r for r in rows if r.variant == name]
        out[name] = {}
        for col in ("map_030", "map_050", "map_070", "map_avg"):
            vals = np.array([getattr(r, col) for r in sub])
            out[name][col] = (float(vals.mean()), float(vals.std()))
    return out
