"""Weakly supervised temporal action localization toolkit.

Candidate proposals from class activation maps, Gaussian weighted instance
fusion, pseudo labels from l1 minimization, delta pseudo labels, a synthetic
self-training harness and a detection mAP evaluator.
"""
from __future__ import annotations

from .core import ActionInstance, Tcam, TemporalInterval, VideoRecord, temporal_iou
from .delta import DeltaLabel, LabelHistory, delta_ce_grad, delta_ce_loss, delta_labels
from .evaluation import EvalResult, average_precision, match_detections, mean_ap
from .fusion import FusionConfig, FusionMode, fuse_group, gaussian_weighted_fusion, nms, sampling_weights
from .linpro import (
    ConstraintSystem,
    LpSolution,
    LpStatus,
    PseudoLabel,
    WMode,
    build_constraints,
    equivalence_average,
    generate_pseudo_label,
    solve_l1_lp,
)
from .proposals import ProposalConfig, build_candidate_pool, normalize_scores, oic_confidence, threshold_proposals
from .synthtrain import LabelMode, SynthConfig, TrainSchedule, Variant, generate_dataset, run_experiment, train

__version__ = "0.1.0"

__all__ = [
    "ActionInstance", "Tcam", "TemporalInterval", "VideoRecord", "temporal_iou",
    "DeltaLabel", "LabelHistory", "delta_ce_grad", "delta_ce_loss", "delta_labels",
    "EvalResult", "average_precision", "match_detections", "mean_ap",
    "FusionConfig", "FusionMode", "fuse_group", "gaussian_weighted_fusion", "nms", "sampling_weights",
    "ConstraintSystem", "LpSolution", "LpStatus", "PseudoLabel", "WMode",
    "build_constraints", "equivalence_average", "generate_pseudo_label", "solve_l1_lp",
    "ProposalConfig", "build_candidate_pool", "normalize_scores", "oic_confidence", "threshold_proposals",
    "LabelMode", "SynthConfig", "TrainSchedule", "Variant", "generate_dataset", "run_experiment", "train",
]
