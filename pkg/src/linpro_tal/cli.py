"""``linpro-tal`` command line: synth, pipeline, train, experiment, eval.

Exit codes: 0 on success, 2 for bad inputs or configuration, 3 when a
numerical routine fails.
"""
from __future__ import annotations

import argparse
import dataclasses
import logging
import sys
from dataclasses import dataclass, field, replace
from pathlib import Path
from typing import Any, Mapping, Sequence

import numpy as np

from . import io
from .evaluation import DEFAULT_THRESHOLDS, mean_ap
from .fusion import FusionConfig, FusionMode, gaussian_weighted_fusion
from .linpro import WMode, generate_pseudo_label
from .proposals import ProposalConfig, build_candidate_pool
from .simplex import SimplexError
from .synthtrain import (
    LabelMode,
    SynthConfig,
    TrainSchedule,
    Variant,
    generate_dataset,
    run_experiment,
    summarize,
    train,
)

log = logging.getLogger("linpro_tal")

EXIT_OK, EXIT_INPUT, EXIT_NUMERIC = 0, 2, 3


class ConfigError(ValueError):
    pass


# ------------------------------------------------------------------ config


@dataclass(frozen=True)
class RunConfig:
    synth: SynthConfig = field(default_factory=SynthConfig)
    proposals: ProposalConfig = field(default_factory=ProposalConfig)
    train_fusion: FusionConfig = field(default_factory=FusionConfig)
    test_fusion: FusionConfig = field(default_factory=lambda: FusionConfig(temperature=0.03))
    schedule: TrainSchedule = field(default_factory=TrainSchedule)
    eval_thresholds: tuple[float, ...] = DEFAULT_THRESHOLDS

    def train_schedule(self) -> TrainSchedule:
        return replace(self.schedule, fusion_cfg=self.train_fusion, test_fusion_cfg=self.test_fusion,
                       proposal_cfg=self.proposals, eval_thresholds=self.eval_thresholds)


_SCHEDULE_KEYS = ("total_epochs", "pseudo_start_epoch", "renewal_epochs", "learning_rate", "topk_ratio",
                  "delta_weight", "label_mode", "w_mode")
_FUSION_KEYS = ("h_fuse", "mode", "train_temperature", "test_temperature")


def _section(raw: Mapping, name: str, allowed: Sequence[str]) -> dict:
    sec = raw.get(name, {})
    if not isinstance(sec, Mapping):
        raise ConfigError(f"{name}: expected an object")
    for key in sec:
        if key not in allowed:
            raise ConfigError(f"{name}.{key}: unknown field")
    return {k: (tuple(v) if isinstance(v, list) else v) for k, v in sec.items()}


def _build(name: str, fn, **kwargs):
    try:
        return fn(**kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"{name}.{exc}" if not str(exc).startswith(name) else str(exc)) from exc


def load_config(raw: Mapping[str, Any] | None, args: argparse.Namespace) -> RunConfig:
    """Config file values first, then command-line overrides."""
    raw = dict(raw or {})
    for key in raw:
        if key not in ("synth", "proposals", "fusion", "schedule", "eval"):
            raise ConfigError(f"{key}: unknown config section")
    synth = _section(raw, "synth", [f.name for f in dataclasses.fields(SynthConfig)])
    props = _section(raw, "proposals", [f.name for f in dataclasses.fields(ProposalConfig)])
    fus = _section(raw, "fusion", _FUSION_KEYS)
    sched = _section(raw, "schedule", _SCHEDULE_KEYS)
    thresholds = _section(raw, "eval", ("thresholds",)).get("thresholds", DEFAULT_THRESHOLDS)

    def flag(name):
        return getattr(args, name, None)

    if flag("seed") is not None:
        synth["seed"] = flag("seed")
    if flag("alpha") is not None:
        props["alpha"] = flag("alpha")
    for key in ("h_fuse", "train_temperature", "test_temperature"):
        if flag(key) is not None:
            fus[key] = flag(key)
    if flag("fusion_mode") is not None:
        fus["mode"] = flag("fusion_mode")
    for key in ("label_mode", "w_mode"):
        if flag(key) is not None:
            sched[key] = flag(key)
    if flag("epochs") is not None:
        sched["total_epochs"] = flag("epochs")

    try:
        mode = FusionMode(fus.get("mode", FusionMode.GAUSSIAN))
    except ValueError as exc:
        raise ConfigError(f"fusion.mode: {exc}") from exc
    h = fus.get("h_fuse", 0.7)
    train_f = _build("fusion", FusionConfig, h_fuse=h, temperature=fus.get("train_temperature", 0.1), mode=mode)
    test_f = _build("fusion", FusionConfig, h_fuse=h, temperature=fus.get("test_temperature", 0.03), mode=mode)
    try:
        thresholds = tuple(float(t) for t in thresholds)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"eval.thresholds: {exc}") from exc
    if not thresholds or any(not 0 < t <= 1 for t in thresholds):
        raise ConfigError("eval.thresholds: must be a nonempty list of values in (0, 1]")
    for key in ("label_mode", "w_mode"):
        enum = LabelMode if key == "label_mode" else WMode
        if key in sched:
            try:
                sched[key] = enum(sched[key])
            except ValueError as exc:
                raise ConfigError(f"schedule.{key}: {exc}") from exc
    return RunConfig(
        synth=_build("synth", SynthConfig, **synth),
        proposals=_build("proposals", ProposalConfig, **props),
        train_fusion=train_f,
        test_fusion=test_f,
        schedule=_build("schedule", TrainSchedule, **sched),
        eval_thresholds=thresholds,
    )


def _out_dir(path: str) -> Path:
    out = Path(path)
    try:
        out.mkdir(parents=True, exist_ok=True)
    except OSError as exc:
        raise ConfigError(f"--out: cannot create {out} ({exc.strerror})") from exc
    return out


# ---------------------------------------------------------------- commands


def cmd_synth(args, cfg: RunConfig) -> None:
    out = _out_dir(args.out)
    io.write_dataset(generate_dataset(cfg.synth), out, dataclasses.asdict(cfg.synth))


def cmd_pipeline(args, cfg: RunConfig) -> None:
    tcam, video_scores = io.tcam_from_json(io.load_json(args.tcam), str(args.tcam))
    out = _out_dir(args.out)
    pool = build_candidate_pool(tcam, video_scores, cfg.proposals)
    detections = gaussian_weighted_fusion(pool, cfg.test_fusion)
    fused = gaussian_weighted_fusion(pool, cfg.train_fusion)
    label = generate_pseudo_label(fused, tcam.num_snippets, tcam.num_classes, cfg.proposals.alpha,
                                  cfg.schedule.w_mode)
    io.dump_json([io.instance_to_json(a) for a in detections], out / "detections.json")
    io.dump_json(io.pseudo_label_to_json(label), out / "pseudo_labels.json")


def _dataset(args, cfg: RunConfig):
    if args.data:
        videos, _ = io.read_dataset(Path(args.data))
        if not videos:
            raise ConfigError("--data: dataset has no videos")
        return videos
    return generate_dataset(cfg.synth)


def cmd_train(args, cfg: RunConfig) -> None:
    videos = _dataset(args, cfg)
    out = _out_dir(args.out)
    model, history = train(videos, cfg.train_schedule(), synth_seed=cfg.synth.seed)
    io.write_metrics(history, out / "metrics.csv")
    io.dump_json(io.model_to_json(model), out / "model.json")


PRESETS = {
    "nms": {"test_fusion_mode": "nms"},
    "gaussian": {"test_fusion_mode": "gaussian"},
    "uniform": {"test_fusion_mode": "uniform"},
    "none": {"label_mode": "none"},
    "raw_pseudo": {"label_mode": "raw_pseudo"},
    "delta_pseudo": {"label_mode": "delta_pseudo"},
}
_VARIANT_FIELDS = {f.name: f.type for f in dataclasses.fields(Variant) if f.name != "name"}


def parse_variant(token: str) -> Variant:
    """A preset name (``nms``, ``raw_pseudo``, ...) or ``key=value`` pairs joined by ``+``."""
    token = token.strip()
    if token in PRESETS:
        return Variant(token, **PRESETS[token])
    kwargs: dict[str, Any] = {}
    for part in token.split("+"):
        if part in PRESETS:
            kwargs.update(PRESETS[part])
            continue
        key, sep, value = part.partition("=")
        if not sep or key not in _VARIANT_FIELDS:
            raise ConfigError(f"--variants: cannot parse {part!r} (known presets: {', '.join(PRESETS)}; "
                              f"fields: {', '.join(_VARIANT_FIELDS)})")
        kwargs[key] = float(value) if key.endswith(("temperature", "weight")) else value
    try:
        return Variant(token, **kwargs)
    except (TypeError, ValueError) as exc:
        raise ConfigError(f"--variants: {exc}") from exc


def _seeds(text: str, offset: int) -> list[int]:
    try:
        if "," in text:
            return [int(s) + offset for s in text.split(",") if s.strip()]
        n = int(text)
    except ValueError as exc:
        raise ConfigError(f"--seeds: expected a count or a comma-separated list, got {text!r}") from exc
    if n < 1:
        raise ConfigError("--seeds: count must be >= 1")
    return list(range(offset, offset + n))


def cmd_experiment(args, cfg: RunConfig) -> None:
    variants = [parse_variant(t) for t in args.variants.split(",") if t.strip()]
    if len(variants) < 2:
        raise ConfigError("--variants: need at least two variants")
    if len({v.name for v in variants}) != len(variants):
        raise ConfigError("--variants: duplicate variant names")
    for v in variants:
        try:
            v.apply(cfg.train_schedule())
        except ValueError as exc:
            raise ConfigError(f"--variants: {v.name}: {exc}") from exc
    seeds = _seeds(args.seeds, args.seed or 0)
    out = _out_dir(args.out)
    rows = run_experiment(variants, seeds, replace(cfg.synth, seed=0), cfg.train_schedule(), workers=args.workers)
    io.write_comparison(rows, summarize(rows), out / "comparison.csv")


def cmd_eval(args, cfg: RunConfig) -> None:
    dets = io.detections_from_json(io.load_json(args.detections), str(args.detections))
    gts = io.ground_truth_from_json(io.load_json(args.ground_truth), str(args.ground_truth))
    out = Path(args.out)
    if out.suffix != ".csv":
        out = _out_dir(args.out) / "eval.csv"
    io.write_eval(mean_ap(dets, gts, cfg.eval_thresholds), out)


# ------------------------------------------------------------------ parser


def _common(p: argparse.ArgumentParser) -> None:
    p.add_argument("--config", help="JSON config with synth/proposals/fusion/schedule/eval sections")
    p.add_argument("--seed", type=int, help="random seed (dataset and model initialization)")
    p.add_argument("--train-temperature", type=float, help="fusion temperature for pseudo labels (default 0.1)")
    p.add_argument("--test-temperature", type=float, help="fusion temperature for detections (default 0.03)")
    p.add_argument("--h-fuse", type=float, help="IoU grouping threshold (default 0.7)")
    p.add_argument("--alpha", type=float, help="outer margin ratio (default 0.25)")
    p.add_argument("--w-mode", choices=[m.value for m in WMode])
    p.add_argument("--fusion-mode", choices=[m.value for m in FusionMode])
    p.add_argument("--label-mode", choices=[m.value for m in LabelMode])
    p.add_argument("-v", "--verbose", action="store_true")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="linpro-tal", description="Weakly supervised temporal localization toolkit")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("synth", help="generate a synthetic dataset")
    _common(p)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_synth)

    p = sub.add_parser("pipeline", help="proposals, fusion and pseudo labels for one TCAM")
    _common(p)
    p.add_argument("--tcam", required=True, help="JSON {l, K, scores (row-major), [video_scores]}")
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_pipeline)

    p = sub.add_parser("train", help="self-training run on a synthetic dataset")
    _common(p)
    p.add_argument("--data", help="dataset directory from `synth` (generated from the config when omitted)")
    p.add_argument("--epochs", type=int)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_train)

    p = sub.add_parser("experiment", help="compare variants across seeds")
    _common(p)
    p.add_argument("--variants", required=True, help="comma-separated presets or key=value+key=value specs")
    p.add_argument("--seeds", default="3", help="seed count, or comma-separated seeds")
    p.add_argument("--epochs", type=int)
    p.add_argument("--workers", type=int, default=1)
    p.add_argument("--out", required=True)
    p.set_defaults(func=cmd_experiment)

    p = sub.add_parser("eval", help="score detections against ground truth")
    _common(p)
    p.add_argument("--detections", required=True)
    p.add_argument("--ground-truth", required=True)
    p.add_argument("--out", required=True, help="output CSV path, or a directory for eval.csv")
    p.set_defaults(func=cmd_eval)
    return parser


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        raw = io.load_json(args.config) if args.config else None
        cfg = load_config(raw, args)
        args.func(args, cfg)
    except (FloatingPointError, SimplexError, np.linalg.LinAlgError) as exc:
        print(f"linpro-tal: numerical failure: {exc}", file=sys.stderr)
        return EXIT_NUMERIC
    except (ValueError, KeyError, TypeError, OSError) as exc:
        print(f"linpro-tal: error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    return EXIT_OK


if __name__ == "__main__":  # pragma: no cover
    sys.exit(main())
