"""JSON/CSV readers and writers for every artifact the CLI produces.

Floats are written with ``repr`` (shortest round-trip form), so every value
reads back bit-identical.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path
from typing import Any, Iterable, Mapping, Sequence

import numpy as np

from .core import ActionInstance, Tcam, TemporalInterval, VideoRecord
from .evaluation import EvalResult, GroundTruth
from .linpro import PseudoLabel
from .synthtrain import METRIC_COLUMNS, ExperimentRow, MetricHistory, ToyModel


class SchemaError(ValueError):
    """A file does not follow its expected schema."""


def dump_json(obj: Any, path: Path) -> None:
    path = Path(path)
    path.write_text(json.dumps(obj, indent=1, sort_keys=False) + "\n")


def load_json(path: Path) -> Any:
    try:
        return json.loads(Path(path).read_text())
    except json.JSONDecodeError as exc:
        raise SchemaError(f"{path}: not valid JSON ({exc})") from exc


def _require(d: Mapping, key: str, where: str):
    if not isinstance(d, Mapping) or key not in d:
        raise SchemaError(f"{where}: missing field {key!r}")
    return d[key]


def _matrix(flat, rows: int, cols: int, where: str) -> np.ndarray:
    arr = np.asarray(flat, dtype=np.float64)
    if arr.ndim != 1 or arr.size != rows * cols:
        raise SchemaError(f"{where}: expected {rows * cols} row-major values, got shape {arr.shape}")
    return arr.reshape(rows, cols)


# ------------------------------------------------------------------ TCAM


def tcam_to_json(tcam: Tcam, video_scores: Sequence[float] | None = None) -> dict:
    out = {"l": tcam.num_snippets, "K": tcam.num_classes, "scores": tcam.scores.ravel().tolist()}
    if video_scores is not None:
        out["video_scores"] = [float(x) for x in video_scores]
    return out


def tcam_from_json(d: Mapping, where: str = "tcam") -> tuple[Tcam, np.ndarray]:
    """Returns the TCAM and the video-level class scores (all ones when absent)."""
    l, K = int(_require(d, "l", where)), int(_require(d, "K", where))
    if l < 1 or K < 1:
        raise SchemaError(f"{where}: l and K must be >= 1")
    try:
        tcam = Tcam(_matrix(_require(d, "scores", where), l, K, f"{where}.scores"))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc
    scores = np.asarray(d.get("video_scores", np.ones(K)), dtype=np.float64)
    if scores.shape != (K,):
        raise SchemaError(f"{where}.video_scores: expected {K} values")
    return tcam, scores


# ------------------------------------------------------------ detections


def instance_to_json(a: ActionInstance) -> dict:
    return {"class": a.class_id, "confidence": a.confidence, "start": a.start, "end": a.end}


def instance_from_json(d: Mapping, where: str) -> ActionInstance:
    try:
        return ActionInstance.make(int(_require(d, "class", where)), float(_require(d, "confidence", where)),
                                   float(_require(d, "start", where)), float(_require(d, "end", where)))
    except (TypeError, ValueError) as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def detections_from_json(data, where: str = "detections") -> dict[str, list[ActionInstance]]:
    """A flat list is one video (id ``""``); a mapping is ``{video_id: list}``."""
    if isinstance(data, list):
        data = {"": data}
    if not isinstance(data, Mapping):
        raise SchemaError(f"{where}: expected a list or an object keyed by video id")
    return {str(vid): [instance_from_json(x, f"{where}[{vid!r}][{i}]") for i, x in enumerate(items)]
            for vid, items in data.items()}


def gt_to_json(gts: Iterable[GroundTruth]) -> list[dict]:
    return [{"class": c, "start": iv.start, "end": iv.end} for c, iv in gts]


def _gt_list(items, where: str) -> list[GroundTruth]:
    if not isinstance(items, list):
        raise SchemaError(f"{where}: expected a list")
    out = []
    for i, x in enumerate(items):
        try:
            out.append((int(_require(x, "class", f"{where}[{i}]")),
                        TemporalInterval(float(_require(x, "start", f"{where}[{i}]")), float(_require(x, "end", f"{where}[{i}]")))))
        except (TypeError, ValueError) as exc:
            raise SchemaError(f"{where}[{i}]: {exc}") from exc
    return out


def ground_truth_from_json(data, where: str = "ground_truth") -> dict[str, list[GroundTruth]]:
    """Accepts a flat list, ``{video_id: list}``, or a video record with a ``ground_truth`` field."""
    if isinstance(data, list):
        return {"": _gt_list(data, where)}
    if isinstance(data, Mapping) and "ground_truth" in data:
        return {"": _gt_list(data["ground_truth"], f"{where}.ground_truth")}
    if isinstance(data, Mapping):
        return {str(k): _gt_list(v, f"{where}[{k!r}]") for k, v in data.items()}
    raise SchemaError(f"{where}: unsupported ground-truth layout")


# ---------------------------------------------------------------- labels


def pseudo_label_to_json(label: PseudoLabel) -> dict:
    l, K = label.G.shape
    return {"l": l, "K": K, "G": label.G.ravel().tolist()}


def pseudo_label_from_json(d: Mapping, where: str = "pseudo_labels") -> PseudoLabel:
    l, K = int(_require(d, "l", where)), int(_require(d, "K", where))
    return PseudoLabel(_matrix(_require(d, "G", where), l, K, f"{where}.G"))


# ---------------------------------------------------------------- videos


def video_to_json(v: VideoRecord) -> dict:
    return {
        "id": v.id,
        "l": v.num_snippets,
        "features": v.features.ravel().tolist(),
        "feature_dim": v.features.shape[1],
        "labels": v.video_labels.tolist(),
        "ground_truth": gt_to_json(v.ground_truth),
    }


def video_from_json(d: Mapping, where: str = "video") -> VideoRecord:
    l = int(_require(d, "l", where))
    labels = _require(d, "labels", where)
    feats = np.asarray(_require(d, "features", where), dtype=np.float64)
    dim = int(d.get("feature_dim", feats.size // max(l, 1)))
    try:
        return VideoRecord(str(_require(d, "id", where)), l, _matrix(feats, l, dim, f"{where}.features"),
                           np.asarray(labels), tuple(_gt_list(_require(d, "ground_truth", where), f"{where}.ground_truth")))
    except ValueError as exc:
        raise SchemaError(f"{where}: {exc}") from exc


def write_dataset(videos: Sequence[VideoRecord], out_dir: Path, config: Mapping) -> None:
    out_dir = Path(out_dir)
    out_dir.mkdir(parents=True, exist_ok=True)
    files = []
    for v in videos:
        name = f"{v.id}.json"
        dump_json(video_to_json(v), out_dir / name)
        files.append({"id": v.id, "file": name, "l": v.num_snippets})
    dump_json({"num_videos": len(videos), "videos": files, "config": config}, out_dir / "manifest.json")


def read_dataset(data_dir: Path) -> tuple[list[VideoRecord], dict]:
    data_dir = Path(data_dir)
    manifest = load_json(data_dir / "manifest.json")
    entries = _require(manifest, "videos", "manifest.json")
    videos = [video_from_json(load_json(data_dir / e["file"]), e["file"]) for e in entries]
    return videos, manifest.get("config", {})


# ----------------------------------------------------------------- model


def model_to_json(model: ToyModel) -> dict:
    d, k1 = model.weights.shape
    return {"feature_dim": d, "num_outputs": k1, "weights": model.weights.ravel().tolist(), "bias": model.bias.tolist()}


def model_from_json(d: Mapping, where: str = "model") -> ToyModel:
    dim, k1 = int(_require(d, "feature_dim", where)), int(_require(d, "num_outputs", where))
    bias = np.asarray(_require(d, "bias", where), dtype=np.float64)
    if bias.shape != (k1,):
        raise SchemaError(f"{where}.bias: expected {k1} values")
    return ToyModel(_matrix(_require(d, "weights", where), dim, k1, f"{where}.weights"), bias)


# ------------------------------------------------------------------- CSV


def _cell(x) -> str:
    return repr(float(x)) if isinstance(x, (float, np.floating)) else str(x)


def write_csv(path: Path, header: Sequence[str], rows: Iterable[Sequence]) -> None:
    with open(path, "w", newline="") as f:
        w = csv.writer(f, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_cell(x) for x in r])


def read_csv(path: Path) -> list[dict[str, str]]:
    with open(path, newline="") as f:
        return list(csv.DictReader(f))


def write_metrics(history: MetricHistory, path: Path) -> None:
    write_csv(path, METRIC_COLUMNS, history.rows)


def read_metrics(path: Path) -> MetricHistory:
    rows = []
    for r in read_csv(path):
        rows.append(tuple(int(r[c]) if c in ("epoch", "renewed_flag") else float(r[c]) for c in METRIC_COLUMNS))
    return MetricHistory(rows)


EVAL_HEADER = ("metric", "class", "iou", "value")


def eval_rows(res: EvalResult) -> list[tuple]:
    rows: list[tuple] = []
    for c in sorted(res.per_class_ap):
        for thr, ap in res.per_class_ap[c].items():
            rows.append(("ap", c, thr, ap))
    for thr, m in res.map_at.items():
        rows.append(("map", "", thr, m))
    for band, m in res.averages.items():
        rows.append(("avg", "", band, m))
    return rows


def write_eval(res: EvalResult, path: Path) -> None:
    write_csv(path, EVAL_HEADER, eval_rows(res))


def read_eval(path: Path) -> EvalResult:
    res = EvalResult()
    for r in read_csv(path):
        if r["metric"] == "ap":
            res.per_class_ap.setdefault(int(r["class"]), {})[float(r["iou"])] = float(r["value"])
        elif r["metric"] == "map":
            res.map_at[float(r["iou"])] = float(r["value"])
        else:
            res.averages[r["iou"]] = float(r["value"])
    return res


COMPARISON_HEADER = ("variant", "seed", "map_030", "map_050", "map_070", "map_avg")


def write_comparison(rows: Sequence[ExperimentRow], summary: Mapping[str, Mapping[str, tuple[float, float]]], path: Path) -> None:
    body = [(r.variant, r.seed, r.map_030, r.map_050, r.map_070, r.map_avg) for r in rows]
    for name, cols in summary.items():
        body.append((name, "mean±std", *(f"{cols[c][0]!r}±{cols[c][1]!r}" for c in COMPARISON_HEADER[2:])))
    write_csv(path, COMPARISON_HEADER, body)
