from __future__ import annotations

from dataclasses import replace

import numpy as np
import pytest

from linpro_tal.synthtrain import (
    METRIC_COLUMNS,
    LabelMode,
    SynthConfig,
    TrainSchedule,
    ToyModel,
    Variant,
    generate_dataset,
    is_heldout,
    mil_loss,
    pooled_scores,
    pseudo_label,
    run_experiment,
    split,
    summarize,
    train,
)
from oracles import central_diff, rel_err

SMALL = SynthConfig(num_videos=12, snippet_range=(52, 70))
SHORT = TrainSchedule(total_epochs=12, pseudo_start_epoch=4, renewal_epochs=(6, 8, 10))


def test_dataset_is_deterministic_and_consistent():
    a, b = generate_dataset(SMALL), generate_dataset(SMALL)
    assert [v.id for v in a] == [v.id for v in b]
    assert all(np.array_equal(x.features, y.features) for x, y in zip(a, b))
    c = generate_dataset(replace(SMALL, seed=1))
    assert not np.array_equal(a[0].features, c[0].features)
    for v in a:
        lo, hi = SMALL.snippet_range
        assert lo <= v.num_snippets <= hi
        assert v.features.shape == (v.num_snippets, SMALL.feature_dim)
        classes = {g[0] for g in v.ground_truth}
        assert set(np.flatnonzero(v.video_labels)) == classes
        spans = sorted((g[1].start, g[1].end) for g in v.ground_truth)
        for (s1, e1), (s2, _) in zip(spans, spans[1:]):
            assert s2 - e1 > 1  # segments never touch
        for _, iv in v.ground_truth:
            assert 0 <= iv.start <= iv.end <= v.num_snippets - 1


def test_synth_config_validation_names_field():
    for kwargs, field in [({"segment_length_range": (10, 5)}, "segment_length_range"),
                          ({"segment_length_range": (4, 40)}, "segment_length_range"),
                          ({"num_videos": 0}, "num_videos"), ({"feature_dim": 3}, "feature_dim"),
                          ({"feature_noise_sigma": -1.0}, "feature_noise_sigma")]:
        with pytest.raises(ValueError, match=field):
            SynthConfig(**kwargs)


def test_schedule_validation():
    with pytest.raises(ValueError, match="renewal_epochs"):
        TrainSchedule(total_epochs=30)
    with pytest.raises(ValueError, match="renewal_epochs"):
        TrainSchedule(renewal_epochs=(30, 25))
    with pytest.raises(ValueError):
        TrainSchedule(label_mode="soft")


def test_split_is_stable():
    ids = [f"vid_{i:04d}" for i in range(400)]
    held = [i for i in ids if is_heldout(i)]
    assert 0.15 < len(held) / len(ids) < 0.35
    train_set, held_set = split(generate_dataset(SMALL))
    assert {v.id for v in held_set} == {v.id for v in generate_dataset(SMALL) if is_heldout(v.id)}
    assert not {v.id for v in train_set} & {v.id for v in held_set}


def test_mil_loss_gradient_matches_finite_differences():
    rng = np.random.default_rng(2)
    worst = 0.0
    for _ in range(100):
        l, K = int(rng.integers(1, 30)), int(rng.integers(1, 5))
        logits = rng.normal(0, 2, (l, K + 1))
        y = rng.integers(0, 2, K)
        ratio = float(rng.uniform(0.05, 1.0))
        _, grad = mil_loss(logits, y, ratio)
        fd = central_diff(lambda x: mil_loss(x, y, ratio)[0], logits)
        worst = max(worst, rel_err(grad, fd))
    assert worst < 1e-4


def test_pooled_scores_topk_mean():
    logits = np.array([[1.0, 0], [5.0, 0], [3.0, 0], [2.0, 0]])
    assert pooled_scores(logits, 0.5).tolist() == [4.0]   # k = 2: mean(5, 3)
    assert pooled_scores(logits, 0.01).tolist() == [5.0]  # k is at least 1


def test_pseudo_label_uses_only_video_classes():
    video = generate_dataset(SMALL)[0]
    rng = np.random.default_rng(0)
    model = ToyModel(rng.normal(size=(SMALL.feature_dim, SMALL.K + 1)), np.zeros(SMALL.K + 1))
    G = pseudo_label(model, video, SHORT).G
    absent = np.flatnonzero(video.video_labels == 0)
    assert not G[:, absent].any()
    assert np.all(G >= 0)


@pytest.mark.parametrize("mode", list(LabelMode))
def test_train_runs_and_logs(mode):
    data = generate_dataset(SMALL)
    model, hist = train(data, replace(SHORT, label_mode=mode), synth_seed=0)
    assert len(hist.rows) == SHORT.total_epochs
    assert [r[0] for r in hist.rows] == list(range(SHORT.total_epochs))
    assert hist.column("renewed_flag") == [int(e in SHORT.renewal_epochs) for e in range(SHORT.total_epochs)]
    delta = hist.column("delta_loss")
    if mode is LabelMode.NONE:
        assert all(d == 0.0 for d in delta)
    else:
        assert all(d == 0.0 for d in delta[:SHORT.pseudo_start_epoch])
        assert any(d != 0.0 for d in delta[SHORT.pseudo_start_epoch:])
    assert all(0.0 <= m <= 1.0 for m in hist.column("map_avg"))
    assert len(hist.rows[0]) == len(METRIC_COLUMNS)
    # same inputs, same numbers
    _, again = train(data, replace(SHORT, label_mode=mode), synth_seed=0)
    assert again.rows == hist.rows


def test_mil_training_reduces_loss():
    _, hist = train(generate_dataset(SMALL), replace(SHORT, label_mode=LabelMode.NONE))
    losses = hist.column("mil_loss")
    assert losses[-1] < losses[0]


def test_variants_and_summary():
    v = Variant("x", label_mode="raw_pseudo", test_fusion_mode="nms", train_temperature=0.2)
    s = v.apply(SHORT)
    assert (s.label_mode, s.test_fusion_cfg.mode.value, s.fusion_cfg.temperature) == (LabelMode.RAW_PSEUDO, "nms", 0.2)
    assert s.test_fusion_cfg.temperature == SHORT.test_fusion_cfg.temperature
    with pytest.raises(ValueError):
        run_experiment([v], [0])
    rows = run_experiment([Variant("a"), Variant("b", label_mode="none")], [0, 1], SMALL, SHORT)
    assert [(r.variant, r.seed) for r in rows] == [("a", 0), ("a", 1), ("b", 0), ("b", 1)]
    summary = summarize(rows)
    vals = [r.map_avg for r in rows if r.variant == "a"]
    assert summary["a"]["map_avg"] == pytest.approx((np.mean(vals), np.std(vals)))
