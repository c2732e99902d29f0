from __future__ import annotations

import random

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linpro_tal import kernels
from linpro_tal.core import ActionInstance
from linpro_tal.fusion import (
    FusionConfig,
    FusionMode,
    fuse_group,
    gaussian_weighted_fusion,
    nms,
    sampling_weights,
)
from oracles import greedy_groups, softmax_mean

A = ActionInstance.make


def triples(instances):
    return [(a.confidence, a.start, a.end) for a in instances]


def assert_triples(got, want, atol):
    assert len(got) == len(want)
    np.testing.assert_allclose(np.reshape(got, (-1, 3)), np.reshape(want, (-1, 3)), rtol=0, atol=atol)


@st.composite
def pools(draw, max_size=12):
    n = draw(st.integers(0, max_size))
    out = []
    for _ in range(n):
        s = draw(st.integers(0, 40))
        out.append(A(draw(st.integers(0, 1)), draw(st.floats(0.01, 1.0)), s, s + draw(st.integers(0, 12))))
    return out


def test_sampling_weights_examples():
    assert sampling_weights([0.7], 5.0).tolist() == [1.0]
    np.testing.assert_allclose(sampling_weights([0.5, 0.5], 0.1), [0.5, 0.5])
    np.testing.assert_allclose(sampling_weights([0.8, 0.6], 0.1), [0.8808, 0.1192], atol=1e-4)
    assert sampling_weights([1000.0, 0.0], 1e-3).sum() == pytest.approx(1.0)
    with pytest.raises(ValueError):
        sampling_weights([], 0.1)
    with pytest.raises(ValueError):
        sampling_weights([0.5], 0.0)


def test_fuse_group_examples():
    single = A(0, 0.7, 3, 9)
    assert fuse_group([single], 0.1) == single
    eq = fuse_group([A(0, 0.5, 10, 20), A(0, 0.5, 12, 22)], 0.1)
    assert (eq.confidence, eq.start, eq.end) == pytest.approx((0.5, 11, 21))
    f = fuse_group([A(0, 0.8, 10, 20), A(0, 0.6, 12, 22)], 0.1)
    assert (f.confidence, f.start, f.end) == pytest.approx((0.7762, 10.238, 20.238), abs=1e-3)
    with pytest.raises(ValueError):
        fuse_group([], 0.1)
    with pytest.raises(ValueError):
        fuse_group([A(0, 0.5, 0, 1), A(1, 0.5, 0, 1)], 0.1)


def test_fusion_and_nms_examples():
    pool = [A(0, 0.8, 10, 20), A(0, 0.6, 12, 22), A(0, 0.5, 40, 50)]
    out = gaussian_weighted_fusion(pool, FusionConfig(h_fuse=0.5, temperature=0.1))
    assert_triples(triples(out), [(0.7762, 10.238, 20.238), (0.5, 40, 50)], 1e-3)
    assert triples(nms(pool, 0.5)) == [(0.8, 10, 20), (0.5, 40, 50)]
    assert gaussian_weighted_fusion([], FusionConfig()) == [] and nms([], 0.5) == []
    disjoint = [A(0, 0.9, 0, 5), A(0, 0.4, 30, 35)]
    assert gaussian_weighted_fusion(disjoint, FusionConfig()) == disjoint
    assert nms(disjoint, 0.5) == disjoint


def test_config_validation():
    for kwargs, field in [({"h_fuse": 0}, "h_fuse"), ({"h_fuse": 1}, "h_fuse"), ({"temperature": 0}, "temperature")]:
        with pytest.raises(ValueError, match=field):
            FusionConfig(**kwargs)
    with pytest.raises(ValueError):
        FusionConfig(mode="t-dist")


@given(pools(), st.floats(0.2, 0.9), st.floats(0.01, 10))
def test_fusion_matches_oracle(pool, h, T):
    cfg = FusionConfig(h_fuse=h, temperature=T)
    got = sorted(triples(gaussian_weighted_fusion(pool, cfg)))
    want = []
    for c in (0, 1):
        items = [(a.confidence, a.start, a.end) for a in pool if a.class_id == c]
        want += [softmax_mean(members, T) for _, members in greedy_groups(items, h)]
    assert_triples(got, sorted(want), 1e-9)


@given(pools(), st.floats(0.2, 0.9), st.floats(0.01, 10))
def test_counts_convexity_and_uniform(pool, h, T):
    g = gaussian_weighted_fusion(pool, FusionConfig(h_fuse=h, temperature=T))
    assert len(g) == len(nms(pool, h))
    u = gaussian_weighted_fusion(pool, FusionConfig(h_fuse=h, mode=FusionMode.UNIFORM))
    for c in (0, 1):
        groups = greedy_groups([(a.confidence, a.start, a.end) for a in pool if a.class_id == c], h)
        means = sorted(tuple(float(np.mean([m[i] for m in members])) for i in range(3)) for _, members in groups)
        assert_triples(sorted(triples(x for x in u if x.class_id == c)), means, 1e-12)
        # pair each fused output with its group through the oracle's fused value
        expected = sorted((softmax_mean(members, T), members) for _, members in groups)
        got = sorted(triples(x for x in g if x.class_id == c))
        for f, (_, members) in zip(got, expected):
            for i in range(3):
                assert min(m[i] for m in members) <= f[i] <= max(m[i] for m in members)


@given(pools(), st.floats(0.2, 0.9), st.randoms(use_true_random=False))
def test_permutation_invariance(pool, h, rnd):
    shuffled = list(pool)
    rnd.shuffle(shuffled)
    cfg = FusionConfig(h_fuse=h)
    assert sorted(triples(gaussian_weighted_fusion(pool, cfg))) == sorted(triples(gaussian_weighted_fusion(shuffled, cfg)))


def test_output_sorted_and_per_class():
    pool = [A(0, 0.5, 0, 10), A(1, 0.9, 0, 10), A(1, 0.3, 1, 10)]
    out = gaussian_weighted_fusion(pool, FusionConfig())
    assert [a.class_id for a in out] == [1, 0]  # classes never fuse with each other
    assert [a.confidence for a in out] == sorted((a.confidence for a in out), reverse=True)


@pytest.mark.skipif(not kernels.HAVE_EXTENSION, reason="compiled kernels not built")
def test_grouping_backends_agree():
    from linpro_tal import _fallback, _kernels

    rng = random.Random(3)
    for _ in range(200):
        n = rng.randint(0, 30)
        s = np.array([rng.randint(0, 50) + rng.random() * (rng.random() < 0.3) for _ in range(n)])
        e = s + np.array([rng.randint(0, 10) for _ in range(n)], dtype=float)
        thr = rng.uniform(0.1, 0.9)
        assert _fallback.greedy_groups(s, e, thr).tolist() == _kernels.greedy_groups(s, e, thr).tolist()
