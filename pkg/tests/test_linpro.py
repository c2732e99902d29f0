from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from linpro_tal.core import ActionInstance
from linpro_tal.linpro import (
    INNER,
    NONE,
    OUTER,
    SLACK_PENALTY,
    ConstraintSystem,
    LpStatus,
    PseudoLabel,
    WMode,
    build_constraints,
    equivalence_average,
    generate_pseudo_label,
    solve_l1_lp,
)
from oracles import bfs_min_objective, random_system

A = ActionInstance.make


def system_from(spans, q, l, mode):
    return build_constraints([A(0, qi, s, e) for (s, e), qi in zip(spans, q)], l, 0.25, mode)


def test_build_constraints_single_instance():
    cs = build_constraints([A(0, 0.6, 4, 7)], 12, 0.25, WMode.NORMALIZED)
    col = cs.W[:, 0]
    np.testing.assert_allclose(col[4:8], 0.25)
    np.testing.assert_allclose(col[[3, 8]], -0.5)
    assert np.count_nonzero(col) == 6
    assert cs.memberships[:, 0].tolist() == [NONE] * 3 + [OUTER] + [INNER] * 4 + [OUTER] + [NONE] * 3
    lit = build_constraints([A(0, 0.6, 4, 7)], 12, 0.25, "literal")
    assert sorted(set(lit.W[:, 0].tolist())) == [-1.0, 0.0, 1.0]


def test_build_constraints_clipping_and_errors():
    cs = build_constraints([A(0, 0.5, 0, 3)], 4, 0.25)
    # both margins clip away: the column has only inner weights
    np.testing.assert_allclose(cs.W[:, 0], 0.25)
    with pytest.raises(ValueError):
        build_constraints([A(0, 0.5, 0, 3), A(1, 0.5, 0, 3)], 10)
    with pytest.raises(ValueError):
        build_constraints([A(0, 0.5, 2.2, 2.8)], 10)


def test_single_instance_solution_is_flat_inner_block():
    cs = build_constraints([A(0, 0.6, 4, 7)], 12)
    sol = solve_l1_lp(cs)
    assert sol.status is LpStatus.OPTIMAL
    assert sol.objective == pytest.approx(0.6 * 4)  # cheapest: mass only inside, mean 0.6
    g = equivalence_average(sol, cs)
    np.testing.assert_allclose(g[4:8], 0.6, atol=1e-12)
    np.testing.assert_allclose(np.delete(g, range(4, 8)), 0.0, atol=1e-12)


def test_empty_and_infeasible():
    empty = ConstraintSystem(np.zeros((5, 0)), np.zeros(0), np.zeros((5, 0), np.int8), 0.25, WMode.NORMALIZED)
    sol = solve_l1_lp(empty)
    assert sol.status is LpStatus.DEGENERATE_EMPTY and not sol.g.any()
    # identical intervals with different confidences cannot both hold exactly
    cs = build_constraints([A(0, 0.9, 2, 5), A(0, 0.3, 2, 5)], 10)
    sol = solve_l1_lp(cs)
    assert sol.status is LpStatus.RELAXED
    assert sol.slack_used.sum() == pytest.approx(0.6)
    assert np.all(sol.g >= 0)


def test_oracle_equivalence_small_batch():
    rng = np.random.default_rng(0)
    for i in range(40):
        spans, q, l = random_system(rng)
        cs = system_from(spans, q, l, WMode.NORMALIZED if i % 2 else WMode.LITERAL)
        sol = solve_l1_lp(cs)
        assert sol.objective == pytest.approx(bfs_min_objective(cs.W, cs.q, SLACK_PENALTY), abs=1e-6)


@given(st.integers(0, 2**31 - 1), st.sampled_from(list(WMode)))
def test_solution_properties(seed, mode):
    spans, q, l = random_system(np.random.default_rng(seed))
    cs = system_from(spans, q, l, mode)
    sol = solve_l1_lp(cs)
    assert np.all(sol.g >= 0)
    if sol.status is LpStatus.OPTIMAL:
        assert np.max(np.abs(cs.W.T @ sol.g - cs.q)) <= 1e-8
    avg = equivalence_average(sol, cs)
    assert abs(avg.sum() - sol.g.sum()) <= 1e-12
    np.testing.assert_allclose(cs.W.T @ avg, cs.W.T @ sol.g, atol=1e-8)
    # averaged labels are constant on each membership pattern
    for row in np.unique(cs.memberships, axis=0):
        members = np.all(cs.memberships == row, axis=1)
        assert np.ptp(avg[members]) <= 1e-12


def test_generate_pseudo_label_shapes_and_skips(caplog):
    fused = [A(0, 0.7, 2, 5), A(2, 0.4, 10, 14), A(1, -0.2, 0, 3), A(5, 0.5, 0, 2), A(1, 0.5, 2.2, 2.8)]
    label = generate_pseudo_label(fused, 20, 3)
    assert label.G.shape == (20, 3)
    np.testing.assert_allclose(label.G[2:6, 0], 0.7, atol=1e-12)
    np.testing.assert_allclose(label.G[10:15, 2], 0.4, atol=1e-12)
    assert not label.G[:, 1].any()
    assert "ignoring" in caplog.text
    assert not generate_pseudo_label([], 7, 2).G.any()


def test_pseudo_label_validation():
    with pytest.raises(ValueError):
        PseudoLabel(np.array([[-0.1]]))
    with pytest.raises(ValueError):
        PseudoLabel(np.zeros(3))
