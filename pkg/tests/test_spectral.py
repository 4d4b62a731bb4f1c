import json
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from hypothesis.extra.numpy import arrays

from btm_disagg.errors import DisaggregationError
from btm_disagg.exemplar import demand_profiles, solar_profiles
from btm_disagg.spectral import (
    build_similarity_graph,
    cluster_profiles,
    debug_dump,
    hubert_gamma,
    knee_point,
    local_scales,
    normalized_affinity,
    select_cluster_count,
    spectral_embed,
)


def test_identical_vertices_weight_one():
    g = build_similarity_graph([[1.0, 2.0], [1.0, 2.0], [5.0, 5.0]])
    assert g.weights[0, 1] == 1.0


def test_weight_is_e_inverse_at_unit_scaled_distance():
    # two points: each one's only neighbour is the other, so rho_i = rho_j = d
    g = build_similarity_graph([[0.0, 0.0], [3.0, 4.0]])
    np.testing.assert_allclose(g.scales, [5.0, 5.0])
    assert g.weights[0, 1] == pytest.approx(math.exp(-1.0), abs=1e-15)


def test_three_point_hand_oracle():
    pts = np.array([[0.0, 0.0], [1.0, 0.0], [0.0, 2.0]])
    # n <= 7: each rho is the distance to the farthest other point
    rho = np.array([2.0, math.sqrt(5.0), math.sqrt(5.0)])
    d2 = np.array([[0, 1, 4], [1, 0, 5], [4, 5, 0]], dtype=float)
    expect = np.exp(-d2 / np.outer(rho, rho))
    g = build_similarity_graph(pts)
    np.testing.assert_allclose(g.scales, rho, rtol=1e-15)
    np.testing.assert_allclose(g.weights, expect, atol=1e-12)


def test_seventh_neighbour_scale():
    pts = np.arange(12, dtype=float)[:, None]
    rho = local_scales(pts)
    # point 0: neighbours at distances 1..11, seventh is 7
    assert rho[0] == 7.0
    assert rho[6] == 4.0


def test_duplicate_set_is_flagged_not_fatal():
    with pytest.warns(RuntimeWarning):
        g = build_similarity_graph(np.ones((4, 3)))
    assert g.degenerate
    assert np.all(g.weights == 1.0)


def test_graph_needs_two_profiles():
    with pytest.raises(DisaggregationError):
        build_similarity_graph([[1.0, 2.0]])


@settings(max_examples=40, deadline=None)
@given(arrays(np.float64, st.tuples(st.integers(2, 12), st.integers(1, 5)), elements=st.floats(-50, 50)))
def test_graph_and_affinity_invariants(pts):
    if np.ptp(pts, axis=0).max() == 0:
        return  # all-duplicate sets are covered separately
    g = build_similarity_graph(pts)
    w = g.weights
    assert np.all(w > 0) and np.all(w <= 1.0)
    np.testing.assert_array_equal(np.diag(w), 1.0)
    np.testing.assert_array_equal(w, w.T)
    lam = np.linalg.eigvalsh(normalized_affinity(g))
    assert np.max(np.abs(lam)) <= 1.0 + 1e-9


def test_affinity_unit_degrees():
    np.testing.assert_array_equal(normalized_affinity(np.array([[0.0, 1.0], [1.0, 0.0]])), [[0, 1], [1, 0]])


def test_affinity_arithmetic():
    np.testing.assert_allclose(normalized_affinity(np.full((2, 2), 2.0)), np.full((2, 2), 0.5))


def test_affinity_elementwise_oracle():
    rng = np.random.default_rng(0)
    a = rng.uniform(0.1, 1.0, (4, 4))
    w = (a + a.T) / 2
    d = w.sum(axis=1)
    expect = np.array([[w[i, j] / math.sqrt(d[i] * d[j]) for j in range(4)] for i in range(4)])
    np.testing.assert_allclose(normalized_affinity(w), expect, atol=1e-12)


def test_affinity_zero_degree():
    with pytest.raises(DisaggregationError):
        normalized_affinity(np.array([[0.0, 0.0], [0.0, 1.0]]))


def test_embedding_full_rank_rows_unit():
    rng = np.random.default_rng(1)
    a = rng.uniform(0.1, 1.0, (5, 5))
    e = spectral_embed(normalized_affinity((a + a.T) / 2), 5)
    np.testing.assert_allclose(np.linalg.norm(e, axis=1), 1.0)
    assert np.linalg.matrix_rank(e) == 5


def test_embedding_blocks():
    eps = 1e-9
    w = np.array([[1, 0.9, eps, eps], [0.9, 1, eps, eps], [eps, eps, 1, 0.8], [eps, eps, 0.8, 1]])
    e = spectral_embed(normalized_affinity(w), 2)
    np.testing.assert_allclose(e[0], e[1], atol=1e-6)
    np.testing.assert_allclose(e[2], e[3], atol=1e-6)
    assert np.linalg.norm(e[0] - e[2]) > 0.5


def test_embedding_identity_k1():
    e = spectral_embed(np.eye(4), 1)
    np.testing.assert_allclose(np.linalg.norm(e, axis=1)[np.linalg.norm(e, axis=1) > 0], 1.0)


def test_embedding_k_range():
    with pytest.raises(DisaggregationError):
        spectral_embed(np.eye(3), 4)
    with pytest.raises(DisaggregationError):
        spectral_embed(np.eye(3), 0)


def test_gamma_single_cluster_is_zero():
    pts = np.random.default_rng(2).normal(size=(5, 3))
    assert hubert_gamma(pts, np.zeros(5, dtype=int), pts.mean(axis=0, keepdims=True)) == 0.0


def test_gamma_two_singletons():
    pts = np.array([[0.0, 0.0], [3.0, 4.0]])
    assert hubert_gamma(pts, np.array([0, 1]), pts) == pytest.approx(25.0)


def test_gamma_double_loop_oracle():
    rng = np.random.default_rng(3)
    pts = rng.normal(size=(6, 2))
    labels = np.array([0, 1, 2, 0, 1, 2])
    centers = np.array([pts[labels == c].mean(axis=0) for c in range(3)])
    total, pairs = 0.0, 0
    for i in range(6):
        for j in range(i + 1, 6):
            total += np.linalg.norm(pts[i] - pts[j]) * np.linalg.norm(centers[labels[i]] - centers[labels[j]])
            pairs += 1
    assert hubert_gamma(pts, labels, centers) == pytest.approx(total / pairs, abs=1e-12)


def test_gamma_needs_two_vertices():
    with pytest.raises(DisaggregationError):
        hubert_gamma(np.ones((1, 2)), np.array([0]), np.ones((1, 2)))


def test_linear_curve_tie_goes_to_smallest():
    assert knee_point({k: 3.0 * k for k in range(2, 9)}) == 3


def test_knee_picks_sharpest_bend():
    curve = {2: 1.0, 3: 2.0, 4: 3.0, 5: 3.1, 6: 3.2}
    assert knee_point(curve) == 4


def _planted(rng, centers, per, noise):
    return np.vstack([c + noise * rng.normal(size=(per, len(c))) for c in centers])


def test_planted_partition_is_recovered():
    rng = np.random.default_rng(4)
    centers = np.eye(3) * 10
    pts = _planted(rng, centers, 8, 0.1)
    res = cluster_profiles(pts, 3, seed=0)
    truth = np.repeat(np.arange(3), 8)
    # same partition up to relabelling
    for c in range(3):
        assert len(set(res.labels[truth == c])) == 1
    assert len(set(res.labels)) == 3
    assert res.k == 3 and res.embedding.shape == (24, 3)


def test_cluster_pipeline_deterministic():
    pts = np.random.default_rng(5).normal(size=(20, 4))
    a = cluster_profiles(pts, 3, seed=9)
    b = cluster_profiles(pts, 3, seed=9)
    np.testing.assert_array_equal(a.labels, b.labels)


def test_select_cluster_count_range():
    with pytest.raises(DisaggregationError):
        select_cluster_count(np.random.default_rng(6).normal(size=(5, 2)), 5)


def test_select_planted_counts_on_feeder(year_feeder):
    _, demand = demand_profiles(year_feeder)
    _, solar = solar_profiles(year_feeder)
    assert select_cluster_count(demand, 8, seed=0).k == 4
    res = select_cluster_count(solar, 8, seed=0)
    assert res.k == 3
    assert sorted(res.gamma_curve) == list(range(2, 9))


def test_debug_dump(tmp_path):
    pts = np.random.default_rng(7).normal(size=(6, 2))
    res = cluster_profiles(pts, 2, seed=0)
    debug_dump(pts, res, tmp_path / "dump.json")
    data = json.loads((tmp_path / "dump.json").read_text())
    assert set(data) >= {"W", "L", "E", "gamma_curve", "labels"}
    assert len(data["W"]) == 6
