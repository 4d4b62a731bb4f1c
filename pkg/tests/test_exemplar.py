import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btm_disagg.dataset import FeederDataset, PowerSeries
from btm_disagg.errors import DisaggregationError
from btm_disagg.exemplar import (
    ExemplarLibrary,
    build_candidate_library,
    compose,
    demand_profiles,
    library_from_json,
    library_to_json,
    solar_profiles,
)
from btm_disagg.spectral import ClusteringResult

from .conftest import START


def _clusters(labels):
    labels = np.asarray(labels)
    k = int(labels.max()) + 1
    return ClusteringResult(labels=labels, k=k, embedding=np.zeros((len(labels), k)), centers=np.zeros((k, 1)))


def _dataset(demand_rows, solar_rows):
    demand = {f"P{i}": PowerSeries(START, row, "native_demand") for i, row in enumerate(demand_rows)}
    pairs = {
        f"G{j}": (PowerSeries(START, np.ones(len(row)), "native_demand"), PowerSeries(START, row, "solar_injection"))
        for j, row in enumerate(solar_rows)
    }
    return FeederDataset(observed_demand=demand, observed_pairs=pairs)


def _window(n):
    return START, START + pd.Timedelta(hours=n - 1)


def test_single_member_cluster_is_that_customer():
    rng = np.random.default_rng(0)
    rows = rng.uniform(0, 3, (3, 6))
    ds = _dataset(rows, [-np.ones(6)])
    lib = build_candidate_library(ds, _clusters([0, 1, 1]), _clusters([0]), _window(6))
    np.testing.assert_array_equal(lib.demand[0], rows[0])


def test_two_constant_members_average():
    ds = _dataset([np.full(4, 2.0), np.full(4, 4.0)], [-np.ones(4)])
    lib = build_candidate_library(ds, _clusters([0, 0]), _clusters([0]), _window(4))
    np.testing.assert_array_equal(lib.demand[0], np.full(4, 3.0))


def test_per_sample_mean_oracle():
    rng = np.random.default_rng(1)
    d = rng.uniform(0, 3, (5, 10))
    g = -rng.uniform(0, 4, (4, 10))
    labels_d, labels_g = [0, 1, 0, 2, 1], [1, 0, 1, 1]
    ds = _dataset(d, g)
    first = START + pd.Timedelta(hours=2)
    lib = build_candidate_library(ds, _clusters(labels_d), _clusters(labels_g), (first, first + pd.Timedelta(hours=5)))
    assert lib.T == 6 and lib.M == 3 and lib.N == 2
    for c in range(3):
        for t in range(6):
            vals = [d[i, t + 2] for i in range(5) if labels_d[i] == c]
            assert lib.demand[c, t] == pytest.approx(sum(vals) / len(vals), abs=1e-12)
    for c in range(2):
        members = [j for j in range(4) if labels_g[j] == c]
        np.testing.assert_allclose(lib.solar[c], g[members, 2:8].mean(axis=0), atol=1e-12)
    assert np.all(lib.solar <= 0)


def test_empty_cluster_is_an_error():
    ds = _dataset([np.ones(3), np.ones(3)], [-np.ones(3)])
    bad = ClusteringResult(labels=np.array([0, 0]), k=2, embedding=np.zeros((2, 2)), centers=np.zeros((2, 1)))
    with pytest.raises(DisaggregationError, match="no members"):
        build_candidate_library(ds, bad, _clusters([0]), _window(3))


def _lib(M=3, N=2, T=8, seed=0):
    rng = np.random.default_rng(seed)
    return ExemplarLibrary(START, rng.uniform(0, 3, (M, T)), -rng.uniform(0, 4, (N, T)), {})


def test_one_hot_returns_candidate():
    lib = _lib()
    comp = compose(lib, [0, 1, 0], [1, 0])
    np.testing.assert_array_equal(comp.demand, lib.demand[1])
    np.testing.assert_array_equal(comp.solar, lib.solar[0])


def test_uniform_is_plain_mean():
    lib = _lib()
    comp = compose(lib, np.full(3, 1 / 3), [0.5, 0.5])
    np.testing.assert_allclose(comp.demand, lib.demand.mean(axis=0), atol=1e-12)
    np.testing.assert_allclose(comp.solar, lib.solar.mean(axis=0), atol=1e-12)


def _simplex(rng, n):
    return rng.dirichlet(np.ones(n))


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_composite_is_convex_combination(seed):
    rng = np.random.default_rng(seed)
    lib = _lib(M=4, N=3, T=12, seed=seed)
    w, v = _simplex(rng, 4), _simplex(rng, 3)
    comp = compose(lib, w, v)
    # dot-product oracle
    for t in range(lib.T):
        assert comp.demand[t] == pytest.approx(sum(w[i] * lib.demand[i, t] for i in range(4)), abs=1e-12)
    # inside the candidates' pointwise hull
    assert np.all(comp.demand >= lib.demand.min(axis=0) - 1e-12)
    assert np.all(comp.demand <= lib.demand.max(axis=0) + 1e-12)
    assert np.all(comp.solar <= 1e-12)
    # linear in the weights
    w2 = _simplex(rng, 4)
    mix = compose(lib, 0.3 * w + 0.7 * w2, v).demand
    np.testing.assert_allclose(mix, 0.3 * comp.demand + 0.7 * compose(lib, w2, v).demand, atol=1e-12)


@pytest.mark.parametrize("omega", [[0.5, 0.5, 0.5], [1.2, -0.2, 0.0], [0.5, 0.5]])
def test_off_simplex_weights_rejected(omega):
    with pytest.raises(DisaggregationError):
        compose(_lib(), omega, [0.5, 0.5])


def test_json_round_trip():
    lib = _lib()
    lib = ExemplarLibrary(lib.start, lib.demand, lib.solar, {"demand": {0: ["a"], 1: ["b", "c"]}, "solar": {0: ["g"]}})
    back = library_from_json(library_to_json(lib))
    assert back.start == lib.start
    np.testing.assert_array_equal(back.demand, lib.demand)
    np.testing.assert_array_equal(back.solar, lib.solar)
    assert back.membership == lib.membership


def test_profiles_shapes(small_feeder):
    ids, prof = demand_profiles(small_feeder)
    assert prof.shape == (len(ids), 24)
    ids, prof = solar_profiles(small_feeder)
    assert np.allclose(prof.max(axis=1), 1.0)
    assert np.all(prof >= 0)
