import itertools
import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from btm_disagg.errors import DisaggregationError
from btm_disagg.exemplar import ExemplarLibrary, compose
from btm_disagg.rgvp import (
    RegretUpdate,
    accumulate,
    candidate_trials,
    init_weights,
    learning_rate,
    potential,
    softmax_weights,
    step,
    trajectory_csv,
    update_weights,
)
from btm_disagg.sss import residual_l1, separate, separate_many

from .conftest import START

HOURS = np.arange(24)
DEMAND = 1.0 + 0.5 * np.sin(2 * np.pi * HOURS / 24)
SOLAR = -np.clip(np.sin(np.pi * (HOURS - 6) / 12), 0, None)


# --- separation ----------------------------------------------------------


def test_exact_model_is_recovered():
    res = separate(DEMAND, SOLAR, 2 * DEMAND + SOLAR)
    assert res.alpha == pytest.approx(2.0, abs=1e-10)
    assert res.beta == pytest.approx(1.0, abs=1e-10)
    assert res.residual_l1 < 1e-9
    assert res.sign_ok and res.condition_flag == "well_conditioned"


def test_orthogonal_solar_gets_zero():
    p = np.array([1.0, 1.0, 0.0, 0.0])
    g = np.array([0.0, 0.0, -1.0, 1.0])
    res = separate(p, g, p)
    assert res.alpha == pytest.approx(1.0, abs=1e-12)
    assert res.beta == pytest.approx(0.0, abs=1e-12)


def test_reconstruction_identity():
    rng = np.random.default_rng(0)
    res = separate(DEMAND, SOLAR, rng.normal(size=24))
    np.testing.assert_array_equal(res.demand_hat + res.solar_hat, res.net_hat)
    np.testing.assert_array_equal(res.demand_hat, res.alpha * DEMAND)


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2**31 - 1))
def test_separation_beats_grid_neighbours(seed):
    rng = np.random.default_rng(seed)
    p = rng.uniform(0.2, 3, 48)
    g = -rng.uniform(0, 4, 48)
    n = rng.normal(size=48) * 3
    res = separate(p, g, n)
    best = np.sum((res.alpha * p + res.beta * g - n) ** 2)
    for da, db in itertools.product(np.linspace(-1e-4, 1e-4, 5), repeat=2):
        assert np.sum(((res.alpha + da) * p + (res.beta + db) * g - n) ** 2) >= best - 1e-9 * max(best, 1)


def test_scale_equivariance():
    rng = np.random.default_rng(1)
    n = rng.normal(size=24)
    a = separate(DEMAND, SOLAR, n)
    b = separate(3 * DEMAND, 0.5 * SOLAR, n)
    assert b.alpha == pytest.approx(a.alpha / 3, rel=1e-9)
    assert b.beta == pytest.approx(a.beta / 0.5, rel=1e-9)
    np.testing.assert_allclose(b.net_hat, a.net_hat, atol=1e-12)


def test_residual_l1_arithmetic():
    assert residual_l1([1.0, 2.0], [0.0, 0.0]) == 3.0


def test_separation_errors():
    with pytest.raises(DisaggregationError):
        separate(DEMAND, SOLAR[:10], DEMAND)
    with pytest.raises(DisaggregationError, match="zero"):
        separate(np.zeros(5), np.zeros(5), np.ones(5))


def test_batch_matches_single():
    rng = np.random.default_rng(2)
    d = rng.uniform(0, 2, (5, 24))
    g = -rng.uniform(0, 2, (5, 24))
    n = rng.normal(size=24)
    coef, _, res = separate_many(d, g, n)
    for i in range(5):
        one = separate(d[i], g[i], n)
        assert coef[i, 0] == pytest.approx(one.alpha, abs=1e-10)
        assert coef[i, 1] == pytest.approx(one.beta, abs=1e-10)
        assert res[i] == pytest.approx(one.residual_l1, rel=1e-9)


# --- weights -------------------------------------------------------------


def test_init_uniform():
    s = init_weights(4, 3, 96)
    np.testing.assert_array_equal(s.omega, np.full(4, 0.25))
    np.testing.assert_allclose(s.theta, np.full(3, 1 / 3))
    assert s.R_p.tolist() == [0, 0, 0, 0] and s.R_g.tolist() == [0, 0, 0]
    assert s.lambda_demand == pytest.approx(math.sqrt(8 * math.log(4) / 96))


def test_learning_rate_arithmetic():
    assert learning_rate(2, 8) == pytest.approx(math.sqrt(math.log(2)))
    s = init_weights(1, 1, 24)
    assert s.lambda_demand == 0.0 and s.lambda_solar == 0.0
    np.testing.assert_array_equal(s.omega, [1.0])


def test_init_errors():
    with pytest.raises(DisaggregationError):
        init_weights(0, 2, 24)
    with pytest.raises(DisaggregationError):
        init_weights(2, 2, 1)


def test_softmax_arithmetic():
    np.testing.assert_allclose(softmax_weights([1.0, 0.0], math.log(2)), [2 / 3, 1 / 3], atol=1e-15)


@settings(max_examples=60, deadline=None)
@given(
    st.lists(st.floats(-1e3, 1e3), min_size=1, max_size=8),
    st.floats(0.01, 5),
    st.floats(-1e3, 1e3),
)
def test_softmax_properties(r, lam, shift):
    r = np.array(r)
    w = softmax_weights(r, lam)
    assert np.all(w >= 0) and abs(w.sum() - 1) < 1e-12
    np.testing.assert_allclose(softmax_weights(r + shift, lam), w, atol=1e-9)
    # larger regret never gets less weight
    order = np.argsort(r, kind="stable")
    assert np.all(np.diff(w[order]) >= -1e-12)


def test_softmax_is_gradient_of_potential():
    rng = np.random.default_rng(3)
    for _ in range(20):
        r = rng.normal(size=5) * 10
        lam = rng.uniform(0.05, 2)
        h = 1e-6
        grad = [(potential(r + h * e, lam) - potential(r - h * e, lam)) / (2 * h) for e in np.eye(5)]
        np.testing.assert_allclose(grad, softmax_weights(r, lam), atol=1e-6)


def test_non_finite_regret():
    with pytest.raises(DisaggregationError):
        softmax_weights([np.inf, 0.0], 1.0)


def test_single_candidates_stay_pinned():
    s = init_weights(1, 3, 24)
    upd = RegretUpdate.from_residuals(1.0, [1.0], [0.5, 2.0, 1.0])
    s = update_weights(accumulate(s, upd))
    assert s.omega.tolist() == [1.0]
    assert s.theta[0] > s.theta[2] > s.theta[1]


def test_accumulate_adds_and_checks_shape():
    s = init_weights(2, 2, 24)
    upd = RegretUpdate.from_residuals(2.0, [1.0, 3.0], [2.0, 2.5])
    s = accumulate(accumulate(s, upd), upd)
    np.testing.assert_array_equal(s.R_p, [2.0, -2.0])
    np.testing.assert_array_equal(s.R_g, [0.0, -1.0])
    with pytest.raises(DisaggregationError):
        accumulate(s, RegretUpdate.from_residuals(1.0, [1.0], [1.0, 1.0]))


def test_candidate_trials_scripted():
    d = np.vstack([DEMAND, np.roll(DEMAND, 6)])
    g = np.vstack([SOLAR, np.roll(SOLAR, 3)])
    lib = ExemplarLibrary(START, d, g, {})
    p_n = 1.5 * d[0] + 0.8 * g[1]
    comp = compose(lib, [0.5, 0.5], [0.5, 0.5])
    upd = candidate_trials(lib, comp, p_n)
    # oracle: each trial is a separate two-column fit
    def fit(p, q):
        coef = np.linalg.lstsq(np.column_stack([p, q]), p_n, rcond=None)[0]
        return np.abs(coef[0] * p + coef[1] * q - p_n).sum()

    e_c = fit(comp.demand, comp.solar)
    assert upd.e_composite == pytest.approx(e_c, rel=1e-8)
    for i in range(2):
        assert upd.e_demand_candidates[i] == pytest.approx(fit(d[i], comp.solar), rel=1e-8)
        assert upd.e_solar_candidates[i] == pytest.approx(fit(comp.demand, g[i]), rel=1e-8)
    np.testing.assert_allclose(upd.r_p, e_c - upd.e_demand_candidates, rtol=1e-8)
    # the matching candidates must look better than the composite
    assert upd.r_p[0] > 0 and upd.r_g[1] > 0


def test_streamed_steps_learn_the_right_candidates():
    d = np.vstack([DEMAND, np.roll(DEMAND, 6)])
    g = np.vstack([SOLAR, np.roll(SOLAR, 3)])
    lib = ExemplarLibrary(START, d, g, {})
    s = init_weights(2, 2, 24)
    for _ in range(30):
        s, _ = step(s, lib, 1.5 * d[0] + 0.8 * g[1])
    assert s.omega[0] > 0.9 and s.theta[1] > 0.9


def test_trajectory_rows():
    omega = np.full((3, 2), 0.5)
    theta = np.full((3, 3), 1 / 3)
    text = trajectory_csv(["a", "b", "c"], omega, theta, np.zeros((3, 2)), np.zeros((3, 3)))
    lines = text.strip().split("\n")
    assert lines[0] == "t,kind,index,weight,cum_regret"
    assert len(lines) == 1 + 3 * (2 + 3)

