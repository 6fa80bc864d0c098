import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icwlab.exactdist import enumerate_law
from icwlab.model import ModelParams
from icwlab.sampler import (conditional_means, glauber_conditional_mean, glauber_run, glauber_step,
                            make_rng, sample_exact, sample_glauber)
from icwlab.weights import WeightSequence, for_size


def test_uncoupled_spins_have_mean_tanh_h():
    ws = for_size(WeightSequence([1, 2]), 10)
    h = 0.4
    batch = sample_exact(ws, ModelParams(0.0, h), 100_000, seed=3)
    spins = batch.configurations.astype(float).ravel()
    se = spins.std() / math.sqrt(spins.size)
    assert abs(spins.mean() - math.tanh(h)) < 4 * se


def test_sampled_statistics_match_exact_law():
    ws = for_size(WeightSequence([1, 2]), 12)
    p = ModelParams(0.3, 0.1)
    s, t = sample_exact(ws, p, 1_000_000, seed=11).statistics(ws)
    jd = enumerate_law(ws, p)
    keys = [(int(a), int(round(b))) for a, b in zip(jd.s, jd.t * ws.integer_scale)]
    index = {k: i for i, k in enumerate(keys)}
    counts = np.zeros(len(keys))
    np.add.at(counts, [index[(int(a), int(b))] for a, b in zip(s, t)], 1)
    tv = 0.5 * np.abs(counts / counts.sum() - jd.mass).sum()
    assert tv <= 0.01


def test_zero_field_magnetization_is_symmetric():
    ws = for_size(WeightSequence([1, 2]), 12)
    s, _ = sample_exact(ws, ModelParams(0.4, 0.0), 200_000, seed=5).statistics(ws)
    pos, neg = np.count_nonzero(s > 0), np.count_nonzero(s < 0)
    # sign test: under symmetry pos ~ Binomial(pos+neg, 1/2)
    m = pos + neg
    assert abs(pos - m / 2) <= 4 * math.sqrt(m) / 2


def test_same_seed_same_batch():
    ws = for_size(WeightSequence([1, 2]), 8)
    p = ModelParams(0.3, 0.1)
    a = sample_exact(ws, p, 500, seed=42).configurations
    b = sample_exact(ws, p, 500, seed=42).configurations
    c = sample_exact(ws, p, 500, seed=43).configurations
    assert np.array_equal(a, b) and not np.array_equal(a, c)


def test_streams_differ_by_chain_index():
    assert make_rng(9, 0).random() != make_rng(9, 1).random()
    assert make_rng(9, 2).random() == make_rng(9, 2).random()


def test_conditional_mean_hand_example():
    ws = WeightSequence([1, 1, 2])
    value = glauber_conditional_mean(ws, ModelParams(0.6, 0.1), [1, -1, 1], 0)
    assert value == pytest.approx(math.tanh(0.25), abs=1e-15)


def test_conditional_mean_without_field_or_neighbours():
    ws = WeightSequence([1, 1, 1])
    assert glauber_conditional_mean(ws, ModelParams(0.7, 0.0), [1, 1, -1], 0) == 0.0


@given(st.lists(st.sampled_from([-1, 1]), min_size=4, max_size=4), st.integers(0, 3), st.floats(-2, 2))
def test_conditional_mean_without_coupling(cfg, i, h):
    ws = WeightSequence([1, 2, 3, 4])
    assert glauber_conditional_mean(ws, ModelParams(0.0, h), cfg, i) == pytest.approx(math.tanh(h), abs=1e-15)


@given(st.lists(st.sampled_from([-1, 1]), min_size=5, max_size=5), st.integers(0, 4),
       st.floats(0, 2), st.floats(-1, 1))
def test_conditional_mean_is_gibbs_conditional(cfg, i, beta, h):
    # P(sigma_i = +1 | rest) from the ratio of the two full Gibbs weights
    w = [1.0, 2.0, 0.5, 1.5, 1.0]
    ws = WeightSequence(w)
    up, down = list(cfg), list(cfg)
    up[i], down[i] = 1, -1

    def logw(s):
        T = sum(a * b for a, b in zip(w, s))
        return beta * T * T / (2 * sum(w)) + h * sum(s)

    expected = math.tanh((logw(up) - logw(down)) / 2)
    assert glauber_conditional_mean(ws, ModelParams(beta, h), cfg, i) == pytest.approx(expected, abs=1e-13)


def test_vectorized_conditional_means_agree():
    ws = WeightSequence([1, 2, 0.5, 1.5])
    p = ModelParams(0.5, -0.2)
    cfgs = np.array([[1, -1, 1, 1], [-1, -1, 1, -1]], dtype=np.int8)
    table = conditional_means(ws, p, cfgs)
    for r, cfg in enumerate(cfgs):
        for i in range(4):
            assert table[r, i] == pytest.approx(glauber_conditional_mean(ws, p, cfg, i), abs=1e-15)


def test_single_step_resampling_frequency():
    ws = WeightSequence([1, 2, 3])
    p = ModelParams(0.8, 0.1)
    cfg = np.array([1, -1, 1], dtype=np.int8)
    rng = make_rng(1)
    ups = np.zeros(3)
    visits = np.zeros(3)
    for _ in range(60_000):
        pair = glauber_step(ws, p, cfg, rng)
        visits[pair.site] += 1
        ups[pair.site] += pair.resampled_spin == 1
        assert np.array_equal(np.delete(pair.partner(), pair.site), np.delete(cfg, pair.site))
    expected = np.array([(1 + glauber_conditional_mean(ws, p, cfg, i)) / 2 for i in range(3)])
    freq = ups / visits
    se = np.sqrt(expected * (1 - expected) / visits)
    assert np.all(np.abs(freq - expected) < 4 * se)


def test_single_site_chain():
    h = -0.3
    ws = WeightSequence([1])
    batch = sample_glauber(ws, ModelParams(0.5, h), 50_000, seed=2, burn_in=1, thin=1)
    spins = batch.configurations.ravel().astype(float)
    p_up = math.exp(h) / (2 * math.cosh(h))
    assert abs((spins == 1).mean() - p_up) < 4 * math.sqrt(p_up * (1 - p_up) / spins.size)


def test_chain_started_in_equilibrium_stays_there():
    ws = for_size(WeightSequence([1, 2]), 12)
    p = ModelParams(0.3, 0.1)
    start = sample_exact(ws, p, 2000, seed=8).configurations
    exact_mean = enumerate_law(ws, p).expect(lambda s, t: s)
    # 2000 chains x 50 updates = 10^5 heat-bath steps
    _, traj = glauber_run(ws, p, start, 50, make_rng(8, 1), record_s=True)
    s = traj[-1]
    assert abs(s.mean() - exact_mean) < 4 * s.std() / math.sqrt(s.size)
    drift = traj.mean(axis=1) - traj[0].mean()
    assert np.max(np.abs(drift)) < 4 * math.sqrt(2) * s.std() / math.sqrt(s.size)
