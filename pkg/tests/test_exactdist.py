import itertools
import math

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st
from scipy.stats import binom

from icwlab.errors import SizeError
from icwlab.exactdist import (configuration_log_probs, configurations, dp_joint, enumerate_law,
                              exact_law, standardize)
from icwlab.landau import observables
from icwlab.model import ModelParams
from icwlab.weights import WeightSequence, for_size


def brute_force(w, beta, h):
    """(S, T) -> probability by explicit summation over all 2^n configurations."""
    w = list(w)
    ell = sum(w)
    table = {}
    for s in itertools.product((-1, 1), repeat=len(w)):
        S = sum(s)
        T = sum(a * b for a, b in zip(w, s))
        table[(S, round(T, 9))] = table.get((S, round(T, 9)), 0.0) + math.exp(beta * T * T / (2 * ell) + h * S)
    z = sum(table.values())
    return {k: v / z for k, v in table.items()}


def as_dict(jd):
    return {(int(s), round(float(t), 9)): float(m) for s, t, m in zip(jd.s, jd.t, jd.mass)}


def test_two_free_fair_spins():
    jd = exact_law(WeightSequence([1, 1]), ModelParams(0.0, 0.0))
    s_vals, s_mass = jd.marginal_s()
    assert dict(zip(s_vals.tolist(), s_mass.tolist())) == pytest.approx({-2: 0.25, 0: 0.5, 2: 0.25}, abs=1e-15)


@pytest.mark.parametrize("beta, h", [(0.0, 0.3), (2.0, -0.7), (0.5, 0.0)])
def test_single_spin(beta, h):
    jd = exact_law(WeightSequence([1]), ModelParams(beta, h))
    up = dict(zip(jd.s.tolist(), jd.mass.tolist()))[1]
    assert up == pytest.approx(math.exp(h) / (2 * math.cosh(h)), abs=1e-15)


def test_two_unequal_weights_at_unit_coupling():
    jd = exact_law(WeightSequence([1, 2]), ModelParams(1.0, 0.0))
    mass = {round(float(t)): float(m) for t, m in zip(jd.t, jd.mass)}
    z = 2 * math.exp(1.5) + 2 * math.exp(1 / 6)
    assert mass == pytest.approx({3: math.exp(1.5) / z, -3: math.exp(1.5) / z,
                                  1: math.exp(1 / 6) / z, -1: math.exp(1 / 6) / z}, rel=1e-14)


@pytest.mark.parametrize("beta, h", [(0.3, 0.1), (0.9, 0.0), (0.2, -0.4)])
def test_dp_equals_enumeration_mixed_weights(beta, h):
    ws = for_size(WeightSequence([1, 1, 2, 2]), 12)
    p = ModelParams(beta, h)
    a, b = as_dict(dp_joint(ws, p)), as_dict(enumerate_law(ws, p))
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) <= 1e-10


def test_enumeration_matches_explicit_summation():
    w = [1.0, 0.5, 2.0, 1.5, 1.0]
    jd = enumerate_law(WeightSequence(w), ModelParams(0.7, 0.2))
    assert as_dict(jd) == pytest.approx(brute_force(w, 0.7, 0.2), rel=1e-12)


def test_uncoupled_law_is_binomial():
    h, n = 0.35, 20
    jd = dp_joint(for_size(WeightSequence([1]), n), ModelParams(0.0, h))
    p_up = math.exp(h) / (2 * math.cosh(h))
    k = (jd.s + n) // 2
    assert np.allclose(jd.mass, binom.pmf(k, n, p_up), rtol=1e-12, atol=0)


def test_zero_field_law_is_symmetric():
    jd = dp_joint(for_size(WeightSequence([1, 2, 3]), 30), ModelParams(0.2, 0.0))
    table = jd.lookup()
    for (s, t), lm in table.items():
        assert lm == pytest.approx(table[(-s, -t)], abs=1e-12)


def test_uncoupled_standardization_is_exact():
    ws = for_size(WeightSequence([1]), 10)
    p = ModelParams(0.0, 0.0)
    ms = standardize(exact_law(ws, p), observables(ws, p, 10, check_regime=False))
    assert ms.mean == pytest.approx(0.0, abs=1e-15)
    assert ms.variance == pytest.approx(1.0, abs=1e-14)


def test_single_spin_kolmogorov_distance():
    # a fair spin standardizes to atoms at -1 and +1, so the largest gap is Phi(1) - 1/2
    ws = WeightSequence([1])
    p = ModelParams(0.0, 0.0)
    ms = standardize(exact_law(ws, p), observables(ws, p, 1, check_regime=False))
    assert ms.d_k == pytest.approx(0.341344746068543, abs=1e-14)


def test_variance_at_sixteen_sites_against_brute_force():
    n, beta = 16, 0.5
    ws = for_size(WeightSequence([1]), n)
    law = brute_force([1.0] * n, beta, 0.0)
    # homogeneous paramagnet: M = 0, chi = 1/(1-beta)
    var = sum(m * (s / math.sqrt(n * 2.0)) ** 2 for (s, _), m in law.items())
    ms = standardize(exact_law(ws, ModelParams(beta, 0.0)), observables(ws, ModelParams(beta, 0.0), n))
    assert ms.variance == pytest.approx(var, rel=1e-12)
    assert var == pytest.approx(0.9009340153416, abs=1e-12)


def test_variance_approaches_one():
    p = ModelParams(0.5, 0.0)
    gaps = []
    for n in (16, 64, 256):
        ws = for_size(WeightSequence([1]), n)
        gaps.append(abs(standardize(dp_joint(ws, p), observables(ws, p, n)).variance - 1))
    assert gaps[0] > gaps[1] > gaps[2]


def test_dp_requires_integer_scale():
    ws = WeightSequence([1.0, math.sqrt(2)])
    with pytest.raises(ValueError):
        dp_joint(ws, ModelParams(0.1, 0.1))
    # small irrational instances still go through enumeration
    assert exact_law(ws, ModelParams(0.1, 0.1)).mass.sum() == pytest.approx(1.0)


def test_dp_budget():
    with pytest.raises(SizeError):
        dp_joint(for_size(WeightSequence([1, 7]), 2000), ModelParams(0.1, 0.1), budget=10_000)


def test_configurations_cap():
    assert configurations(3).shape == (8, 3)
    with pytest.raises(SizeError):
        configurations(40)


def test_configuration_log_probs_normalize():
    ws = WeightSequence([1, 2, 3])
    lp = configuration_log_probs(ws, ModelParams(0.4, 0.1), configurations(3))
    assert np.exp(lp).sum() == pytest.approx(1.0, abs=1e-15)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=9), st.floats(0, 2), st.floats(-1, 1))
def test_dp_matches_enumeration_on_random_instances(w, beta, h):
    ws = WeightSequence(w)
    p = ModelParams(beta, h)
    a, b = as_dict(dp_joint(ws, p)), as_dict(enumerate_law(ws, p))
    assert a.keys() == b.keys()
    assert max(abs(a[k] - b[k]) for k in a) <= 1e-12
    assert sum(a.values()) == pytest.approx(1.0, abs=1e-13)


@given(st.lists(st.integers(1, 4), min_size=1, max_size=8), st.floats(0, 1.5), st.floats(-1, 1),
       st.floats(-0.5, 0.5))
def test_log_mgf_matches_direct_sum(w, beta, h, theta):
    ws = WeightSequence(w)
    jd = dp_joint(ws, ModelParams(beta, h))
    assert jd.log_mgf_t(theta) == pytest.approx(math.log(float(np.sum(jd.mass * np.exp(theta * jd.t)))),
                                                abs=1e-12)
