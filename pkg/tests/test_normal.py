import mpmath as mp
import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from icwlab.normal import kolmogorov_distance, norm_cdf, norm_sf, scaled_lower, scaled_upper

mp.mp.dps = 40


@pytest.mark.parametrize("x", [-38.0, -8.5, -1.0, 0.0, 1e-9, 2.5, 7.0])
def test_cdf_against_high_precision(x):
    assert norm_cdf(x) == pytest.approx(float(mp.ncdf(x)), rel=1e-14)
    assert norm_sf(x) == pytest.approx(float(1 - mp.ncdf(x)), rel=1e-14)


@given(st.floats(-30, 30))
def test_cdf_symmetry(x):
    assert norm_cdf(x) + norm_cdf(-x) == pytest.approx(1.0, abs=2e-16)


@pytest.mark.parametrize("x", [-40.0, -3.0, 0.0, 2.0, 40.0])
def test_scaled_products(x):
    # scaled_lower(x) = exp(x^2/2) Phi(x), scaled_upper(x) = exp(x^2/2) (1 - Phi(x))
    e = mp.exp(mp.mpf(x) ** 2 / 2)
    assert scaled_lower(x) == pytest.approx(float(e * mp.ncdf(x)), rel=1e-13)
    assert scaled_upper(x) == pytest.approx(float(e * mp.ncdf(-x)), rel=1e-13)


def test_point_mass_at_zero():
    assert kolmogorov_distance([0.0], [1.0]) == pytest.approx(0.5, abs=1e-15)


def test_symmetric_two_point_mass():
    assert kolmogorov_distance([-1.0, 1.0], [0.5, 0.5]) == pytest.approx(float(mp.ncdf(1) - 0.5), abs=1e-15)
    assert kolmogorov_distance([-1.0, 1.0], [0.5, 0.5]) == pytest.approx(0.341344746, abs=1e-9)


def test_discretized_normal_converges():
    dists = []
    for m in (100, 1000, 10000):
        edges = np.linspace(-8, 8, m + 1)
        mids = 0.5 * (edges[1:] + edges[:-1])
        probs = np.diff(norm_cdf(edges))
        dists.append(kolmogorov_distance(mids, probs / probs.sum()))
    assert dists[0] > dists[1] > dists[2] and dists[2] < 1e-3


def test_atoms_need_not_be_sorted():
    assert kolmogorov_distance([1.0, -1.0], [0.25, 0.75]) == kolmogorov_distance([-1.0, 1.0], [0.75, 0.25])


@given(st.lists(st.tuples(st.floats(-5, 5), st.floats(0.01, 1)), min_size=1, max_size=20))
def test_distance_lies_in_unit_interval_and_dominates_atom_gap(pairs):
    atoms = np.array([a for a, _ in pairs])
    probs = np.array([q for _, q in pairs])
    probs /= probs.sum()
    d = kolmogorov_distance(atoms, probs)
    assert 0 <= d <= 1
    # any atom of mass q forces a jump of q against a continuous CDF
    assert d >= probs.max() / 2 - 1e-12
