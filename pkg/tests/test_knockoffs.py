import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays

from gcausal.data import TimeSeriesPanel, standardize
from gcausal.errors import DataError
from gcausal.knockoffs import (diagnostics, dimension_sweep, equicorrelated_panel, equicorrelated_s, estimate_moments,
                               make_knockoffs, psd_repair, sample_knockoffs, swap_deviation, sweep_means)


def test_psd_repair_two_by_two():
    m = np.array([[1.0, 2.0], [2.0, 1.0]])  # eigenvalues 3 and -1
    r = psd_repair(m, floor=0.0)
    np.testing.assert_allclose(np.linalg.eigvalsh(r), [0.0, 3.0], atol=1e-12)
    np.testing.assert_allclose(r, [[1.5, 1.5], [1.5, 1.5]], atol=1e-12)


@given(arrays(float, (4, 4), elements=st.floats(-5, 5)))
def test_psd_repair_is_psd_and_symmetric(m):
    r = psd_repair(m)
    np.testing.assert_allclose(r, r.T)
    assert np.linalg.eigvalsh(r).min() > 1e-8 - 1e-10


def test_psd_repair_leaves_pd_alone():
    m = np.array([[2.0, 0.5], [0.5, 1.0]])
    np.testing.assert_array_equal(psd_repair(m), m)


def test_shrinkage_formula(small_panel):
    x = small_panel.values
    s = np.cov(x.T, bias=True)
    est = estimate_moments(small_panel, 0.3)
    np.testing.assert_allclose(est.covariance, 0.7 * s + 0.3 * np.diag(np.diag(s)))
    with pytest.raises(DataError):
        estimate_moments(small_panel, 1.0)


def test_equicorrelated_s():
    r = np.array([[1.0, 0.8], [0.8, 1.0]])  # lambda_min = 0.2
    np.testing.assert_allclose(equicorrelated_s(r), [0.4, 0.4])
    np.testing.assert_allclose(equicorrelated_s(np.eye(3)), [1.0, 1.0, 1.0])
    with pytest.raises(DataError):
        equicorrelated_s(2 * np.eye(2))


def test_knockoff_moments_match_construction():
    panel, _, _ = standardize(equicorrelated_panel(20000, 4, 0.7, seed=0))
    est = estimate_moments(panel, 0.0)
    s = equicorrelated_s(est.correlation)
    ko = sample_knockoffs(panel, est, s, seed=1)
    rep = diagnostics(panel, ko, est)
    assert rep["cov_match_error"] < 0.05
    assert rep["cross_block_error"] < 0.05
    assert rep["mean_self_corr"] == pytest.approx(1 - s[0], abs=0.05)
    assert swap_deviation(panel, ko) < 0.05


def test_knockoffs_are_seeded(small_panel):
    a = make_knockoffs(small_panel, seed=5).values
    b = make_knockoffs(small_panel, seed=5).values
    c = make_knockoffs(small_panel, seed=6).values
    np.testing.assert_array_equal(a, b)
    assert not np.array_equal(a, c)


def test_knockoff_columns(small_panel):
    ko = make_knockoffs(small_panel)
    assert ko.columns((1, 3)).shape == (small_panel.n_steps, 2)


def test_sample_knockoffs_shape_mismatch(small_panel):
    est = estimate_moments(small_panel)
    with pytest.raises(DataError):
        sample_knockoffs(TimeSeriesPanel(small_panel.values[:, :3]), est, np.ones(4))


def test_dimension_sweep_rows():
    rows = dimension_sweep([3, 6], trials=2, seed=0, n_steps=100)
    assert len(rows) == 4
    means = sweep_means(rows)
    assert [m["N"] for m in means] == [3, 6]
    assert all(0 <= m["mean_self_corr"] <= 1 for m in means)
