import math

import numpy as np
import pytest
from hypothesis import given, strategies as st
from hypothesis.extra.numpy import arrays
from scipy import stats as sps

from gcausal.errors import DataError
from gcausal.stats import (TEST_KINDS, _ad_from_labels, _cvm_from_labels, _rank_layout, decide, kolmogorov_pvalue,
                           ks_statistic, sensitivity_study, student_t_sf, two_sample_test, write_power_table)

samples = arrays(float, st.integers(5, 40), elements=st.floats(-100, 100))


def naive_cvm(a, b):
    """Anderson (1962) two-sample T from the rank definition, no ties."""
    n, m = a.size, b.size
    pooled = np.sort(np.concatenate([a, b]))
    ra = np.searchsorted(pooled, np.sort(a)) + 1
    rb = np.searchsorted(pooled, np.sort(b)) + 1
    u = n * np.sum((ra - np.arange(1, n + 1)) ** 2) + m * np.sum((rb - np.arange(1, m + 1)) ** 2)
    big = n + m
    return u / (n * m * big) - (4 * m * n - 1) / (6 * big)


def naive_ad(a, b):
    """Right-continuous two-sample AD statistic written as a plain loop."""
    n, m = a.size, b.size
    big = n + m
    z = np.unique(np.concatenate([a, b]))
    total = 0.0
    for zj in z[:-1]:
        lj = np.sum(np.concatenate([a, b]) == zj)
        mij = np.sum(a <= zj)
        bj = np.sum(np.concatenate([a, b]) <= zj)
        total += lj / big * (big * mij - bj * n) ** 2 / (bj * (big - bj))
    return (1 / n + 1 / m) * total


def test_kolmogorov_series_branches_agree():
    # both forms computed for the same C must coincide
    for c in (0.6, 0.9, 1.0, 1.3):
        alt = 2 * sum((-1) ** (k - 1) * math.exp(-2 * k * k * c * c) for k in range(1, 200))
        assert kolmogorov_pvalue(c) == pytest.approx(alt, abs=1e-10)
    assert kolmogorov_pvalue(0.0) == 1.0
    assert kolmogorov_pvalue(0.2) == pytest.approx(1.0, abs=1e-10)


def test_ks_matches_scipy(rng):
    a, b = rng.normal(size=80), rng.normal(0.3, 1, size=60)
    out = two_sample_test("KS", a, b)
    ref = sps.ks_2samp(a, b)
    assert ks_statistic(a, b) == pytest.approx(ref.statistic)
    c = math.sqrt(80 * 60 / 140) * ref.statistic
    assert out.p_value == pytest.approx(sps.kstwobign.sf(c), rel=1e-9)


def test_mwu_matches_scipy(rng):
    a, b = np.round(rng.normal(size=50), 1), np.round(rng.normal(0.4, 1, size=70), 1)
    out = two_sample_test("MWU", a, b)
    ref = sps.mannwhitneyu(a, b, method="asymptotic", use_continuity=True)
    assert out.statistic == pytest.approx(ref.statistic)
    assert out.p_value == pytest.approx(ref.pvalue, rel=1e-9)


def test_wsr_matches_scipy(rng):
    a, b = np.round(rng.normal(size=60), 1), np.round(rng.normal(0.2, 1, size=60), 1)
    out = two_sample_test("WSR", a, b)
    ref = sps.wilcoxon(a, b, zero_method="wilcox", correction=False, method="approx")
    assert out.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    with pytest.raises(DataError):
        two_sample_test("WSR", a, b[:-1])


def test_welch_matches_scipy(rng):
    a, b = rng.normal(size=30), rng.normal(0.5, 2, size=45)
    out = two_sample_test("WELCH", a, b)
    ref = sps.ttest_ind(a, b, equal_var=False)
    assert out.statistic == pytest.approx(ref.statistic)
    assert out.p_value == pytest.approx(ref.pvalue, rel=1e-9)
    assert student_t_sf(0.0, 5.0) == pytest.approx(0.5)


@given(samples, samples)
def test_cvm_statistic_matches_rank_formula(a, b):
    if np.unique(np.concatenate([a, b])).size < a.size + b.size:
        return
    labels, run_end, run_len = _rank_layout(a, b)
    assert _cvm_from_labels(labels, run_end, run_len, a.size, b.size) == pytest.approx(naive_cvm(a, b), abs=1e-9)


@given(samples, samples)
def test_ad_statistic_matches_loop(a, b):
    labels, run_end, run_len = _rank_layout(a, b)
    assert _ad_from_labels(labels, run_end, run_len, a.size, b.size) == pytest.approx(naive_ad(a, b), rel=1e-9)


def test_cvm_statistic_matches_scipy(rng):
    a, b = rng.normal(size=40), rng.normal(size=55)
    assert two_sample_test("CVM", a, b).statistic == pytest.approx(sps.cramervonmises_2samp(a, b).statistic)


@pytest.mark.parametrize("kind", TEST_KINDS)
def test_identical_samples_do_not_reject(kind, rng):
    a = rng.normal(size=30)
    out = two_sample_test(kind, a, a.copy())
    assert not decide(out, 0.05)


@pytest.mark.parametrize("kind", TEST_KINDS)
def test_large_shift_rejects(kind, rng):
    a, b = rng.normal(size=50), rng.normal(3.0, 1.0, size=50)
    assert decide(two_sample_test(kind, a, b), 0.05)


@pytest.mark.parametrize("kind", ["KS", "MWU", "CVM", "AD", "WELCH"])
@given(samples, samples)
def test_p_value_is_symmetric(kind, a, b):
    if kind == "WELCH" and (a.std() == 0 or b.std() == 0):
        return
    assert two_sample_test(kind, a, b).p_value == pytest.approx(two_sample_test(kind, b, a).p_value, abs=1e-12)


@pytest.mark.parametrize("kind", TEST_KINDS)
@given(st.lists(st.floats(-10, 10), min_size=6, max_size=20))
def test_p_value_in_unit_interval(kind, xs):
    a = np.array(xs)
    b = a[::-1] + 0.1
    p = two_sample_test(kind, a, b).p_value
    assert 0.0 <= p <= 1.0


def test_input_validation():
    with pytest.raises(DataError, match="at least"):
        two_sample_test("KS", [1, 2, 3], [1, 2, 3, 4, 5])
    with pytest.raises(DataError, match="unknown"):
        two_sample_test("XX", np.ones(6), np.ones(6))
    with pytest.raises(DataError):
        decide(two_sample_test("KS", np.arange(6.0), np.arange(6.0)), 1.5)


def test_permutation_p_value_is_seeded(rng):
    a, b = rng.normal(size=30), rng.normal(0.3, 1, size=30)
    assert two_sample_test("AD", a, b, seed=4).p_value == two_sample_test("AD", a, b, seed=4).p_value
    assert two_sample_test("AD", a, b).p_value >= 1 / 200


def test_sensitivity_table(tmp_path):
    rows = sensitivity_study(n=40, repetitions=100, seed=1, kinds=("KS", "WELCH"))
    assert len(rows) == 2 * 5
    assert {r["perturbation"] for r in rows} == {"control", "mean+0.5", "var*2", "both", "half-n"}
    assert all(r["n"] == 20 for r in rows if r["perturbation"] == "half-n")
    write_power_table(rows, tmp_path / "t.csv")
    assert (tmp_path / "t.csv").read_text().splitlines()[0] == "test,perturbation,n,power"
