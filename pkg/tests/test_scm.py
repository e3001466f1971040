import numpy as np
import pytest
from hypothesis import given, strategies as st

from gcausal.data import GroupPartition
from gcausal.errors import DataError, NumericError
from gcausal.scm import (LINEAR_BUDGET, NONLINEAR, Edge, ScmSpec, admissible_pairs, sample_spec, simulate,
                         truth_graph)


def test_admissible_pairs_count():
    p = GroupPartition.contiguous([2, 3])
    assert len(admissible_pairs(p)) == 2 * 2 * 3


@given(st.floats(0, 1), st.floats(0, 1), st.integers(0, 10_000))
def test_sample_spec_counts(density, nonlin, seed):
    p = GroupPartition.contiguous([2, 2, 1])
    spec = sample_spec(p, density, nonlin, max_lag=2, seed=seed)
    cross = spec.cross_edges()
    n_pairs = len(admissible_pairs(p))
    assert len(cross) == int(np.floor(density * n_pairs + 0.5))
    n_nonlin = sum(e.func in NONLINEAR for e in cross)
    assert n_nonlin == int(np.floor(nonlin * len(cross) + 0.5))
    assert all(1 <= e.lag <= 2 for e in spec.edges)
    assert len({(e.src, e.dst) for e in cross}) == len(cross)


def test_sample_spec_is_seeded():
    p = GroupPartition.contiguous([2, 2])
    assert sample_spec(p, 0.5, 0.5, seed=3).to_json() == sample_spec(p, 0.5, 0.5, seed=3).to_json()


def test_spec_json_roundtrip():
    spec = sample_spec(GroupPartition.contiguous([2, 2]), 0.5, 0.5, seed=1)
    assert ScmSpec.from_json(spec.to_json()).to_json() == spec.to_json()


def test_spec_validation():
    p = GroupPartition.contiguous([1, 1])
    selfs = [Edge(0, 0, 1, "linear", 0.5), Edge(1, 1, 1, "linear", 0.5)]
    with pytest.raises(DataError, match="self-edge"):
        ScmSpec(p, selfs[:1])
    with pytest.raises(DataError, match="lag"):
        ScmSpec(p, selfs + [Edge(0, 1, 3, "linear", 0.1)], max_lag=2)
    with pytest.raises(DataError, match="stable"):
        ScmSpec(p, selfs + [Edge(0, 1, 1, "linear", LINEAR_BUDGET)])


def test_truth_graph_from_cross_edges():
    p = GroupPartition.contiguous([2, 1])
    edges = [Edge(v, v, 1, "linear", 0.5) for v in range(3)] + [Edge(0, 1, 1, "linear", 0.3),
                                                               Edge(1, 2, 2, "sin", 0.5)]
    g = truth_graph(ScmSpec(p, edges, max_lag=2))
    assert g.edges() == [(0, 1)]


def test_simulate_matches_hand_recursion():
    p = GroupPartition.contiguous([1, 1])
    edges = [Edge(0, 0, 1, "linear", 0.5), Edge(1, 1, 1, "linear", 0.2), Edge(0, 1, 2, "poly2", 0.7)]
    spec = ScmSpec(p, edges, max_lag=2)
    panel, truth = simulate(spec, 50, burn_in=5, seed=9)
    noise = np.random.default_rng(9).normal(size=(55, 2))
    z = np.zeros((55, 2))
    z[:2] = noise[:2]
    for t in range(2, 55):
        z[t, 0] = 0.5 * z[t - 1, 0] + noise[t, 0]
        z[t, 1] = 0.2 * z[t - 1, 1] + 0.7 * np.tanh(z[t - 2, 0] ** 2) + noise[t, 1]
    np.testing.assert_allclose(panel.values, z[5:], atol=1e-12)
    assert truth.edges() == [(0, 1)]


def test_simulate_divergence():
    p = GroupPartition.contiguous([1])
    # bypass the budget check to force an explosive process
    spec = ScmSpec(p, [Edge(0, 0, 1, "linear", 0.5)])
    object.__setattr__(spec, "edges", (Edge(0, 0, 1, "linear", 3.0),))
    with pytest.raises(NumericError, match="diverged"):
        simulate(spec, 200, burn_in=10)


@given(st.integers(0, 500))
def test_simulated_benchmark_is_stable(seed):
    spec = sample_spec(GroupPartition.contiguous([2, 2, 2]), 0.9, 0.5, seed=seed)
    panel, _ = simulate(spec, 300, seed=seed)
    assert np.abs(panel.values).max() < 100
