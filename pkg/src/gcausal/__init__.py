"""Group-level causal discovery for multivariate time series.

A probabilistic forecaster is trained once; each variable group is then
replaced by Gaussian knockoffs and a group is called a cause of another when
the substitution shifts the residual distribution of at least one of the
other group's variables.
"""

from .data import (GroupCausalGraph, GroupPartition, ResidualSample, TimeSeriesPanel, load_panel,
                   make_windows, score_graph, standardize)
from .engine import DiscoveryConfig, DiscoveryResult, discover, discover_segments, link_fractions
from .errors import ConfigError, DataError, GCausalError, NumericError
from .forecaster import ForecasterConfig, ModelParams, forecast, residuals, train
from .knockoffs import estimate_moments, make_knockoffs, sample_knockoffs
from .scm import ScmSpec, sample_spec, simulate, truth_graph
from .stats import two_sample_test

__version__ = "0.1.0"

__all__ = [
    "ConfigError", "DataError", "DiscoveryConfig", "DiscoveryResult", "ForecasterConfig", "GCausalError",
    "GroupCausalGraph", "GroupPartition", "ModelParams", "NumericError", "ResidualSample", "ScmSpec",
    "TimeSeriesPanel", "discover", "discover_segments", "estimate_moments", "forecast", "link_fractions",
    "load_panel", "make_knockoffs", "make_windows", "residuals", "sample_knockoffs", "sample_spec",
    "score_graph", "simulate", "standardize", "train", "truth_graph", "two_sample_test",
]
