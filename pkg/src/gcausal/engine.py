"""Group causal discovery by knockoff interventions on a trained forecaster.

One forecaster is trained on the observational panel and one knockoff copy
of every variable is drawn. For each source group i the group's inputs are
replaced by their knockoffs, the windowed residuals of every variable are
recomputed, and group j is declared an effect of i when at least one of its
variables shows a residual distribution shift.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass, field, replace
from typing import Sequence

import numpy as np

from .data import (GroupCausalGraph, GroupPartition, ResidualSample, TimeSeriesPanel, Window,
                   make_windows, standardize)
from .errors import DataError
from .forecaster import ForecasterConfig, ModelParams, residuals, train
from .knockoffs import KnockoffPanel, estimate_moments, equicorrelated_s, sample_knockoffs
from .stats import TEST_KINDS, TestOutcome, two_sample_test


def derive_seed(seed: int, *key) -> int:
    """Independent 32-bit seed for a named sub-stream of ``seed``."""
    words = [int(seed)] + [k if isinstance(k, int) else int.from_bytes(str(k).encode(), "little")
                           for k in key]
    return int(np.random.SeedSequence(words).generate_state(1)[0])


@dataclass(frozen=True)
class DiscoveryConfig:
    alpha: float = 0.05
    test_kind: str = "KS"
    forecaster: ForecasterConfig = field(default_factory=ForecasterConfig)
    shrinkage: float = 0.1
    stride: int | None = None
    bonferroni: bool = False
    seed: int = 0

    def __post_init__(self):
        if not 0.0 < self.alpha < 1.0:
            raise DataError(f"alpha must lie in (0, 1), got {self.alpha}")
        if self.test_kind.upper() not in TEST_KINDS:
            raise DataError(f"unknown test kind {self.test_kind!r}")
        if self.stride is not None and self.stride < 1:
            raise DataError(f"stride must be >= 1, got {self.stride}")
        if isinstance(self.forecaster, dict):
            object.__setattr__(self, "forecaster", ForecasterConfig(**self.forecaster))

    @property
    def window_stride(self) -> int:
        return self.stride if self.stride is not None else self.forecaster.horizon

    def to_json(self) -> dict:
        return asdict(self)


@dataclass(frozen=True)
class EdgeEvidence:
    source: int
    target: int
    outcomes: tuple[TestOutcome, ...]
    variables: tuple[int, ...]
    alpha_used: float
    decision: bool

    def to_json(self) -> dict:
        return {
            "source": self.source,
            "target": self.target,
            "decision": self.decision,
            "alpha_used": self.alpha_used,
            "tests": [
                {"variable": v, **asdict(o)} for v, o in zip(self.variables, self.outcomes)
            ],
        }


@dataclass(frozen=True, eq=False)
class DiscoveryResult:
    graph: GroupCausalGraph
    evidence: tuple[EdgeEvidence, ...]
    model: ModelParams | None = field(default=None, repr=False)
    knockoffs: KnockoffPanel | None = field(default=None, repr=False)

    def evidence_json(self) -> list[dict]:
        return [e.to_json() for e in self.evidence]


def intervene_group(model: ModelParams, panel: TimeSeriesPanel, knockoffs: KnockoffPanel,
                    partition: GroupPartition, group_index: int, windows: Sequence[Window],
                    replacement: np.ndarray | None = None) -> list[ResidualSample]:
    """Residuals of every variable with group ``group_index`` replaced by its knockoffs.

    ``replacement`` overrides the knockoff columns (used for no-op checks).
    """
    if not 0 <= group_index < partition.n_groups:
        raise DataError(f"group index {group_index} outside 0..{partition.n_groups - 1}")
    if knockoffs.values.shape != panel.values.shape:
        raise DataError(f"knockoffs {knockoffs.values.shape} not aligned with panel {panel.values.shape}")
    idx = partition.groups[group_index]
    cols = knockoffs.columns(idx) if replacement is None else replacement
    return residuals(model, panel, windows, substitute=(idx, cols))


def group_edge_test(base: Sequence[ResidualSample], intervened: Sequence[ResidualSample],
                    partition: GroupPartition, i: int, j: int, config: DiscoveryConfig) -> EdgeEvidence:
    """Per-variable invariance tests for target group j; edge iff min p < alpha'."""
    if i == j:
        raise DataError("group_edge_test needs two distinct groups")
    base_by_var = {r.variable_index: r for r in base}
    int_by_var = {r.variable_index: r for r in intervened}
    targets = partition.groups[j]
    missing = [v for v in targets if v not in base_by_var or v not in int_by_var]
    if missing:
        raise DataError(f"missing residuals for variables {missing} of group {j}")
    outcomes = tuple(
        two_sample_test(config.test_kind, base_by_var[v].errors, int_by_var[v].errors,
                        seed=derive_seed(config.seed, "test", i, v))
        for v in targets
    )
    return evidence_from_outcomes(i, j, targets, outcomes, config)


def evidence_from_outcomes(i: int, j: int, variables: Sequence[int], outcomes: Sequence[TestOutcome],
                           config: DiscoveryConfig) -> EdgeEvidence:
    alpha = config.alpha / len(outcomes) if config.bonferroni else config.alpha
    decision = min(o.p_value for o in outcomes) < alpha
    return EdgeEvidence(i, j, tuple(outcomes), tuple(variables), alpha, bool(decision))


def discover(panel: TimeSeriesPanel, partition: GroupPartition, config: DiscoveryConfig) -> DiscoveryResult:
    if partition.n_vars != panel.n_vars:
        raise DataError(f"partition covers {partition.n_vars} variables, panel has {panel.n_vars}")
    g = partition.n_groups
    if g < 2:
        return DiscoveryResult(GroupCausalGraph.empty(g), ())
    z, _, _ = standardize(panel)
    fcfg = replace(config.forecaster, seed=derive_seed(config.seed, "forecaster"))
    model = train(z, fcfg)
    moments = estimate_moments(z, config.shrinkage)
    knockoffs = sample_knockoffs(z, moments, equicorrelated_s(moments.correlation),
                                 seed=derive_seed(config.seed, "knockoffs"))
    windows = make_windows(z, fcfg.context_len, fcfg.horizon, config.window_stride)
    base = residuals(model, z, windows)

    adj = np.zeros((g, g), dtype=bool)
    evidence = []
    for i in range(g):
        intervened = intervene_group(model, z, knockoffs, partition, i, windows)
        for j in range(g):
            if i == j:
                continue
            ev = group_edge_test(base, intervened, partition, i, j, config)
            adj[i, j] = ev.decision
            evidence.append(ev)
    return DiscoveryResult(GroupCausalGraph(adj), tuple(evidence), model, knockoffs)


def discover_pairwise(panel: TimeSeriesPanel, config: DiscoveryConfig) -> GroupCausalGraph:
    """Variable-level discovery: every variable is its own group."""
    return discover(panel, GroupPartition.singletons(panel.n_vars), config).graph


LINK_TYPES = ("i->j", "j->i", "i<->j", "none")


def min_segment_length(config: DiscoveryConfig) -> int:
    f = config.forecaster
    return f.context_len + f.horizon + 10 * config.window_stride


def discover_segments(panel: TimeSeriesPanel, partition: GroupPartition, config: DiscoveryConfig,
                      segments: Sequence[tuple[int, int, int]]) -> dict:
    """Run discovery on each (start, end, regime) segment and tally link types per group pair."""
    per_segment, skipped = [], []
    need = min_segment_length(config)
    for k, (start, end, regime) in enumerate(segments):
        if end - start < need:
            skipped.append({"start": int(start), "end": int(end), "regime": int(regime),
                            "reason": f"shorter than {need} steps"})
            continue
        cfg = replace(config, seed=derive_seed(config.seed, "segment", k))
        res = discover(panel.slice_rows(start, end), partition, cfg)
        per_segment.append({"start": int(start), "end": int(end), "regime": int(regime), "result": res})
    return {"segments": per_segment, "skipped": skipped,
            "fractions": link_fractions([s["result"].graph for s in per_segment], partition.n_groups)}


def link_fractions(graphs: Sequence[GroupCausalGraph], n_groups: int) -> list[dict]:
    """Fraction of graphs showing each link type, per unordered group pair."""
    rows = []
    for i in range(n_groups):
        for j in range(i + 1, n_groups):
            counts = dict.fromkeys(LINK_TYPES, 0)
            for gr in graphs:
                counts[gr.pair_label(i, j)] += 1
            total = len(graphs)
            rows.append({"i": i, "j": j, **{k: (counts[k] / total if total else 0.0) for k in LINK_TYPES}})
    return rows
