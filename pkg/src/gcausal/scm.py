"""Synthetic lagged SCM benchmarks with a known group graph.

Each variable follows

    Z[t, j] = sum over incoming edges (coef * f(Z[t - lag, src])) + noise[t, j]

with f one of linear, sin, cos, tanh(x**2), tanh(x**3). The polynomial tags
are squashed by tanh so that only linear edges can make the system unstable,
and those are kept in check by capping each variable's incoming linear
coefficient mass at 0.9.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .data import GroupCausalGraph, GroupPartition, TimeSeriesPanel
from .errors import DataError, NumericError

FUNCTIONS = ("linear", "sin", "cos", "poly2", "poly3")
NONLINEAR = FUNCTIONS[1:]

SELF_COEF = 0.5
LINEAR_BUDGET = 0.9
WITHIN_GROUP_PROB = 0.3
COEF_RANGE = (0.3, 0.8)
DIVERGENCE_LIMIT = 1e6

_F = {
    "linear": lambda x: x,
    "sin": np.sin,
    "cos": np.cos,
    "poly2": lambda x: np.tanh(x * x),
    "poly3": lambda x: np.tanh(x * x * x),
}


@dataclass(frozen=True)
class Edge:
    src: int
    dst: int
    lag: int
    func: str
    coef: float


@dataclass(frozen=True)
class ScmSpec:
    partition: GroupPartition
    edges: tuple[Edge, ...]
    noise_std: float = 1.0
    max_lag: int = 1
    density: float = 0.0
    nonlinearity: float = 0.0
    seed: int | None = None

    def __post_init__(self):
        object.__setattr__(self, "edges", tuple(self.edges))
        n = self.partition.n_vars
        if not self.noise_std > 0:
            raise DataError(f"noise_std must be > 0, got {self.noise_std}")
        if self.max_lag < 1:
            raise DataError(f"max_lag must be >= 1, got {self.max_lag}")
        linear_mass = np.zeros(n)
        has_self = np.zeros(n, dtype=bool)
        for e in self.edges:
            if not (0 <= e.src < n and 0 <= e.dst < n):
                raise DataError(f"edge {e} references a variable outside 0..{n - 1}")
            if not 1 <= e.lag <= self.max_lag:
                raise DataError(f"edge {e} has lag outside 1..{self.max_lag}")
            if e.func not in FUNCTIONS:
                raise DataError(f"edge {e} has unknown function tag {e.func!r}")
            if e.src == e.dst:
                has_self[e.dst] = True
            if e.func == "linear":
                linear_mass[e.dst] += abs(e.coef)
        if not has_self.all():
            raise DataError(f"variables {np.flatnonzero(~has_self).tolist()} lack an autoregressive self-edge")
        over = np.flatnonzero(linear_mass > LINEAR_BUDGET + 1e-12)
        if over.size:
            raise DataError(
                f"variables {over.tolist()} have incoming linear |coef| sum "
                f"{linear_mass[over].round(3).tolist()} > {LINEAR_BUDGET}; the process would not be stable"
            )

    def cross_edges(self) -> list[Edge]:
        g = self.partition.group_of()
        return [e for e in self.edges if g[e.src] != g[e.dst]]

    def to_json(self) -> dict:
        return {
            "groups": [list(gr) for gr in self.partition.groups],
            "edges": [[e.src, e.dst, e.lag, e.func, e.coef] for e in self.edges],
            "noise_std": self.noise_std,
            "max_lag": self.max_lag,
            "density": self.density,
            "nonlinearity": self.nonlinearity,
            "seed": self.seed,
        }

    @classmethod
    def from_json(cls, obj: dict) -> "ScmSpec":
        return cls(
            partition=GroupPartition(tuple(tuple(g) for g in obj["groups"])),
            edges=tuple(Edge(int(s), int(d), int(k), str(f), float(c)) for s, d, k, f, c in obj["edges"]),
            noise_std=float(obj["noise_std"]),
            max_lag=int(obj["max_lag"]),
            density=float(obj.get("density", 0.0)),
            nonlinearity=float(obj.get("nonlinearity", 0.0)),
            seed=obj.get("seed"),
        )


def _round_half_up(x: float) -> int:
    return int(math.floor(x + 0.5))


def admissible_pairs(partition: GroupPartition) -> list[tuple[int, int]]:
    """Ordered cross-group variable pairs (src, dst)."""
    g = partition.group_of()
    n = partition.n_vars
    return [(u, v) for u in range(n) for v in range(n) if g[u] != g[v]]


def _signed_coef(rng) -> float:
    lo, hi = COEF_RANGE
    return float(rng.choice([-1.0, 1.0]) * rng.uniform(lo, hi))


def sample_spec(
    partition: GroupPartition,
    density: float,
    nonlinearity: float,
    max_lag: int = 3,
    seed: int = 0,
    noise_std: float = 1.0,
) -> ScmSpec:
    """Draw a random SCM whose cross-group edge count is round(density * P)."""
    if not 0.0 <= density <= 1.0 or not 0.0 <= nonlinearity <= 1.0:
        raise DataError(f"density and nonlinearity must lie in [0, 1], got {density}, {nonlinearity}")
    if max_lag < 1:
        raise DataError(f"max_lag must be >= 1, got {max_lag}")
    rng = np.random.default_rng(seed)
    n = partition.n_vars
    pairs = admissible_pairs(partition)
    n_cross = _round_half_up(density * len(pairs))
    chosen = sorted(rng.choice(len(pairs), size=n_cross, replace=False).tolist()) if n_cross else []
    n_nonlin = _round_half_up(nonlinearity * n_cross)
    nonlin_idx = set(rng.choice(n_cross, size=n_nonlin, replace=False).tolist()) if n_nonlin else set()

    edges = [Edge(v, v, 1, "linear", SELF_COEF) for v in range(n)]
    for k, pi in enumerate(chosen):
        src, dst = pairs[pi]
        func = str(rng.choice(NONLINEAR)) if k in nonlin_idx else "linear"
        edges.append(Edge(src, dst, int(rng.integers(1, max_lag + 1)), func, _signed_coef(rng)))
    for gr in partition.groups:
        for u in gr:
            for v in gr:
                if u != v and rng.uniform() < WITHIN_GROUP_PROB:
                    edges.append(Edge(u, v, int(rng.integers(1, max_lag + 1)), "linear", _signed_coef(rng)))

    edges = _enforce_linear_budget(edges, n)
    return ScmSpec(partition, tuple(edges), noise_std, max_lag, density, nonlinearity, seed)


def _enforce_linear_budget(edges: list[Edge], n: int) -> list[Edge]:
    # self-edges keep their coefficient; other linear inputs share what is left
    budget = np.full(n, LINEAR_BUDGET)
    mass = np.zeros(n)
    for e in edges:
        if e.func == "linear":
            if e.src == e.dst:
                budget[e.dst] -= abs(e.coef)
            else:
                mass[e.dst] += abs(e.coef)
    scale = np.where(mass > budget, budget / np.maximum(mass, 1e-300), 1.0)
    out = []
    for e in edges:
        if e.func == "linear" and e.src != e.dst and scale[e.dst] < 1.0:
            e = Edge(e.src, e.dst, e.lag, e.func, e.coef * float(scale[e.dst]))
        out.append(e)
    return out


def truth_graph(spec: ScmSpec) -> GroupCausalGraph:
    g = spec.partition.group_of()
    return GroupCausalGraph.from_edges(
        spec.partition.n_groups, {(int(g[e.src]), int(g[e.dst])) for e in spec.cross_edges()}
    )


def simulate(spec: ScmSpec, length: int, burn_in: int = 200, seed: int = 0) -> tuple[TimeSeriesPanel, GroupCausalGraph]:
    if length < 1:
        raise DataError(f"length must be >= 1, got {length}")
    if burn_in < spec.max_lag:
        raise DataError(f"burn_in must be >= max_lag={spec.max_lag}, got {burn_in}")
    n = spec.partition.n_vars
    k_max = spec.max_lag
    total = burn_in + length
    rng = np.random.default_rng(seed)
    noise = rng.normal(0.0, spec.noise_std, size=(total, n))

    # dense (lag, func) -> dst x src coefficient matrices
    terms: dict[tuple[int, str], np.ndarray] = {}
    for e in spec.edges:
        w = terms.setdefault((e.lag, e.func), np.zeros((n, n)))
        w[e.dst, e.src] += e.coef
    terms_list = [(lag, _F[func], w) for (lag, func), w in sorted(terms.items())]

    z = np.empty((total, n))
    z[:k_max] = noise[:k_max]
    for t in range(k_max, total):
        acc = noise[t].copy()
        for lag, f, w in terms_list:
            acc += w @ f(z[t - lag])
        z[t] = acc
        if np.abs(acc).max() > DIVERGENCE_LIMIT:
            raise NumericError(
                f"simulation diverged at step {t} (|Z| > {DIVERGENCE_LIMIT:g}); use smaller coefficients"
            )
    names = tuple(f"z{i}" for i in range(n))
    return TimeSeriesPanel(z[burn_in:], names), truth_graph(spec)
