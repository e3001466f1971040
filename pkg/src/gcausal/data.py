"""Panels, group partitions, group graphs, windowing and graph scoring.

Sample statistics use the population convention (denominator n) throughout.
"""

from __future__ import annotations

import csv
import json
import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .errors import DataError

MISSING_POLICIES = ("error", "drop_rows", "interpolate")


def _frozen(a) -> np.ndarray:
    a = np.array(a, dtype=float, copy=True)
    a.setflags(write=False)
    return a


@dataclass(frozen=True, eq=False)
class TimeSeriesPanel:
    """T x N matrix of observations with one name per column."""

    values: np.ndarray
    variable_names: tuple[str, ...] = ()

    def __post_init__(self):
        values = _frozen(self.values)
        if values.ndim != 2:
            raise DataError(f"panel values must be 2-D, got shape {values.shape}")
        t, n = values.shape
        if t < 1 or n < 1:
            raise DataError(f"panel must have T >= 1 and N >= 1, got {values.shape}")
        if not np.all(np.isfinite(values)):
            bad = np.argwhere(~np.isfinite(values))[0]
            raise DataError(f"non-finite value at row {bad[0]}, column {bad[1]}")
        names = tuple(self.variable_names) or tuple(f"z{i}" for i in range(n))
        if len(names) != n:
            raise DataError(f"expected {n} variable names, got {len(names)}")
        if len(set(names)) != n:
            raise DataError(f"duplicate variable names: {_duplicates(names)}")
        object.__setattr__(self, "values", values)
        object.__setattr__(self, "variable_names", names)

    @property
    def n_steps(self) -> int:
        return self.values.shape[0]

    @property
    def n_vars(self) -> int:
        return self.values.shape[1]

    def slice_rows(self, start: int, stop: int) -> "TimeSeriesPanel":
        return TimeSeriesPanel(self.values[start:stop], self.variable_names)

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            writer = csv.writer(fh, lineterminator="\n")
            writer.writerow(self.variable_names)
            for row in self.values:
                writer.writerow([repr(float(v)) for v in row])


def _duplicates(names: Iterable[str]) -> list[str]:
    seen, dup = set(), []
    for name in names:
        if name in seen and name not in dup:
            dup.append(name)
        seen.add(name)
    return dup


@dataclass(frozen=True)
class GroupPartition:
    """Ordered disjoint groups of variable indices covering 0..N-1."""

    groups: tuple[tuple[int, ...], ...]

    def __post_init__(self):
        groups = tuple(tuple(int(v) for v in g) for g in self.groups)
        if not groups:
            raise DataError("partition needs at least one group")
        for gi, g in enumerate(groups):
            if len(g) == 0:
                raise DataError(f"group {gi} is empty")
        flat = [v for g in groups for v in g]
        if len(set(flat)) != len(flat):
            raise DataError(f"groups overlap: variables {_duplicates(map(str, flat))} appear twice")
        if set(flat) != set(range(len(flat))):
            raise DataError(f"groups must cover variables 0..{len(flat) - 1} exactly, got {sorted(flat)}")
        object.__setattr__(self, "groups", groups)

    @property
    def n_groups(self) -> int:
        return len(self.groups)

    @property
    def n_vars(self) -> int:
        return sum(len(g) for g in self.groups)

    @property
    def sizes(self) -> tuple[int, ...]:
        return tuple(len(g) for g in self.groups)

    def group_of(self) -> np.ndarray:
        """Group id for each variable index."""
        out = np.empty(self.n_vars, dtype=int)
        for gi, g in enumerate(self.groups):
            out[list(g)] = gi
        return out

    @classmethod
    def contiguous(cls, sizes: Sequence[int]) -> "GroupPartition":
        groups, start = [], 0
        for d in sizes:
            groups.append(tuple(range(start, start + d)))
            start += d
        return cls(tuple(groups))

    @classmethod
    def singletons(cls, n: int) -> "GroupPartition":
        return cls(tuple((i,) for i in range(n)))

    def to_json(self, names: Sequence[str] | None = None) -> dict:
        out = {"groups": [list(g) for g in self.groups]}
        if names is not None:
            out["names"] = list(names)
        return out

    @classmethod
    def from_json(cls, obj: dict) -> "GroupPartition":
        if "groups" not in obj:
            raise DataError("groups JSON needs a 'groups' key")
        return cls(tuple(tuple(g) for g in obj["groups"]))


PAIR_LABELS = ("none", "i->j", "j->i", "i<->j")


@dataclass(frozen=True, eq=False)
class GroupCausalGraph:
    """Directed group graph; adjacency[i, j] means group i causes group j."""

    adjacency: np.ndarray

    def __post_init__(self):
        adj = np.array(self.adjacency, dtype=bool, copy=True)
        if adj.ndim != 2 or adj.shape[0] != adj.shape[1]:
            raise DataError(f"adjacency must be square, got shape {adj.shape}")
        if np.any(np.diag(adj)):
            raise DataError("self-edges are not allowed in a group graph")
        adj.setflags(write=False)
        object.__setattr__(self, "adjacency", adj)

    @classmethod
    def empty(cls, n_groups: int) -> "GroupCausalGraph":
        return cls(np.zeros((n_groups, n_groups), dtype=bool))

    @classmethod
    def from_edges(cls, n_groups: int, edges: Iterable[tuple[int, int]]) -> "GroupCausalGraph":
        adj = np.zeros((n_groups, n_groups), dtype=bool)
        for i, j in edges:
            adj[i, j] = True
        return cls(adj)

    @property
    def n_groups(self) -> int:
        return self.adjacency.shape[0]

    def edges(self) -> list[tuple[int, int]]:
        return [(int(i), int(j)) for i, j in np.argwhere(self.adjacency)]

    def pair_label(self, i: int, j: int) -> str:
        """Label of the unordered pair (i, j) seen from i: none, i->j, j->i or i<->j."""
        fwd, bwd = bool(self.adjacency[i, j]), bool(self.adjacency[j, i])
        return PAIR_LABELS[fwd + 2 * bwd]

    def pair_labels(self) -> dict[tuple[int, int], str]:
        g = self.n_groups
        return {(i, j): self.pair_label(i, j) for i in range(g) for j in range(i + 1, g)}

    def to_json(self) -> dict:
        return {"groups": self.n_groups, "adjacency": self.adjacency.tolist()}

    @classmethod
    def from_json(cls, obj: dict) -> "GroupCausalGraph":
        adj = np.array(obj["adjacency"], dtype=bool).reshape(obj["groups"], obj["groups"])
        return cls(adj)

    def __eq__(self, other):
        if not isinstance(other, GroupCausalGraph):
            return NotImplemented
        return np.array_equal(self.adjacency, other.adjacency)

    def __hash__(self):
        return hash(self.adjacency.tobytes())


@dataclass(frozen=True, eq=False)
class ResidualSample:
    variable_index: int
    errors: np.ndarray

    def __post_init__(self):
        errors = _frozen(self.errors).ravel()
        if not np.all(np.isfinite(errors)) or np.any(errors < 0):
            raise DataError(f"residuals of variable {self.variable_index} must be finite and non-negative")
        object.__setattr__(self, "errors", errors)

    def __len__(self):
        return self.errors.size


def load_panel(path, missing_policy: str = "error") -> TimeSeriesPanel:
    """Read a CSV panel (header row of names, one row per time step)."""
    if missing_policy not in MISSING_POLICIES:
        raise DataError(f"unknown missing_policy {missing_policy!r}; choose from {MISSING_POLICIES}")
    path = Path(path)
    try:
        with open(path, newline="", encoding="utf-8") as fh:
            rows = list(csv.reader(fh))
    except OSError as exc:
        raise DataError(f"cannot read panel file {path}: {exc}") from exc
    rows = [r for r in rows if r]
    if not rows:
        raise DataError(f"panel file {path} is empty")
    header = [h.strip() for h in rows[0]]
    if len(set(header)) != len(header):
        raise DataError(f"duplicate header names in {path}: {_duplicates(header)}")
    body = rows[1:]
    if not body:
        raise DataError(f"panel file {path} has a header but no data rows")

    n = len(header)
    values = np.full((len(body), n), np.nan)
    for r, row in enumerate(body):
        if len(row) != n:
            raise DataError(f"row {r + 1} of {path} has {len(row)} cells, expected {n}")
        for c, cell in enumerate(row):
            try:
                v = float(cell)
            except ValueError:
                v = math.nan
            if not math.isfinite(v) and missing_policy == "error":
                raise DataError(
                    f"missing or non-numeric cell {cell!r} at data row {r + 1}, column {header[c]!r}"
                )
            values[r, c] = v

    bad = ~np.isfinite(values)
    if bad.any():
        if missing_policy == "drop_rows":
            values = values[~bad.any(axis=1)]
            if values.shape[0] == 0:
                raise DataError(f"every row of {path} has a missing cell")
        else:
            idx = np.arange(values.shape[0])
            for c in range(n):
                ok = ~bad[:, c]
                if not ok.any():
                    raise DataError(f"column {header[c]!r} has no numeric values")
                values[:, c] = np.interp(idx, idx[ok], values[ok, c])
    return TimeSeriesPanel(values, tuple(header))


def standardize(panel: TimeSeriesPanel) -> tuple[TimeSeriesPanel, np.ndarray, np.ndarray]:
    """Zero-mean, unit-std columns; returns (panel, mean, std)."""
    x = panel.values
    mean = x.mean(axis=0)
    std = x.std(axis=0)
    scale = np.abs(mean) + 1.0
    for name, s, sc in zip(panel.variable_names, std, scale):
        if s <= 1e-12 * sc:
            raise DataError(f"variable {name!r} has zero variance and cannot be standardized")
    z = (x - mean) / std
    # second pass removes the O(eps) drift left by the first
    z = (z - z.mean(axis=0)) / z.std(axis=0)
    return TimeSeriesPanel(z, panel.variable_names), mean, std


def destandardize(panel: TimeSeriesPanel, mean, std) -> TimeSeriesPanel:
    return TimeSeriesPanel(panel.values * np.asarray(std) + np.asarray(mean), panel.variable_names)


@dataclass(frozen=True, eq=False)
class Window:
    offset: int
    context: np.ndarray = field(repr=False)
    target: np.ndarray = field(repr=False)


def n_windows(n_steps: int, context_len: int, horizon: int, stride: int) -> int:
    return (n_steps - context_len - horizon) // stride + 1


def make_windows(panel: TimeSeriesPanel, context_len: int, horizon: int, stride: int) -> list[Window]:
    """Context/target slices at offsets 0, stride, 2*stride, ... that fit in the panel."""
    if context_len < 1 or horizon < 1 or stride < 1:
        raise DataError(f"context_len, horizon and stride must be >= 1, got {context_len}, {horizon}, {stride}")
    t = panel.n_steps
    if t < context_len + horizon:
        raise DataError(
            f"panel has {t} steps; windows need at least context_len + horizon = {context_len + horizon}"
        )
    x = panel.values
    out = []
    for k in range(n_windows(t, context_len, horizon, stride)):
        off = k * stride
        out.append(Window(off, x[off:off + context_len], x[off + context_len:off + context_len + horizon]))
    return out


@dataclass(frozen=True)
class GraphScore:
    precision: float
    recall: float
    f_score: float
    tp: int
    fp: int
    fn: int


def score_graph(predicted: GroupCausalGraph, truth: GroupCausalGraph) -> GraphScore:
    """Precision/recall/F over directed off-diagonal group edges."""
    if predicted.n_groups != truth.n_groups:
        raise DataError(f"graphs have different group counts: {predicted.n_groups} vs {truth.n_groups}")
    off = ~np.eye(truth.n_groups, dtype=bool)
    p, t = predicted.adjacency & off, truth.adjacency & off
    tp = int(np.sum(p & t))
    fp = int(np.sum(p & ~t))
    fn = int(np.sum(~p & t))
    precision = tp / (tp + fp) if tp + fp else 1.0
    recall = tp / (tp + fn) if tp + fn else 1.0
    f = 2 * precision * recall / (precision + recall) if precision + recall else 0.0
    return GraphScore(precision, recall, f, tp, fp, fn)


def read_json(path):
    with open(path, encoding="utf-8") as fh:
        return json.load(fh)


def write_json(path, obj) -> None:
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(obj, fh, indent=2, sort_keys=True)
        fh.write("\n")
