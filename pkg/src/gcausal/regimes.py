"""Regime segmentation by clustering sliding-window covariance matrices.

A simplified stand-in for full regime identification: each window's
covariance is turned into a correlation matrix, its upper triangle is
clustered with k-means, and the label sequence is smoothed with a sliding
majority vote so regimes form contiguous segments.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass

import numpy as np
from sklearn.cluster import KMeans
from sklearn.metrics import silhouette_score

from .data import TimeSeriesPanel
from .errors import DataError, NumericError
from .knockoffs import psd_repair


@dataclass(frozen=True, eq=False)
class RegimeLabels:
    window_length: int
    stride: int
    labels: np.ndarray
    raw_labels: np.ndarray
    segments: tuple[tuple[int, int, int], ...]
    silhouette: float

    def window_segments(self) -> list[tuple[int, int, int]]:
        """Runs of equal labels as (first_window, last_window + 1, regime)."""
        return label_runs(self.labels)

    def to_json(self) -> dict:
        return {
            "window_length": self.window_length,
            "stride": self.stride,
            "silhouette": self.silhouette,
            "segments": [{"start": s, "end": e, "regime": r} for s, e, r in self.segments],
        }

    def write_label_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf-8") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(["window", "start", "end", "raw_label", "label"])
            for k, (raw, lab) in enumerate(zip(self.raw_labels, self.labels)):
                start = k * self.stride
                w.writerow([k, start, start + self.window_length, int(raw), int(lab)])


def windowed_covariances(panel: TimeSeriesPanel, window_length: int, stride: int = 1) -> list[np.ndarray]:
    t, n = panel.values.shape
    if window_length > t:
        raise DataError(f"window length {window_length} exceeds panel length {t}")
    if window_length < n + 1:
        raise DataError(f"window length must be >= N + 1 = {n + 1}, got {window_length}")
    if stride < 1:
        raise DataError(f"stride must be >= 1, got {stride}")
    out = []
    for start in range(0, t - window_length + 1, stride):
        x = panel.values[start:start + window_length]
        xc = x - x.mean(axis=0)
        out.append(psd_repair(xc.T @ xc / window_length, 0.0))
    return out


def _features(covs) -> np.ndarray:
    n = covs[0].shape[0]
    iu = np.triu_indices(n, k=1)
    feats = []
    for c in covs:
        d = np.sqrt(np.maximum(np.diag(c), 1e-300))
        feats.append((c / np.outer(d, d))[iu])
    return np.array(feats)


def majority_filter(labels: np.ndarray, width: int) -> np.ndarray:
    """Sliding mode over ``width`` windows (the median for two labels).

    Ties go to the current label, else to the nearest tied neighbour (left
    first), so the filter does not depend on how labels are numbered.
    """
    labels = np.asarray(labels, dtype=int)
    if width <= 1:
        return labels.copy()
    half = width // 2
    out = labels.copy()
    for k in range(labels.size):
        lo, hi = max(0, k - half), min(labels.size, k + half + 1)
        counts = np.bincount(labels[lo:hi])
        best = set(np.flatnonzero(counts == counts.max()).tolist())
        if labels[k] in best:
            continue
        for d in range(1, half + 1):
            if k - d >= lo and labels[k - d] in best:
                out[k] = labels[k - d]
                break
            if k + d < hi and labels[k + d] in best:
                out[k] = labels[k + d]
                break
    return out


def label_runs(labels) -> list[tuple[int, int, int]]:
    labels = np.asarray(labels)
    runs, start = [], 0
    for k in range(1, labels.size + 1):
        if k == labels.size or labels[k] != labels[start]:
            runs.append((start, k, int(labels[start])))
            start = k
    return runs


def cluster_regimes(covs, k: int, smoothing_width: int = 5, seed: int = 0,
                    window_length: int = 0, stride: int = 1) -> RegimeLabels:
    """k-means (10 restarts) on correlation upper triangles, then majority smoothing.

    Segments are reported in time steps when ``window_length`` is given:
    each window is assigned the span starting at its offset, and the last
    segment extends to the end of the final window.
    """
    if k < 2:
        raise DataError(f"k must be >= 2, got {k}")
    if len(covs) < k:
        raise DataError(f"need at least k={k} windows, got {len(covs)}")
    feats = _features(covs)
    raw = None
    for attempt in range(10):
        km = KMeans(n_clusters=k, n_init=10, random_state=seed + attempt).fit(feats)
        if np.unique(km.labels_).size == k:
            raw = km.labels_
            break
    if raw is None:
        raise NumericError(f"k-means left an empty cluster in 10 attempts; reduce k={k}")
    raw = _canonical_labels(raw)
    smooth = _canonical_labels(majority_filter(raw, smoothing_width))
    if np.unique(raw).size > 1 and feats.shape[0] > k:
        sil = float(silhouette_score(feats, raw))
    else:
        sil = 0.0
    segs = []
    for s, e, r in label_runs(smooth):
        t0 = s * stride
        t1 = e * stride if e < smooth.size else (e - 1) * stride + max(window_length, stride)
        segs.append((t0, t1, r))
    return RegimeLabels(window_length, stride, smooth, raw, tuple(segs), sil)


def _canonical_labels(labels) -> np.ndarray:
    """Renumber labels by first appearance so results do not depend on k-means numbering."""
    labels = np.asarray(labels, dtype=int)
    mapping = {}
    for lab in labels:
        if lab not in mapping:
            mapping[lab] = len(mapping)
    return np.array([mapping[lab] for lab in labels], dtype=int)


def identify_regimes(panel: TimeSeriesPanel, k: int, window_length: int, stride: int,
                     smoothing_width: int = 5, seed: int = 0) -> RegimeLabels:
    covs = windowed_covariances(panel, window_length, stride)
    return cluster_regimes(covs, k, smoothing_width, seed, window_length, stride)


def variance_shift_panel(n_steps: int = 2000, n_vars: int = 3, change: int | None = None,
                         seed: int = 0) -> tuple[TimeSeriesPanel, int]:
    """Independent unit noise, plus (after ``change``) a shared unit-variance driver.

    Every variable's variance doubles at the change point and the pairwise
    correlation jumps from 0 to 0.5.
    """
    change = n_steps // 2 if change is None else change
    rng = np.random.default_rng(seed)
    x = rng.normal(size=(n_steps, n_vars))
    x[change:] += rng.normal(size=(n_steps - change, 1))
    return TimeSeriesPanel(x), change
