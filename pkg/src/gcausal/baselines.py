"""Canonical-correlation group reduction and pairwise baselines on canonical variables.

MC-VGC: reduce each group to one canonical variable, then VAR Granger F-tests.
MC-CDMI: same reduction, then the knockoff engine with singleton groups.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy import linalg, special

from .data import GroupCausalGraph, GroupPartition, TimeSeriesPanel, standardize
from .engine import DiscoveryConfig, discover_pairwise
from .errors import DataError, NumericError

RIDGE = 1e-6
IMAG_TOL = 1e-8


@dataclass(frozen=True, eq=False)
class CcaResult:
    """Per-group coefficient vectors (original units) and canonical correlations."""

    coefficients: tuple[np.ndarray, ...]
    canonical_correlations: np.ndarray

    @property
    def correlation(self) -> float:
        return float(self.canonical_correlations[0])


def _pop_std(x):
    sd = x.std(axis=0)
    if np.any(sd <= 0):
        raise DataError("CCA needs every variable to have positive variance")
    return sd


def _corr(x):
    xc = (x - x.mean(axis=0)) / _pop_std(x)
    return xc.T @ xc / x.shape[0], xc


def pairwise_cca(xa, xb, ridge: float = RIDGE) -> CcaResult:
    """Leading canonical pair from Caa^-1 Cab Cbb^-1 Cba a = lambda a.

    Columns are scaled to unit variance first, so the result is invariant to
    per-variable rescaling; ``ridge`` (times trace/D) is added to each
    within-group block before inversion.
    """
    xa, xb = np.atleast_2d(np.asarray(xa, float).T).T, np.atleast_2d(np.asarray(xb, float).T).T
    t, da = xa.shape
    db = xb.shape[1]
    if xb.shape[0] != t:
        raise DataError(f"groups have different lengths: {t} vs {xb.shape[0]}")
    if t <= da + db:
        raise DataError(f"pairwise CCA needs T > Da + Db = {da + db}, got {t}")
    sd_a, sd_b = _pop_std(xa), _pop_std(xb)
    c, _ = _corr(np.hstack([xa, xb]))
    caa, cab, cbb = c[:da, :da], c[:da, da:], c[da:, da:]
    caa_r = caa + ridge * np.trace(caa) / da * np.eye(da)
    cbb_r = cbb + ridge * np.trace(cbb) / db * np.eye(db)
    try:
        m = linalg.solve(caa_r, cab, assume_a="pos") @ linalg.solve(cbb_r, cab.T, assume_a="pos")
    except (linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"group covariance is singular after ridge: {exc}") from exc
    w, v = linalg.eig(m)
    if np.max(np.abs(w.imag)) > IMAG_TOL:
        raise NumericError(f"CCA eigenproblem returned complex eigenvalues (max |imag| {np.abs(w.imag).max():.2e})")
    w, v = w.real, v.real
    order = np.argsort(w)[::-1]
    w, v = w[order], v[:, order]
    a = v[:, 0]
    a = a / np.sqrt(a @ caa @ a)
    b = linalg.solve(cbb_r, cab.T @ a, assume_a="pos")
    b = b / np.sqrt(b @ cbb @ b)
    if a @ cab @ b < 0:
        b = -b
    corrs = np.sqrt(np.clip(w[: min(da, db)], 0.0, 1.0))
    return CcaResult((a / sd_a, b / sd_b), corrs)


@dataclass(frozen=True, eq=False)
class MccaResult:
    coefficients: tuple[np.ndarray, ...]
    eigenvalue: float
    panel: TimeSeriesPanel

    @property
    def correlation(self) -> float:
        """Two-group canonical correlation implied by the eigenvalue (G = 2 only)."""
        return self.eigenvalue - 1.0


def mcca_fit(panel: TimeSeriesPanel, partition: GroupPartition, ridge: float = RIDGE) -> MccaResult:
    """Sum-of-correlations multi-set CCA: leading solution of C a = lambda D a.

    C is the full correlation matrix and D its per-group block diagonal;
    both carry the same ridge on their diagonal so that G = 2 reproduces
    :func:`pairwise_cca` exactly.
    """
    if partition.n_vars != panel.n_vars:
        raise DataError(f"partition covers {partition.n_vars} variables, panel has {panel.n_vars}")
    x = panel.values
    c, xs = _corr(x)
    n = c.shape[0]
    d = np.zeros_like(c)
    ridge_diag = np.zeros(n)
    for g in partition.groups:
        ix = np.ix_(g, g)
        d[ix] = c[ix]
        ridge_diag[list(g)] = ridge * np.trace(c[ix]) / len(g)
    c_r = c + np.diag(ridge_diag)
    d_r = d + np.diag(ridge_diag)
    try:
        w, v = linalg.eigh(c_r, d_r)
    except linalg.LinAlgError as exc:
        raise NumericError(f"block-diagonal covariance is singular after ridge: {exc}") from exc
    top = v[:, -1]
    coefs, cols = [], []
    for g in partition.groups:
        a = top[list(g)]
        block = c[np.ix_(g, g)]
        var = a @ block @ a
        if var <= 1e-300:
            a = np.ones(len(g))
            var = a @ block @ a
        a = a / np.sqrt(var)
        coefs.append(a)
        cols.append(xs[:, list(g)] @ a)
    canon = np.column_stack(cols)
    canon = (canon - canon.mean(axis=0)) / canon.std(axis=0)
    sd = x.std(axis=0)
    names = tuple(f"canon{k}" for k in range(partition.n_groups))
    orig = tuple(a / sd[list(g)] for a, g in zip(coefs, partition.groups))
    return MccaResult(orig, float(w[-1]), TimeSeriesPanel(canon, names))


def mcca_reduce(panel: TimeSeriesPanel, partition: GroupPartition, ridge: float = RIDGE) -> TimeSeriesPanel:
    return mcca_fit(panel, partition, ridge).panel


@dataclass(frozen=True, eq=False)
class VarModel:
    lag_order: int
    coefs: np.ndarray  # (p, N, N); coefs[k, dst, src] multiplies z[t - k - 1, src]
    intercept: np.ndarray
    resid_cov: np.ndarray


def lag_design(values: np.ndarray, p: int, columns=None) -> np.ndarray:
    """[1, z_{t-1}, ..., z_{t-p}] rows for t = p..T-1 (selected columns only)."""
    t, n = values.shape
    cols = list(range(n)) if columns is None else list(columns)
    blocks = [np.ones((t - p, 1))]
    for k in range(1, p + 1):
        blocks.append(values[p - k:t - k][:, cols])
    return np.hstack(blocks)


def _check_lag(panel: TimeSeriesPanel, p: int):
    if p < 1:
        raise DataError(f"lag order must be >= 1, got {p}")
    need = panel.n_vars * p + 1 + 10
    if panel.n_steps <= need:
        raise DataError(f"VAR({p}) on {panel.n_vars} variables needs T > {need}, got {panel.n_steps}")


def _ols(x, y, ridge: float = 0.0):
    if ridge > 0:
        g = x.T @ x
        g = g + ridge * np.trace(g) / g.shape[0] * np.eye(g.shape[0])
        beta = linalg.solve(g, x.T @ y, assume_a="pos")
    else:
        if np.linalg.matrix_rank(x) < x.shape[1]:
            raise DataError("lagged regressor matrix is rank-deficient; drop collinear variables or use ridge")
        beta, *_ = np.linalg.lstsq(x, y, rcond=None)
    resid = y - x @ beta
    return beta, resid


def fit_var(panel: TimeSeriesPanel, lag_order: int = 5) -> VarModel:
    _check_lag(panel, lag_order)
    z = panel.values
    n, p = panel.n_vars, lag_order
    x = lag_design(z, p)
    beta, resid = _ols(x, z[p:])
    coefs = beta[1:].reshape(p, n, n).transpose(0, 2, 1)
    return VarModel(p, coefs, beta[0], resid.T @ resid / resid.shape[0])


def f_sf(f: float, d1: float, d2: float) -> float:
    """Upper tail of the F distribution through the regularized incomplete beta."""
    if f <= 0:
        return 1.0
    if not np.isfinite(f):
        return 0.0
    return float(special.betainc(d2 / 2.0, d1 / 2.0, d2 / (d2 + d1 * f)))


def granger_test(panel: TimeSeriesPanel, src: int, dst: int, lag_order: int = 5,
                 ridge: float = 0.0) -> tuple[float, float]:
    """F-test of whether the lags of ``src`` improve the VAR equation of ``dst``."""
    _check_lag(panel, lag_order)
    n, p = panel.n_vars, lag_order
    if src == dst:
        raise DataError("granger_test needs distinct source and target columns")
    z = panel.values
    y = z[p:, dst]
    full = lag_design(z, p)
    keep = [c for c in range(n) if c != src]
    restricted = lag_design(z, p, keep)
    _, r_f = _ols(full, y, ridge)
    _, r_r = _ols(restricted, y, ridge)
    rss_f, rss_r = float(r_f @ r_f), float(r_r @ r_r)
    dof = y.size - full.shape[1]
    scale = max(rss_r, 1e-300)
    if rss_f <= 1e-24 * scale:
        return (np.inf, 0.0) if rss_r > 1e-24 else (0.0, 1.0)
    f = max((rss_r - rss_f) / p, 0.0) / (rss_f / dof)
    return float(f), f_sf(f, p, dof)


def vgc_graph(panel: TimeSeriesPanel, lag_order: int = 5, alpha: float = 0.05, ridge: float = 0.0) -> GroupCausalGraph:
    n = panel.n_vars
    adj = np.zeros((n, n), dtype=bool)
    for i in range(n):
        for j in range(n):
            if i != j:
                adj[i, j] = granger_test(panel, i, j, lag_order, ridge)[1] < alpha
    return GroupCausalGraph(adj)


def mc_vgc_discover(panel: TimeSeriesPanel, partition: GroupPartition, lag_order: int = 5,
                    alpha: float = 0.05) -> GroupCausalGraph:
    # canonical columns may be collinear (e.g. duplicated groups); a tiny ridge keeps the F-test defined
    canon = mcca_reduce(panel, partition)
    return vgc_graph(canon, lag_order, alpha, ridge=1e-8)


def mc_cdmi_discover(panel: TimeSeriesPanel, partition: GroupPartition, config: DiscoveryConfig) -> GroupCausalGraph:
    canon = mcca_reduce(panel, partition)
    return discover_pairwise(canon, config)
