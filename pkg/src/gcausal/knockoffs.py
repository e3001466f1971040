"""Second-order Gaussian knockoffs used as in-distribution interventions.

Rows of the (standardized) panel are treated as exchangeable draws of the
stationary N-dimensional marginal, so knockoff columns match the
cross-sectional covariance but not the within-column autocorrelation.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .data import TimeSeriesPanel, standardize
from .errors import DataError, NumericError

EIG_FLOOR = 1e-8


@dataclass(frozen=True, eq=False)
class MomentEstimate:
    mean: np.ndarray
    covariance: np.ndarray

    @property
    def correlation(self) -> np.ndarray:
        d = np.sqrt(np.diag(self.covariance))
        r = self.covariance / np.outer(d, d)
        np.fill_diagonal(r, 1.0)
        return r


@dataclass(frozen=True, eq=False)
class KnockoffPanel:
    values: np.ndarray
    s: np.ndarray

    def columns(self, idx) -> np.ndarray:
        return self.values[:, list(idx)]


def psd_repair(m: np.ndarray, floor: float = EIG_FLOOR) -> np.ndarray:
    """Clip eigenvalues below ``floor`` and rebuild in the eigenvector basis."""
    m = 0.5 * (m + m.T)
    w, v = np.linalg.eigh(m)
    if w.min() >= floor:
        return m
    out = (v * np.maximum(w, floor)) @ v.T
    return 0.5 * (out + out.T)


def estimate_moments(panel: TimeSeriesPanel, shrinkage: float = 0.1) -> MomentEstimate:
    """Sample mean and covariance shrunk toward its diagonal."""
    if not 0.0 <= shrinkage < 1.0:
        raise DataError(f"shrinkage must lie in [0, 1), got {shrinkage}")
    x = panel.values
    if x.shape[0] < 2:
        raise DataError("moment estimation needs at least 2 time steps")
    mean = x.mean(axis=0)
    xc = x - mean
    s = xc.T @ xc / x.shape[0]
    var = np.diag(s)
    for name, v in zip(panel.variable_names, var):
        if v <= 0:
            raise DataError(f"variable {name!r} has zero variance")
    cov = (1.0 - shrinkage) * s + shrinkage * np.diag(var)
    return MomentEstimate(mean, psd_repair(cov))


def equicorrelated_s(correlation: np.ndarray) -> np.ndarray:
    """s_j = min(2 * lambda_min(R), 1) for every j."""
    r = np.asarray(correlation, dtype=float)
    if not np.allclose(np.diag(r), 1.0, atol=1e-8):
        raise DataError("equicorrelated_s needs a correlation matrix with unit diagonal")
    lam = np.linalg.eigvalsh(0.5 * (r + r.T)).min()
    return np.full(r.shape[0], min(2.0 * max(lam, 0.0), 1.0))


def sample_knockoffs(panel: TimeSeriesPanel, moments: MomentEstimate, s, seed: int = 0) -> KnockoffPanel:
    """Gaussian knockoffs X (I - R^-1 D) + E with E ~ N(0, 2D - D R^-1 D)."""
    x = panel.values
    r = moments.correlation
    s = np.asarray(s, dtype=float)
    n = r.shape[0]
    if x.shape[1] != n or s.shape != (n,):
        raise DataError(f"panel has {x.shape[1]} variables, moments {n}, s {s.shape}")
    if np.linalg.cond(r) > 1e12:
        raise NumericError("correlation matrix is singular; increase shrinkage")
    r_inv_d = np.linalg.solve(r, np.diag(s))
    d = np.diag(s)
    v = 2.0 * d - d @ r_inv_d
    v = 0.5 * (v + v.T)
    if np.linalg.eigvalsh(v).min() < -1e-6:
        raise NumericError("knockoff conditional covariance is not PSD; s is invalid for this correlation")
    v = psd_repair(v)
    rng = np.random.default_rng(seed)
    chol = np.linalg.cholesky(v)
    e = rng.standard_normal(x.shape) @ chol.T
    values = x @ (np.eye(n) - r_inv_d) + e
    return KnockoffPanel(values, s)


def make_knockoffs(panel: TimeSeriesPanel, shrinkage: float = 0.1, seed: int = 0) -> KnockoffPanel:
    """Standardize, estimate moments, pick equicorrelated s and sample."""
    z, _, _ = standardize(panel)
    moments = estimate_moments(z, shrinkage)
    return sample_knockoffs(z, moments, equicorrelated_s(moments.correlation), seed)


def _pop_cov(a, b):
    a = a - a.mean(axis=0)
    b = b - b.mean(axis=0)
    return a.T @ b / a.shape[0]


def diagnostics(panel: TimeSeriesPanel, knockoffs: KnockoffPanel, moments: MomentEstimate | None = None) -> dict:
    """Covariance match, mean |corr(Z_j, Z~_j)| and cross-block error."""
    z = panel.values
    zk = knockoffs.values
    if z.shape != zk.shape:
        raise DataError(f"panel {z.shape} and knockoffs {zk.shape} are not aligned")
    if moments is None:
        moments = estimate_moments(panel, 0.0)
    cov_z = _pop_cov(z, z)
    cov_k = _pop_cov(zk, zk)
    cross = _pop_cov(z, zk)
    sd_z = np.sqrt(np.diag(cov_z))
    sd_k = np.sqrt(np.diag(cov_k))
    with np.errstate(divide="ignore", invalid="ignore"):
        self_corr = np.where(sd_k > 0, np.diag(cross) / (sd_z * np.where(sd_k > 0, sd_k, 1.0)), 0.0)
    sigma = moments.covariance
    d_sigma = np.diag(knockoffs.s * np.diag(sigma))
    return {
        "cov_match_error": float(np.max(np.abs(cov_k - cov_z))),
        "mean_self_corr": float(np.mean(np.abs(self_corr))),
        "cross_block_error": float(np.max(np.abs(cross - (sigma - d_sigma)))),
    }


def swap_deviation(panel: TimeSeriesPanel, knockoffs: KnockoffPanel) -> float:
    """Largest change of the joint 2N x 2N covariance when one Z_j is swapped with Z~_j."""
    z, zk = panel.values, knockoffs.values
    joint = np.hstack([z, zk])
    base = _pop_cov(joint, joint)
    n = z.shape[1]
    worst = 0.0
    for j in range(n):
        perm = np.arange(2 * n)
        perm[j], perm[n + j] = n + j, j
        swapped = base[np.ix_(perm, perm)]
        worst = max(worst, float(np.max(np.abs(swapped - base))))
    return worst


def equicorrelated_panel(n_steps: int, n_vars: int, rho: float, seed: int) -> TimeSeriesPanel:
    rng = np.random.default_rng(seed)
    cov = (1.0 - rho) * np.eye(n_vars) + rho
    x = rng.multivariate_normal(np.zeros(n_vars), cov, size=n_steps, method="cholesky")
    return TimeSeriesPanel(x)


def dimension_sweep(dims, trials: int = 10, seed: int = 0, rho: float = 0.5,
                    n_steps: int = 200, shrinkage: float = 0.1) -> list[dict]:
    """Mean self-correlation of knockoffs on equicorrelated panels per dimension.

    Returns one row per (N, trial) plus nothing else; use
    :func:`sweep_means` to average across trials.
    """
    dims = list(dims)
    if not dims:
        raise DataError("dimension_sweep needs at least one dimension")
    rows = []
    for trial in range(trials):
        for n in dims:
            ss = np.random.SeedSequence([seed, trial, n])
            data_seed, ko_seed = (int(c.generate_state(1)[0]) for c in ss.spawn(2))
            panel, _, _ = standardize(equicorrelated_panel(n_steps, n, rho, data_seed))
            moments = estimate_moments(panel, shrinkage)
            ko = sample_knockoffs(panel, moments, equicorrelated_s(moments.correlation), ko_seed)
            rows.append({"N": n, "trial": trial, "mean_self_corr": diagnostics(panel, ko)["mean_self_corr"]})
    return rows


def sweep_means(rows: list[dict]) -> list[dict]:
    dims = sorted({r["N"] for r in rows})
    return [
        {"N": n, "mean_self_corr": float(np.mean([r["mean_self_corr"] for r in rows if r["N"] == n]))}
        for n in dims
    ]
