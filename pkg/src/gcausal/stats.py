"""Two-sample tests for comparing observational and interventional residuals."""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass

import numpy as np
from scipy import special, stats as sps

from .errors import DataError

TEST_KINDS = ("KS", "MWU", "CVM", "WSR", "WELCH", "AD")
MIN_SAMPLES = 5
N_PERMUTATIONS = 199
PERTURBATIONS = ("control", "mean+0.5", "var*2", "both", "half-n")


@dataclass(frozen=True)
class TestOutcome:
    kind: str
    statistic: float
    p_value: float
    n_a: int
    n_b: int

    __test__ = False  # not a pytest class


def _as_sample(x, name) -> np.ndarray:
    x = np.asarray(x, dtype=float).ravel()
    if x.size < MIN_SAMPLES:
        raise DataError(f"sample {name} has {x.size} values; two-sample tests need at least {MIN_SAMPLES}")
    if not np.all(np.isfinite(x)):
        raise DataError(f"sample {name} contains non-finite values")
    return x


def kolmogorov_pvalue(c: float) -> float:
    """Asymptotic Kolmogorov survival function Q(C) = 2 sum (-1)^(k-1) exp(-2 k^2 C^2)."""
    if c <= 0:
        return 1.0
    if c < 1.0:
        # Jacobi-transformed form of the same function; the alternating series
        # converges too slowly near C = 0.
        y = math.pi ** 2 / (8.0 * c * c)
        total, k = 0.0, 1
        while True:
            term = math.exp(-(2 * k - 1) ** 2 * y)
            total += term
            if term < 1e-12:
                break
            k += 1
        p = 1.0 - math.sqrt(2.0 * math.pi) / c * total
    else:
        p, k = 0.0, 1
        while True:
            term = math.exp(-2.0 * k * k * c * c)
            p += 2.0 * (-1) ** (k - 1) * term
            if term < 1e-12:
                break
            k += 1
    return min(max(p, 0.0), 1.0)


def ks_statistic(a, b) -> float:
    """sup |F_a - F_b| over the pooled sample."""
    a, b = np.sort(a), np.sort(b)
    pooled = np.concatenate([a, b])
    fa = np.searchsorted(a, pooled, side="right") / a.size
    fb = np.searchsorted(b, pooled, side="right") / b.size
    return float(np.max(np.abs(fa - fb)))


def _ks(a, b):
    p, q = a.size, b.size
    c = math.sqrt(p * q / (p + q)) * ks_statistic(a, b)
    return c, kolmogorov_pvalue(c)


def _tie_term(x) -> float:
    _, counts = np.unique(x, return_counts=True)
    return float(np.sum(counts ** 3 - counts))


def _mwu(a, b):
    n1, n2 = a.size, b.size
    pooled = np.concatenate([a, b])
    ranks = sps.rankdata(pooled)
    u = float(ranks[:n1].sum() - n1 * (n1 + 1) / 2.0)
    n = n1 + n2
    var = n1 * n2 / 12.0 * ((n + 1) - _tie_term(pooled) / (n * (n - 1)))
    if var <= 0:
        return u, 1.0
    z = (abs(u - n1 * n2 / 2.0) - 0.5) / math.sqrt(var)
    return u, float(min(1.0, 2.0 * sps.norm.sf(max(z, 0.0))))


def _wsr(a, b):
    if a.size != b.size:
        raise DataError(f"WSR pairs samples by index; sizes differ ({a.size} vs {b.size})")
    d = a - b
    d = d[d != 0]
    n = d.size
    if n == 0:
        return 0.0, 1.0
    ad = np.abs(d)
    ranks = sps.rankdata(ad)
    w_plus = float(ranks[d > 0].sum())
    mean = n * (n + 1) / 4.0
    var = n * (n + 1) * (2 * n + 1) / 24.0 - _tie_term(ad) / 48.0
    if var <= 0:
        return w_plus, 1.0
    z = (w_plus - mean) / math.sqrt(var)
    return w_plus, float(min(1.0, 2.0 * sps.norm.sf(abs(z))))


def student_t_sf(t: float, df: float) -> float:
    """P(T > t) for t >= 0 via the regularized incomplete beta."""
    return 0.5 * float(special.betainc(df / 2.0, 0.5, df / (df + t * t)))


def _welch(a, b):
    ma, mb = a.mean(), b.mean()
    va, vb = a.var(ddof=1) / a.size, b.var(ddof=1) / b.size
    if va + vb == 0:
        return 0.0, (1.0 if ma == mb else 0.0)
    t = (ma - mb) / math.sqrt(va + vb)
    df = (va + vb) ** 2 / (va ** 2 / (a.size - 1) + vb ** 2 / (b.size - 1))
    return float(t), min(1.0, 2.0 * student_t_sf(abs(t), df))


def _rank_layout(a, b):
    """Sorted-pool bookkeeping shared by the permutation statistics."""
    pooled = np.concatenate([a, b])
    order = np.argsort(pooled, kind="mergesort")
    is_a = np.zeros(pooled.size, dtype=bool)
    is_a[: a.size] = True
    sorted_vals = pooled[order]
    # last index of each run of tied values
    run_end = np.flatnonzero(np.append(np.diff(sorted_vals) != 0, True))
    run_len = np.diff(np.concatenate([[-1], run_end]))
    return is_a[order], run_end, run_len


def _cvm_from_labels(labels, run_end, run_len, n_a, n_b):
    n = n_a + n_b
    cum_a = np.cumsum(labels, axis=-1)[..., run_end]
    cum_b = (run_end + 1) - cum_a
    diff = cum_a / n_a - cum_b / n_b
    return n_a * n_b / n ** 2 * np.sum(run_len * diff ** 2, axis=-1)


def _ad_from_labels(labels, run_end, run_len, n_a, n_b):
    n = n_a + n_b
    # the largest distinct value contributes 0/0 and is excluded
    ends, lens = run_end[:-1], run_len[:-1]
    cum_all = ends + 1
    cum_a = np.cumsum(labels, axis=-1)[..., ends]
    inner = lens / n * (n * cum_a - cum_all * n_a) ** 2 / (cum_all * (n - cum_all))
    return (1.0 / n_a + 1.0 / n_b) * np.sum(inner, axis=-1)


def _permutation_test(a, b, stat_fn, seed):
    # canonical order so that test(a, b) and test(b, a) draw the same permutations
    key_a, key_b = (a.size, tuple(np.sort(a))), (b.size, tuple(np.sort(b)))
    if key_b < key_a:
        a, b = b, a
    labels, run_end, run_len = _rank_layout(a, b)
    observed = float(stat_fn(labels, run_end, run_len, a.size, b.size))
    rng = np.random.default_rng(seed)
    perms = np.argsort(rng.random((N_PERMUTATIONS, labels.size)), axis=1)
    perm_stats = stat_fn(labels[perms], run_end, run_len, a.size, b.size)
    tol = 1e-12 * max(1.0, abs(observed))
    exceed = int(np.sum(perm_stats >= observed - tol))
    return observed, (1 + exceed) / (N_PERMUTATIONS + 1)


def two_sample_test(kind: str, a, b, seed: int = 0) -> TestOutcome:
    kind = kind.upper()
    if kind not in TEST_KINDS:
        raise DataError(f"unknown test kind {kind!r}; choose from {TEST_KINDS}")
    a, b = _as_sample(a, "a"), _as_sample(b, "b")
    if kind == "KS":
        stat, p = _ks(a, b)
    elif kind == "MWU":
        stat, p = _mwu(a, b)
    elif kind == "WSR":
        stat, p = _wsr(a, b)
    elif kind == "WELCH":
        stat, p = _welch(a, b)
    elif kind == "CVM":
        stat, p = _permutation_test(a, b, _cvm_from_labels, seed)
    else:
        stat, p = _permutation_test(a, b, _ad_from_labels, seed)
    return TestOutcome(kind, float(stat), float(min(max(p, 0.0), 1.0)), a.size, b.size)


def decide(outcome: TestOutcome, alpha: float) -> bool:
    """True when the test rejects invariance at level alpha (strict p < alpha)."""
    if not 0.0 < alpha < 1.0:
        raise DataError(f"alpha must lie in (0, 1), got {alpha}")
    return outcome.p_value < alpha


def _perturbed_pair(rng, perturbation: str, n: int):
    if perturbation == "half-n":
        m = n // 2
        return rng.normal(0.0, 1.0, m), rng.normal(0.5, 1.0, m)
    a = rng.normal(0.0, 1.0, n)
    mean = 0.5 if perturbation in ("mean+0.5", "both") else 0.0
    sd = math.sqrt(2.0) if perturbation in ("var*2", "both") else 1.0
    return a, rng.normal(mean, sd, n)


def sensitivity_study(n: int = 100, repetitions: int = 200, seed: int = 0, alpha: float = 0.05,
                      kinds=TEST_KINDS, perturbations=PERTURBATIONS) -> list[dict]:
    """Detection rate of each test against N(0, 1) versus a perturbed sample.

    ``half-n`` is the 0.5 mean shift at half the sample size.
    """
    if n < 20 or repetitions < 100:
        raise DataError(f"sensitivity_study needs n >= 20 and repetitions >= 100, got {n}, {repetitions}")
    rows = []
    for pi, pert in enumerate(perturbations):
        hits = dict.fromkeys(kinds, 0)
        for rep in range(repetitions):
            rng = np.random.default_rng([seed, pi, rep])
            a, b = _perturbed_pair(rng, pert, n)
            for kind in kinds:
                hits[kind] += decide(two_sample_test(kind, a, b, seed=rep), alpha)
        size = n // 2 if pert == "half-n" else n
        rows.extend({"test": k, "perturbation": pert, "n": size, "power": hits[k] / repetitions} for k in kinds)
    return rows


def write_power_table(rows: list[dict], path) -> None:
    with open(path, "w", newline="", encoding="utf-8") as fh:
        writer = csv.DictWriter(fh, fieldnames=["test", "perturbation", "n", "power"], lineterminator="\n")
        writer.writeheader()
        writer.writerows(rows)
