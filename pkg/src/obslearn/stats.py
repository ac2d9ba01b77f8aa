"""Hypothesis tests for irrationality rates and their distributions."""
from __future__ import annotations

import dataclasses
import itertools
import math

import numpy as np
from scipy import stats as sps


@dataclasses.dataclass(frozen=True)
class TestResult:
    statistic: float
    p_value: float
    n1: int
    n2: int
    method: str
    degenerate: bool = False

    __test__ = False  # not a pytest class


def _count(v) -> int:
    if float(v) != int(v):
        raise ValueError(f"counts must be whole numbers, got {v!r}")
    return int(v)


def _two_sided_normal(z: float) -> float:
    return float(math.erfc(abs(z) / math.sqrt(2.0)))


def prop_test_one(k: int, n: int, p0: float = 0.5) -> TestResult:
    """Normal-approximation z-test of H0: p = p0, two-sided."""
    k, n = _count(k), _count(n)
    if n < 1 or not 0 <= k <= n or not 0 < p0 < 1:
        raise ValueError(f"invalid inputs k={k}, n={n}, p0={p0}")
    z = (k / n - p0) / math.sqrt(p0 * (1 - p0) / n)
    return TestResult(float(z), _two_sided_normal(z), n, 0, "one_sample_z")


def two_prop_test(k1: int, n1: int, k2: int, n2: int) -> TestResult:
    """Pooled two-proportion z-test; positive statistic means sample 1 is higher."""
    k1, n1, k2, n2 = _count(k1), _count(n1), _count(k2), _count(n2)
    if n1 < 1 or n2 < 1 or not 0 <= k1 <= n1 or not 0 <= k2 <= n2:
        raise ValueError(f"invalid counts {k1}/{n1}, {k2}/{n2}")
    pooled = (k1 + k2) / (n1 + n2)
    if pooled in (0.0, 1.0):
        return TestResult(0.0, 1.0, n1, n2, "two_sample_z", degenerate=True)
    se = math.sqrt(pooled * (1 - pooled) * (1 / n1 + 1 / n2))
    z = (k1 / n1 - k2 / n2) / se
    return TestResult(float(z), _two_sided_normal(z), n1, n2, "two_sample_z")


def paired_rate_test(rates_a, rates_b) -> TestResult:
    """Paired t-test on per-subject differences a - b.

    With zero variance in the differences the statistic is undefined; the
    result is flagged degenerate with p = 1 if every difference is zero and
    p = 0 otherwise.
    """
    a = np.asarray(rates_a, dtype=float)
    b = np.asarray(rates_b, dtype=float)
    if a.shape != b.shape:
        raise ValueError(f"length mismatch: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ValueError("need at least two pairs")
    d = a - b
    mean = d.mean()
    sd = d.std(ddof=1)
    # rounding noise in the differences counts as zero variance
    if sd <= 1e-12 * max(1.0, abs(mean)):
        if abs(mean) <= 1e-12:
            return TestResult(0.0, 1.0, n, n, "paired_t", degenerate=True)
        return TestResult(math.copysign(math.inf, mean), 0.0, n, n, "paired_t", degenerate=True)
    t = mean / (sd / math.sqrt(n))
    p = 2 * sps.t.sf(abs(t), df=n - 1)
    return TestResult(float(t), float(min(1.0, p)), n, n, "paired_t")


def _ad_midrank_raw(samples: list[np.ndarray]) -> float:
    """k-sample A2 for possibly tied data, midrank (A2_akN) version."""
    pooled = np.sort(np.concatenate(samples))
    N = pooled.size
    zstar, l = np.unique(pooled, return_counts=True)
    # B_j: pooled count <= z*_j, shifted by half the ties
    Bj = np.searchsorted(pooled, zstar, side="right") - l / 2.0
    denom = Bj * (N - Bj) - N * l / 4.0
    total = 0.0
    for s in samples:
        s = np.sort(s)
        f = np.searchsorted(s, zstar, side="right") - np.searchsorted(s, zstar, side="left")
        Mij = np.searchsorted(s, zstar, side="right") - f / 2.0
        inner = l * (N * Mij - s.size * Bj) ** 2 / denom
        total += inner.sum() / s.size
    return (N - 1.0) / N**2 * total


def _ad_sigma(ns: list[int]) -> float:
    k = len(ns)
    N = sum(ns)
    H = sum(1.0 / n for n in ns)
    h = sum(1.0 / i for i in range(1, N))
    g = 0.0
    for i in range(1, N - 1):
        g += sum(1.0 / ((N - i) * j) for j in range(i + 1, N))
    a = (4 * g - 6) * (k - 1) + (10 - 6 * g) * H
    b = (2 * g - 4) * k**2 + 8 * h * k + (2 * g - 14 * h - 4) * H - 8 * h + 4 * g - 6
    c = (6 * h + 2 * g - 2) * k**2 + (4 * h - 4 * g + 6) * k + (2 * h - 6) * H + 4 * h
    d = (2 * h + 6) * k**2 - 4 * h * k
    var = (a * N**3 + b * N**2 + c * N + d) / ((N - 1.0) * (N - 2.0) * (N - 3.0))
    return math.sqrt(var)


# upper-tail critical values of the standardized statistic, m = k - 1 = 1
_AD_SIG = np.array([0.25, 0.1, 0.05, 0.025, 0.01, 0.005, 0.001])
_AD_B0 = np.array([0.675, 1.281, 1.645, 1.96, 2.326, 2.573, 3.085])
_AD_B1 = np.array([-0.245, 0.25, 0.678, 1.149, 1.822, 2.364, 3.615])
_AD_B2 = np.array([-0.105, -0.305, -0.362, -0.391, -0.396, -0.345, -0.154])


def _ad_interpolated_p(t: float, m: int = 1) -> float:
    crit = _AD_B0 + _AD_B1 / math.sqrt(m) + _AD_B2 / m
    coef = np.polyfit(crit, np.log(_AD_SIG), 2)
    # outside [0.001, 0.25] the values are extrapolated and only a rough guide;
    # the right tail continues along the tangent so p keeps decreasing
    t_max = crit.max()
    if t > t_max:
        log_p = np.polyval(coef, t_max) + np.polyval(np.polyder(coef), t_max) * (t - t_max)
    else:
        log_p = np.polyval(coef, t)
    return float(min(1.0, math.exp(min(log_p, 0.0))))


AD_METHODS = ("auto", "table", "permutation", "exact")


def anderson_darling_2(x, y, method: str = "auto", permutations: int = 1999, seed: int = 0) -> TestResult:
    """Two-sample Anderson-Darling test with midrank tie handling.

    The statistic is the standardized A2_akN of Scholz and Stephens for
    k = 2. P-values:

    ``"table"``
        log-quadratic interpolation of their tabulated critical values. This
        assumes continuous data and rejects too often when ties are heavy.
    ``"permutation"``
        Monte Carlo over ``permutations`` random relabellings drawn from
        ``seed``, so repeated calls give the same answer.
    ``"exact"``
        the full permutation distribution (both samples of size <= 10).
    ``"auto"``
        the table for untied data, the permutation p-value otherwise.

    If every observation is the same the statistic is undefined and the
    result is flagged degenerate with p = 1.
    """
    if method not in AD_METHODS:
        raise ValueError(f"method must be one of {AD_METHODS}, got {method!r}")
    x = np.asarray(x, dtype=float).ravel()
    y = np.asarray(y, dtype=float).ravel()
    if x.size == 0 or y.size == 0:
        raise ValueError("both samples must be non-empty")
    if x.size + y.size < 4:
        raise ValueError("need at least four observations in total")
    pooled = np.concatenate([x, y])
    if np.all(pooled == pooled[0]):
        return TestResult(math.nan, 1.0, x.size, y.size, "anderson_darling", degenerate=True)
    a2 = _ad_midrank_raw([x, y])
    t = (a2 - 1.0) / _ad_sigma([x.size, y.size])
    if method == "auto":
        method = "permutation" if np.unique(pooled).size < pooled.size else "table"
    if method == "exact":
        if max(x.size, y.size) > 10:
            raise ValueError("exact permutation p-values are limited to samples of size <= 10")
        p = _ad_permutation_p(x, y, a2)
        return TestResult(float(t), p, x.size, y.size, "anderson_darling_exact")
    if method == "permutation":
        if permutations < 1:
            raise ValueError("permutations must be positive")
        rng = np.random.default_rng(seed)
        keys = rng.random((permutations, pooled.size))
        # the x.size smallest keys in each row pick the relabelled first sample
        members = np.zeros_like(keys, dtype=bool)
        np.put_along_axis(members, np.argpartition(keys, x.size - 1, axis=1)[:, :x.size], True, axis=1)
        dist = _ad_raw_batch(pooled, members)
        hits = int(np.sum(dist >= a2 - 1e-12 * max(1.0, abs(a2))))
        p = (1 + hits) / (permutations + 1)
        return TestResult(float(t), p, x.size, y.size, "anderson_darling_permutation")
    return TestResult(float(t), _ad_interpolated_p(t), x.size, y.size, "anderson_darling")


def _ad_raw_batch(pooled: np.ndarray, members: np.ndarray) -> np.ndarray:
    """Raw two-sample A2 for many splits at once; ``members`` rows flag the first sample."""
    order = np.argsort(pooled, kind="stable")
    values = pooled[order]
    members = members[:, order]
    N = values.size
    zstar, starts, l = np.unique(values, return_index=True, return_counts=True)
    n1 = int(members[0].sum())
    n2 = N - n1
    Bj = np.cumsum(l) - l / 2.0
    denom = Bj * (N - Bj) - N * l / 4.0
    f1 = np.add.reduceat(members.astype(float), starts, axis=1)
    M1 = np.cumsum(f1, axis=1) - f1 / 2.0
    M2 = Bj - M1
    # the last distinct value can have a zero denominator only when the data are constant
    keep = denom > 0
    term1 = (l * (N * M1 - n1 * Bj) ** 2)[:, keep] / denom[keep]
    term2 = (l * (N * M2 - n2 * Bj) ** 2)[:, keep] / denom[keep]
    return (N - 1.0) / N**2 * (term1.sum(axis=1) / n1 + term2.sum(axis=1) / n2)


def ad_permutation_distribution(x, y) -> np.ndarray:
    """Raw A2 for every split of the pooled sample into groups of the original sizes."""
    pooled = np.concatenate([np.asarray(x, float), np.asarray(y, float)])
    N, n1 = pooled.size, len(x)
    out = []
    for idx in itertools.combinations(range(N), n1):
        mask = np.zeros(N, dtype=bool)
        mask[list(idx)] = True
        out.append(_ad_midrank_raw([pooled[mask], pooled[~mask]]))
    return np.array(out)


def _ad_permutation_p(x, y, observed: float) -> float:
    dist = ad_permutation_distribution(x, y)
    return float(np.mean(dist >= observed - 1e-12 * max(1.0, abs(observed))))
