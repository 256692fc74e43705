"""Two-sample rank tests: Mann-Whitney U and Kolmogorov-Smirnov.

Both tests are computed from the pooled sample's ranks only, so they are
invariant under any strictly increasing transform of the data. Small samples
get exact permutation p-values (returned as ``Fraction`` by the ``*_exact``
helpers); larger ones use the usual asymptotic approximations.

The ``*_scan_logp`` functions evaluate a test at many split points of one
series at once. A split at ``k`` compares ``x[:k]`` with ``x[k:]``; because
the pooled sample is the same for every split, ranks are computed once.
Results are natural-log p-values so that very small p-values stay ordered.
"""

from __future__ import annotations

import itertools
import math
from fractions import Fraction
from typing import Sequence

import numpy as np
from scipy.special import log_ndtr
from scipy.stats import kstwobign

from ..errors import EmptySample

EXACT_MAX_TOTAL = 12
MW_EXACT_MAX_PRODUCT = 200

_LOG2 = math.log(2.0)


def _as_samples(a: Sequence[float], b: Sequence[float]) -> tuple[np.ndarray, np.ndarray]:
    a = np.asarray(a, dtype=float).ravel()
    b = np.asarray(b, dtype=float).ravel()
    if a.size == 0 or b.size == 0:
        raise EmptySample("both samples need at least one observation")
    if np.isnan(a).any() or np.isnan(b).any():
        raise ValueError("samples must not contain NaN")
    return a, b


def doubled_midranks(x: np.ndarray) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Return (2 * midrank per item, dense group id per item, group sizes).

    Doubling keeps tied midranks integral.
    """
    _, group, counts = np.unique(x, return_inverse=True, return_counts=True)
    ends = np.cumsum(counts)
    r2 = (2 * ends - counts + 1)[group]
    return r2.astype(np.int64), group.ravel(), counts


def mw_uses_exact(k: int, m: int) -> bool:
    return k + m <= EXACT_MAX_TOTAL or k * m <= MW_EXACT_MAX_PRODUCT


# -- Mann-Whitney ------------------------------------------------------------


def _subset_sum_counts(r2: np.ndarray, jmax: int) -> np.ndarray:
    """counts[j, s] = number of j-item subsets of ``r2`` whose sum is ``s``."""
    total = int(r2.sum())
    counts = np.zeros((jmax + 1, total + 1), dtype=np.int64)
    counts[0, 0] = 1
    seen = 0
    for r in r2.tolist():
        seen += 1
        for j in range(min(jmax, seen), 0, -1):
            counts[j, r:] += counts[j - 1, : total + 1 - r]
    return counts


def _mw_exact_from_counts(counts: np.ndarray, j: int, n: int, r_obs: int) -> Fraction:
    # doubled rank sum of a j-subset has mean j * (n + 1)
    sums = np.arange(counts.shape[1], dtype=np.int64)
    centre = j * (n + 1)
    extreme = np.abs(sums - centre) >= abs(r_obs - centre)
    hits = int(counts[j][extreme].sum())
    return Fraction(hits, math.comb(n, j))


def _mw_normal_logp(u2: np.ndarray, k: np.ndarray, m: np.ndarray, n: int, tie_sum: int) -> np.ndarray:
    # u2 is twice the U statistic of the first sample
    dev = np.abs(u2 - k * m) / 2.0
    dev = np.maximum(dev - 0.5, 0.0)
    var = (k * m / 12.0) * ((n + 1) - tie_sum / (n * (n - 1)))
    with np.errstate(divide="ignore", invalid="ignore"):
        z = np.where(var > 0, dev / np.sqrt(np.where(var > 0, var, 1.0)), 0.0)
    return np.minimum(_LOG2 + log_ndtr(-z), 0.0)


def mann_whitney_exact(a: Sequence[float], b: Sequence[float]) -> Fraction:
    """Exact two-sided permutation p-value of the U statistic (midranks for ties)."""
    a, b = _as_samples(a, b)
    k, m = a.size, b.size
    n = k + m
    r2, _, _ = doubled_midranks(np.concatenate([a, b]))
    # the smaller side gives the same two-sided test with a smaller table
    if k <= m:
        j, r_obs = k, int(r2[:k].sum())
    else:
        j, r_obs = m, int(r2[k:].sum())
    return _mw_exact_from_counts(_subset_sum_counts(r2, j), j, n, r_obs)


def mann_whitney_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sided Mann-Whitney U p-value.

    Exact when ``len(a) + len(b) <= 12`` or ``len(a) * len(b) <= 200``,
    otherwise the normal approximation with tie-corrected variance and a
    continuity correction.
    """
    a, b = _as_samples(a, b)
    k, m = a.size, b.size
    if mw_uses_exact(k, m):
        return float(mann_whitney_exact(a, b))
    n = k + m
    r2, _, counts = doubled_midranks(np.concatenate([a, b]))
    u2 = int(r2[:k].sum()) - k * (k + 1)
    tie_sum = int((counts.astype(np.int64) ** 3 - counts).sum())
    logp = _mw_normal_logp(np.array([u2]), np.array([k]), np.array([m]), n, tie_sum)
    return float(np.exp(logp[0]))


def mw_scan_logp(x: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Log p-values of the Mann-Whitney test for every split in ``ks``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    ks = np.asarray(ks, dtype=np.int64)
    if ks.size == 0:
        return np.empty(0)
    r2, _, counts = doubled_midranks(x)
    prefix = np.concatenate([[0], np.cumsum(r2)])
    total = int(prefix[-1])
    m = n - ks
    r_first = prefix[ks]
    u2 = r_first - ks * (ks + 1)
    tie_sum = int((counts.astype(np.int64) ** 3 - counts).sum())
    logp = _mw_normal_logp(u2, ks, m, n, tie_sum)

    exact = np.array([mw_uses_exact(int(k), int(mm)) for k, mm in zip(ks, m)], dtype=bool)
    if exact.any():
        small = np.minimum(ks[exact], m[exact])
        table = _subset_sum_counts(r2, int(small.max()))
        for i in np.flatnonzero(exact):
            k, mm = int(ks[i]), int(m[i])
            if k <= mm:
                j, r_obs = k, int(r_first[i])
            else:
                j, r_obs = mm, total - int(r_first[i])
            logp[i] = math.log(_mw_exact_from_counts(table, j, n, r_obs))
    return logp


# -- Kolmogorov-Smirnov --------------------------------------------------------


def _ks_scaled_d(group: np.ndarray, n_groups: int, k: int, m: int) -> int:
    """k * m * D for the split of ``group`` into the first k and the last m."""
    ca = np.cumsum(np.bincount(group[:k], minlength=n_groups))
    cb = np.cumsum(np.bincount(group[k:], minlength=n_groups))
    return int(np.abs(ca * m - cb * k).max())


def ks_statistic(a: Sequence[float], b: Sequence[float]) -> float:
    a, b = _as_samples(a, b)
    _, group, counts = doubled_midranks(np.concatenate([a, b]))
    return _ks_scaled_d(group, counts.size, a.size, b.size) / (a.size * b.size)


def _ks_exact_from_groups(group: np.ndarray, n_groups: int, k: int, d_obs: int) -> Fraction:
    n = group.size
    combos = np.array(list(itertools.combinations(range(n), k)), dtype=np.int64)
    member = np.zeros((combos.shape[0], n), dtype=np.int64)
    np.put_along_axis(member, combos, 1, axis=1)
    onehot = np.zeros((n, n_groups), dtype=np.int64)
    onehot[np.arange(n), group] = 1
    ca = np.cumsum(member @ onehot, axis=1)
    cb = np.cumsum(onehot.sum(axis=0)) - ca
    d = np.abs(ca * (n - k) - cb * k).max(axis=1)
    return Fraction(int((d >= d_obs).sum()), combos.shape[0])


def ks_exact(a: Sequence[float], b: Sequence[float]) -> Fraction:
    """Exact two-sided KS p-value: share of labelings with D at least the observed one."""
    a, b = _as_samples(a, b)
    _, group, counts = doubled_midranks(np.concatenate([a, b]))
    d_obs = _ks_scaled_d(group, counts.size, a.size, b.size)
    return _ks_exact_from_groups(group, counts.size, a.size, d_obs)


def _ks_asymptotic_logp(d: float, k: int, m: int) -> float:
    lam = math.sqrt(k * m / (k + m)) * d
    sf = float(kstwobign.sf(lam))
    if sf > 1e-300:
        return min(math.log(sf), 0.0)
    # leading term of the Kolmogorov series once sf underflows
    return _LOG2 - 2.0 * lam * lam


def ks_p(a: Sequence[float], b: Sequence[float]) -> float:
    """Two-sample KS p-value; exact for at most 12 pooled observations."""
    a, b = _as_samples(a, b)
    k, m = a.size, b.size
    if k + m <= EXACT_MAX_TOTAL:
        return float(ks_exact(a, b))
    return math.exp(_ks_asymptotic_logp(ks_statistic(a, b), k, m))


def ks_scan_logp(x: np.ndarray, ks: np.ndarray) -> np.ndarray:
    """Log p-values of the KS test for every split in ``ks``."""
    x = np.asarray(x, dtype=float)
    n = x.size
    _, group, counts = doubled_midranks(x)
    g = counts.size
    total = np.cumsum(counts)
    out = np.empty(len(ks))
    for i, k in enumerate(np.asarray(ks, dtype=np.int64).tolist()):
        m = n - k
        ca = np.cumsum(np.bincount(group[:k], minlength=g))
        d_int = int(np.abs(ca * m - (total - ca) * k).max())
        if n <= EXACT_MAX_TOTAL:
            out[i] = math.log(_ks_exact_from_groups(group, g, k, d_int))
        else:
            out[i] = _ks_asymptotic_logp(d_int / (k * m), k, m)
    return out
