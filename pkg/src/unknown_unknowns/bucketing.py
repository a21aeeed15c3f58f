"""Value-range bucketing for the SUM estimators.

Splitting the value range lets each bucket substitute its own mean for its
own missing entities, which corrects for publicity that correlates with the
value.  Static schemes (equi-width, equi-height) need a bucket count;
:func:`dynamic_buckets` instead splits greedily, accepting a split only when
it strictly lowers the summed absolute delta over all buckets.
"""

from __future__ import annotations

import math
from collections import deque
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .core_stats import FrequencyStatistics, IntegratedSample
from .errors import EmptySample
from .estimators import EstimatorKind

# Relative slack for "strictly lower" so float noise never accepts a split.
_SPLIT_RTOL = 1e-12


@dataclass(frozen=True)
class Bucket:
    lo: float
    hi: float
    entity_ids: tuple
    counts: tuple[int, ...]
    values: tuple[float, ...]

    @property
    def stats(self) -> FrequencyStatistics:
        return FrequencyStatistics.from_counts(self.counts)

    @property
    def phi(self) -> float:
        return float(sum(self.values))

    @property
    def c(self) -> int:
        return len(self.entity_ids)

    @property
    def n(self) -> int:
        return int(sum(self.counts))

    def mean(self) -> float:
        return self.phi / self.c if self.c else math.nan


@dataclass(frozen=True)
class BucketEstimate:
    buckets: list[Bucket]
    per_bucket_delta: list[float]
    total_delta: float
    per_bucket_n_hat: list[float]

    @property
    def divergent(self) -> bool:
        return any(math.isinf(d) for d in self.per_bucket_delta)

    @property
    def n_hat(self) -> float | None:
        """Summed per-bucket Chao92 counts, or None if any bucket diverges."""
        if any(math.isinf(x) for x in self.per_bucket_n_hat):
            return None
        return float(sum(self.per_bucket_n_hat))


def _leaf(leaf) -> EstimatorKind:
    leaf = EstimatorKind.parse(leaf)
    if leaf not in (EstimatorKind.NAIVE, EstimatorKind.FREQUENCY):
        raise ValueError(f"bucket leaves must be naive or frequency, not {leaf.value}")
    return leaf


def _gamma_sq(n, c, f1, s2):
    with np.errstate(divide="ignore", invalid="ignore"):
        coverage = 1.0 - f1 / n
        g = (c / coverage) * s2 / (n * (n - 1.0)) - 1.0
    return np.where(np.isfinite(g), np.maximum(g, 0.0), 0.0)


def leaf_deltas(n, c, f1, s2, phi, phi1, leaf: EstimatorKind) -> np.ndarray:
    """Vectorized per-bucket delta from range statistics.

    ``s2`` is the sum of m(m-1) over entities, ``phi1`` the value sum of the
    singletons.  Empty buckets and buckets without singletons give 0;
    all-singleton buckets give +inf.
    """
    n, c, f1, s2, phi, phi1 = (np.asarray(a, dtype=float) for a in (n, c, f1, s2, phi, phi1))
    g = _gamma_sq(n, c, f1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        if leaf is EstimatorKind.NAIVE:
            d = phi * f1 * (c + g * n) / (c * (n - f1))
        else:
            d = phi1 * (c + g * n) / (n - f1)
    d = np.where(f1 == 0, 0.0, d)
    return np.where((n > 0) & (n == f1), np.inf, d)


def leaf_counts(n, c, f1, s2) -> np.ndarray:
    """Vectorized per-bucket Chao92 count (inf for all-singleton buckets)."""
    n, c, f1, s2 = (np.asarray(a, dtype=float) for a in (n, c, f1, s2))
    g = _gamma_sq(n, c, f1, s2)
    with np.errstate(divide="ignore", invalid="ignore"):
        coverage = 1.0 - f1 / n
        est = c / coverage + n * (1.0 - coverage) / coverage * g
    est = np.where(f1 == 0, c, est)
    return np.where((n > 0) & (n == f1), np.inf, est)


def coverage_count(n, c, f1) -> np.ndarray:
    """``n * c / (n - f1)``: the count estimate ``c / C_hat`` without the
    skew correction.  Splitting a bucket into two halves never lowers the
    summed estimate; this is why bucketing can only add to the naive count."""
    n, c, f1 = (np.asarray(a, dtype=float) for a in (n, c, f1))
    with np.errstate(divide="ignore"):
        return n * c / (n - f1)


class _ValueIndex:
    """Entities grouped by unique value with prefix sums, so that statistics
    of any contiguous value range cost O(1)."""

    def __init__(self, sample: IntegratedSample):
        if sample.c == 0:
            raise EmptySample("cannot bucket an empty sample")
        order = np.argsort(sample.values, kind="stable")
        self.ids = [sample.entity_ids[i] for i in order]
        self.m = sample.counts[order]
        self.v = sample.values[order]
        self.uniq, self.start = np.unique(self.v, return_index=True)
        self.stop = np.append(self.start[1:], len(self.v))
        single = self.m == 1
        per_entity = np.stack([
            self.m,
            np.ones_like(self.v),
            single,
            self.m * (self.m - 1),
            self.v,
            np.where(single, self.v, 0.0),
        ]).astype(float)
        grouped = np.add.reduceat(per_entity, self.start, axis=1)
        self.prefix = np.concatenate([np.zeros((6, 1)), np.cumsum(grouped, axis=1)], axis=1)

    def range_stats(self, i, j) -> np.ndarray:
        """Stats of unique-value ranges [i, j); shape (6, k) for k ranges."""
        return self.prefix[:, np.atleast_1d(j)] - self.prefix[:, np.atleast_1d(i)]

    def bucket(self, i: int, j: int) -> Bucket:
        a, b = self.start[i], self.stop[j - 1]
        return Bucket(
            lo=float(self.uniq[i]),
            hi=float(self.uniq[j - 1]),
            entity_ids=tuple(self.ids[a:b]),
            counts=tuple(int(x) for x in self.m[a:b]),
            values=tuple(float(x) for x in self.v[a:b]),
        )


def _members(sample: IntegratedSample, mask: np.ndarray, lo: float, hi: float) -> Bucket:
    idx = np.flatnonzero(mask)
    idx = idx[np.argsort(sample.values[idx], kind="stable")]
    return Bucket(
        lo=float(lo),
        hi=float(hi),
        entity_ids=tuple(sample.entity_ids[i] for i in idx),
        counts=tuple(int(sample.counts[i]) for i in idx),
        values=tuple(float(sample.values[i]) for i in idx),
    )


def split_equiwidth(sample: IntegratedSample, n_b: int) -> list[Bucket]:
    """``n_b`` buckets of equal width over the observed range.

    Buckets are half-open ``[lo, hi)`` except the last, which is closed at the
    maximum.  Empty buckets are kept.  A zero-width range puts everything in
    the first bucket.
    """
    if n_b < 1:
        raise ValueError("n_b must be >= 1")
    if sample.c == 0:
        raise EmptySample("cannot bucket an empty sample")
    a_min, a_max = float(sample.values.min()), float(sample.values.max())
    width = (a_max - a_min) / n_b
    if width > 0:
        index = np.minimum(np.floor((sample.values - a_min) / width), n_b - 1).astype(int)
    else:
        index = np.zeros(sample.c, dtype=int)
    buckets = []
    for k in range(n_b):
        lo = a_min + k * width
        hi = a_max if k == n_b - 1 else a_min + (k + 1) * width
        buckets.append(_members(sample, index == k, lo, hi))
    return buckets


def split_equiheight(sample: IntegratedSample, n_b: int) -> list[Bucket]:
    """Unique entities sorted by value, cut into ``n_b`` near-equal groups.

    Cuts never separate entities with equal values (a cut inside a run of
    ties moves to the end of the run), so ties can yield fewer buckets.
    """
    if n_b < 1:
        raise ValueError("n_b must be >= 1")
    index = _ValueIndex(sample)
    c = len(index.v)
    n_b = min(n_b, c)
    sizes = [c // n_b + (1 if k < c % n_b else 0) for k in range(n_b)]
    cuts = []
    for pos in np.cumsum(sizes)[:-1]:
        while pos < c and index.v[pos - 1] == index.v[pos]:
            pos += 1
        if pos < c and (not cuts or pos > cuts[-1]):
            cuts.append(int(pos))
    bounds = [0, *cuts, c]
    buckets = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        buckets.append(Bucket(
            lo=float(index.v[a]),
            hi=float(index.v[b - 1]),
            entity_ids=tuple(index.ids[a:b]),
            counts=tuple(int(x) for x in index.m[a:b]),
            values=tuple(float(x) for x in index.v[a:b]),
        ))
    return buckets


def bucket_delta(buckets: Sequence[Bucket], leaf=EstimatorKind.NAIVE) -> BucketEstimate:
    """Leaf estimate per bucket, summed.

    Empty buckets contribute 0; all-singleton buckets contribute +inf, which
    is excluded from ``total_delta`` but marks the estimate divergent.
    """
    leaf = _leaf(leaf)
    rows = []
    for b in buckets:
        fs = b.stats
        phi1 = sum(v for v, m in zip(b.values, b.counts) if m == 1)
        rows.append((fs.n, fs.c, fs.f1, fs.pair_sum, b.phi, phi1))
    if not rows:
        return BucketEstimate([], [], 0.0, [])
    cols = np.array(rows, dtype=float).T
    deltas = leaf_deltas(*cols, leaf)
    counts = leaf_counts(*cols[:4])
    total = float(deltas[np.isfinite(deltas)].sum())
    return BucketEstimate(list(buckets), deltas.tolist(), total, counts.tolist())


def dynamic_buckets(sample: IntegratedSample, leaf=EstimatorKind.NAIVE) -> BucketEstimate:
    """Greedy recursive splitting on unique observed values.

    Starting from one bucket over the whole range, buckets are taken from a
    FIFO work list; for each, every split ``value <= v | value > v`` is
    scored by the resulting global sum of absolute deltas.  The best split is
    accepted only if it is strictly lower than the current sum (ties go to
    the smallest ``v``), and both halves are queued; otherwise the bucket is
    final.  An all-singleton root cannot be improved and is returned as a
    single divergent bucket.
    """
    leaf = _leaf(leaf)
    index = _ValueIndex(sample)

    def abs_delta(i, j):
        return np.abs(leaf_deltas(*index.range_stats(i, j), leaf))

    n_unique = len(index.uniq)
    current = float(abs_delta(0, n_unique)[0])
    todo = deque([(0, n_unique)])
    final = []
    while todo:
        i, j = todo.popleft()
        if j - i >= 2 and math.isfinite(current):
            rest = current - float(abs_delta(i, j)[0])
            ks = np.arange(i + 1, j)
            totals = rest + abs_delta(i, ks) + abs_delta(ks, j)
            best = int(np.argmin(totals))
            if totals[best] < current - _SPLIT_RTOL * max(1.0, abs(current)):
                current = float(totals[best])
                k = int(ks[best])
                todo.extend([(i, k), (k, j)])
                continue
        final.append((i, j))
    final.sort()
    stats = np.concatenate([index.range_stats(i, j) for i, j in final], axis=1)
    deltas = leaf_deltas(*stats, leaf)
    counts = leaf_counts(*stats[:4])
    total = float(deltas[np.isfinite(deltas)].sum())
    return BucketEstimate(
        [index.bucket(i, j) for i, j in final], deltas.tolist(), total, counts.tolist()
    )
