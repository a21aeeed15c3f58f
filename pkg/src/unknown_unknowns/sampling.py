"""Publicity shapes and weighted sampling without replacement.

Shared by the simulator (which draws one concrete sample) and the
Monte-Carlo estimator (which draws thousands of merged histograms), so both
agree on what a given skew parameter means.
"""

from __future__ import annotations

import numpy as np

# Rank ``i`` of ``N`` gets weight exp(-lam * i * scale / N), so the head-to-tail
# ratio is exp(-lam * scale) at any population size.  Simulated populations use
# scale 1 (lam = 4 is heavy skew); the Monte-Carlo grid uses scale 10, so its
# lam = 0.4 denotes the same shape as a simulated lam = 4.
SIM_RANK_SCALE = 1.0
MC_RANK_SCALE = 10.0

# Rejection sampling is used while a source draws at most this share of the
# population; larger draws switch to exponential keys.
_REJECTION_SHARE = 0.25
_REJECTION_ROUNDS = 64


def publicity_weights(n_items: int, lam: float, scale: float = SIM_RANK_SCALE) -> np.ndarray:
    """Normalized publicity for ranks 1..n_items.

    Rank ``i`` gets weight ``exp(-lam * i * scale / n_items)``; ``lam == 0``
    is uniform and negative ``lam`` reverses the direction of the skew.
    """
    if n_items < 1:
        raise ValueError("n_items must be positive")
    exponent = -lam * scale * np.arange(1, n_items + 1) / n_items
    exponent -= exponent.max()
    weights = np.exp(exponent)
    return weights / weights.sum()


def ordered_draw(weights: np.ndarray, size: int, rng: np.random.Generator) -> np.ndarray:
    """Indices of ``size`` items drawn one at a time without replacement,
    each draw proportional to the remaining weights, in draw order.

    Sorting exponential keys ``E_i / w_i`` ascending reproduces the sequential
    draw order exactly (Efraimidis-Spirakis).
    """
    if size > len(weights):
        raise ValueError("cannot draw more distinct items than exist")
    keys = rng.standard_exponential(len(weights)) / weights
    if size == len(weights):
        return np.argsort(keys, kind="stable")
    head = np.argpartition(keys, size - 1)[:size]
    return head[np.argsort(keys[head], kind="stable")]


def _draw_by_keys(weights, size, rows, rng):
    keys = rng.standard_exponential((rows, len(weights))) / weights
    if size == len(weights):
        return np.tile(np.arange(len(weights)), (rows, 1))
    return np.argpartition(keys, size - 1, axis=1)[:, :size]


def _candidates(cdf, log_ratio):
    """Sampler of i.i.d. item indices (with replacement) for one weight vector.

    With ``log_ratio`` given, the weights are taken to be ``r**i`` with
    ``log r = log_ratio`` (the exponential publicity shape), whose inverse CDF
    has a closed form; otherwise the CDF is searched.
    """
    last = len(cdf) - 1
    if log_ratio is None:
        return lambda u: np.minimum(np.searchsorted(cdf, u, side="right"), last)
    if log_ratio == 0.0:
        return lambda u: np.minimum((u * len(cdf)).astype(np.int64), last)
    span = np.expm1(len(cdf) * log_ratio)
    return lambda u: np.minimum(np.log1p(u * span) / log_ratio, last).astype(np.int64)


def _draw_by_rejection(weights, sampler, size, rows, rng):
    """Sequential draws: sample with replacement and skip repeats."""
    chosen = np.empty((rows, size), dtype=np.int64)
    last = len(weights) - 1
    for t in range(size):
        pending = np.arange(rows)
        for _ in range(_REJECTION_ROUNDS):
            cand = sampler(rng.random(len(pending)))
            if t:
                clash = (chosen[pending, :t] == cand[:, None]).any(axis=1)
            else:
                clash = np.zeros(len(pending), dtype=bool)
            chosen[pending[~clash], t] = cand[~clash]
            pending = pending[clash]
            if not len(pending):
                break
        for row in pending:
            # exact draw from the renormalized remainder
            remaining = weights.copy()
            remaining[chosen[row, :t]] = 0.0
            r_cdf = np.cumsum(remaining)
            pick = np.searchsorted(r_cdf, rng.random() * r_cdf[-1], side="right")
            chosen[row, t] = min(int(pick), last)
    return chosen


def draw_batches(
    weights: np.ndarray,
    sizes: np.ndarray,
    runs: int,
    rng: np.random.Generator,
    *,
    log_ratio: float | None = None,
) -> list[np.ndarray]:
    """For each source size, an array of shape (runs, size) of item indices
    sampled without replacement (order within a row is not meaningful).

    Sources are independent; each row of each batch is one source in one run.
    Pass ``log_ratio`` when ``weights`` are exponential in the index (as from
    :func:`publicity_weights`) to use the faster closed-form sampler.
    """
    sizes = np.asarray(sizes, dtype=np.int64)
    n_items = len(weights)
    if sizes.size and sizes.max() > n_items:
        raise ValueError("source larger than population")
    cdf = np.cumsum(weights)
    cdf /= cdf[-1]
    sampler = _candidates(cdf, log_ratio)
    out: list[np.ndarray | None] = [None] * len(sizes)
    for size in np.unique(sizes):
        idx = np.flatnonzero(sizes == size)
        rows = runs * len(idx)
        if size == 0:
            draws = np.empty((rows, 0), dtype=np.int64)
        elif size <= _REJECTION_SHARE * n_items:
            draws = _draw_by_rejection(weights, sampler, int(size), rows, rng)
        else:
            draws = _draw_by_keys(weights, int(size), rows, rng)
        draws = draws.reshape(runs, len(idx), size)
        for k, j in enumerate(idx):
            out[j] = draws[:, k, :]
    return out


def log_ratio(n_items: int, lam: float, scale: float = SIM_RANK_SCALE) -> float:
    """Log of the weight ratio between consecutive ranks in
    :func:`publicity_weights`."""
    return -lam * scale / n_items


def merged_counts(batches: list[np.ndarray], n_items: int, runs: int) -> np.ndarray:
    """Per-run occurrence counts, shape (runs, n_items)."""
    draws = [d for d in batches if d.size]
    if not draws:
        return np.zeros((runs, n_items), dtype=np.int64)
    flat = np.concatenate(draws, axis=1) + (np.arange(runs) * n_items)[:, None]
    return np.bincount(flat.ravel(), minlength=runs * n_items).reshape(runs, n_items)
