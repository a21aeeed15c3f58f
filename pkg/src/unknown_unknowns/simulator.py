"""Synthetic ground truths and multi-source samples.

A population of ``n_items`` entities with evenly spaced values is given an
exponential publicity profile; ``rho`` controls whether publicity rank
follows value rank (1: the largest value is the most public) or is shuffled
(0).  Each source then draws its items without replacement, weighted by
publicity, and sources are merged in a configurable arrival order.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field, replace
from typing import Iterable, Sequence

import numpy as np

from .core_stats import IntegratedSample, Observation, build_sample, iter_prefixes
from .errors import InvalidConfig
from .sampling import ordered_draw, publicity_weights


@dataclass(frozen=True)
class Streaker:
    """One oversized source, inserted once ``at_n`` regular observations
    have arrived and contributing all of its items back to back."""

    at_n: int
    size: int


@dataclass(frozen=True)
class SimConfig:
    n_items: int = 100
    value_min: float = 10.0
    value_step: float = 10.0
    value_max: float | None = None
    lam: float = 0.0
    rho: float = 0.0
    num_sources: int = 100
    source_size: int | tuple[int, ...] = 5
    streaker: Streaker | None = None
    interleave: str = "round-robin"
    seed: int = 0

    def __post_init__(self):
        if self.n_items < 1:
            raise InvalidConfig("n_items must be positive")
        if not 0.0 <= self.rho <= 1.0:
            raise InvalidConfig("rho must lie in [0, 1]")
        if self.interleave not in ("round-robin", "sequential"):
            raise InvalidConfig(f"unknown interleave mode {self.interleave!r}")
        if self.value_max is not None:
            expected = self.value_min + (self.n_items - 1) * self.value_step
            if not math.isclose(self.value_max, expected, rel_tol=1e-9, abs_tol=1e-9):
                raise InvalidConfig(
                    f"value_max {self.value_max} inconsistent with min/step (expected {expected})"
                )
        sizes = self.source_sizes
        if len(sizes) != self.num_sources:
            raise InvalidConfig("need one source size per source")
        if any(s < 0 or s > self.n_items for s in sizes):
            raise InvalidConfig("source sizes must lie in [0, n_items]")
        if self.streaker is not None and not 0 <= self.streaker.size <= self.n_items:
            raise InvalidConfig("streaker size must lie in [0, n_items]")

    @property
    def source_sizes(self) -> tuple[int, ...]:
        if isinstance(self.source_size, (int, np.integer)):
            return (int(self.source_size),) * self.num_sources
        return tuple(int(s) for s in self.source_size)

    @property
    def total_size(self) -> int:
        extra = self.streaker.size if self.streaker else 0
        return sum(self.source_sizes) + extra

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class GroundTruth:
    n_items: int
    values: np.ndarray
    publicity: np.ndarray
    lam: float
    rho: float
    entity_ids: tuple[str, ...] = field(default=())

    @property
    def true_sum(self) -> float:
        return float(self.values.sum())

    @property
    def true_mean(self) -> float:
        return float(self.values.mean())

    @property
    def true_cv(self) -> float:
        """Coefficient of variation of the publicity."""
        p_bar = 1.0 / self.n_items
        return float(np.sqrt(np.sum((self.publicity - p_bar) ** 2) / self.n_items) / p_bar)


def _spearman(a: np.ndarray, b: np.ndarray) -> float:
    ra = np.argsort(np.argsort(a)).astype(float)
    rb = np.argsort(np.argsort(b)).astype(float)
    ra -= ra.mean()
    rb -= rb.mean()
    denom = math.sqrt(float((ra * ra).sum() * (rb * rb).sum()))
    return float((ra * rb).sum() / denom) if denom else 0.0


def _publicity_ranks(n: int, rho: float, rng: np.random.Generator) -> np.ndarray:
    """Publicity rank (1 = most public) for items ordered by ascending value."""
    aligned = np.arange(n, 0, -1)
    if rho >= 1.0 or n == 1:
        return aligned
    if rho <= 0.0:
        return rng.permutation(aligned)
    # random adjacent transpositions until the rank correlation drops to rho
    ranks = aligned.copy()
    values = np.arange(n)
    target = rho
    corr = 1.0
    while corr > target:
        k = int(rng.integers(n - 1))
        ranks[k], ranks[k + 1] = ranks[k + 1], ranks[k]
        corr = -_spearman(values, ranks)
    return ranks


def make_ground_truth(config: SimConfig, rng: np.random.Generator | None = None) -> GroundTruth:
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    n = config.n_items
    values = config.value_min + config.value_step * np.arange(n)
    by_rank = publicity_weights(n, config.lam)
    ranks = _publicity_ranks(n, config.rho, rng)
    publicity = by_rank[ranks - 1]
    if not np.all(publicity > 0):
        raise InvalidConfig("publicity underflows to zero; lower lam")
    width = len(str(n - 1))
    ids = tuple(f"d{i:0{width}d}" for i in range(n))
    return GroundTruth(n, values, publicity, config.lam, config.rho, ids)


def _interleave(draws: list[np.ndarray], mode: str) -> list[tuple[int, int]]:
    """(source index, item index) pairs in arrival order."""
    if mode == "sequential":
        return [(j, int(i)) for j, d in enumerate(draws) for i in d]
    longest = max((len(d) for d in draws), default=0)
    return [(j, int(d[t])) for t in range(longest) for j, d in enumerate(draws) if t < len(d)]


def draw_observations(gt: GroundTruth, config: SimConfig, rng: np.random.Generator) -> list[Observation]:
    draws = [ordered_draw(gt.publicity, size, rng) for size in config.source_sizes]
    arrivals = [(f"s{j + 1}", i) for j, i in _interleave(draws, config.interleave)]
    if config.streaker is not None:
        streak = ordered_draw(gt.publicity, config.streaker.size, rng)
        at = min(config.streaker.at_n, len(arrivals))
        arrivals[at:at] = [("streaker", int(i)) for i in streak]
    return [Observation(src, gt.entity_ids[i], float(gt.values[i])) for src, i in arrivals]


def draw_sources(gt: GroundTruth, config: SimConfig, rng: np.random.Generator) -> IntegratedSample:
    """Merge the per-source draws into one arrival-ordered sample."""
    return build_sample(draw_observations(gt, config, rng))


def simulate(config: SimConfig) -> tuple[GroundTruth, IntegratedSample]:
    """Ground truth and sample, fully determined by ``config.seed``."""
    rng = np.random.default_rng(config.seed)
    gt = make_ground_truth(config, rng)
    return gt, draw_sources(gt, config, rng)


def prefix_sizes(total: int, stride: int, start: int | None = None) -> list[int]:
    """Recorded sample sizes ``stride, 2*stride, ...`` ending at ``total``."""
    if stride < 1:
        raise ValueError("stride must be >= 1")
    start = stride if start is None else start
    sizes = list(range(start, total + 1, stride))
    if not sizes or sizes[-1] != total:
        sizes.append(total)
    return sizes


@dataclass
class ExperimentResult:
    """Estimates per replication and recorded sample size.

    ``estimates[kind]`` has shape (replications, len(ns)); entries are NaN
    where a MIN/MAX estimate was withheld.
    """

    config: SimConfig
    aggregate: str
    ns: np.ndarray
    truth: np.ndarray
    estimates: dict[str, np.ndarray]
    coverage: np.ndarray

    def errors(self, kind: str, relative: bool = True) -> np.ndarray:
        err = self.estimates[kind] - self.truth[:, None]
        return err / self.truth[:, None] if relative else err

    def mean_abs_error(self, kind: str, relative: bool = True) -> np.ndarray:
        return np.nanmean(np.abs(self.errors(kind, relative)), axis=0)


def _truth_for(aggregate: str, gt: GroundTruth) -> float:
    return {
        "sum": gt.true_sum,
        "count": float(gt.n_items),
        "avg": gt.true_mean,
        "min": float(gt.values.min()),
        "max": float(gt.values.max()),
    }[aggregate]


def _estimate(aggregate, kind, sample, mc_config):
    from .aggregates import estimate_avg, estimate_count, estimate_extreme
    from .estimators import EstimatorKind, estimate_sum, sum_observed

    if aggregate == "sum":
        return estimate_sum(sample, kind, mc_config=mc_config).phi_hat
    if aggregate == "count":
        count_kind = "chao92" if kind == EstimatorKind.NAIVE.value else kind
        return estimate_count(sample, count_kind, mc_config=mc_config).phi_hat
    if aggregate == "avg":
        if kind == "observed":
            return float(sample.values.mean())
        return estimate_avg(sample).phi_hat
    if kind == "observed":
        return float(sample.values.max() if aggregate == "max" else sample.values.min())
    rep = estimate_extreme(sample, aggregate)
    return rep.value if rep.reported else math.nan


def run_experiment(
    config: SimConfig,
    kinds: Sequence[str] = ("observed", "naive", "frequency", "bucket"),
    replications: int = 50,
    stride: int = 10,
    *,
    aggregate: str = "sum",
    mc_config=None,
    start: int | None = None,
    sizes: Iterable[int] | None = None,
) -> ExperimentResult:
    """Prefix-replay every replication and record each estimator's answer.

    Replication ``r`` uses the ``r``-th child of ``SeedSequence(config.seed)``
    for both its ground truth and its sample.
    """
    from .estimators import EstimatorKind

    kinds = [EstimatorKind.parse(k).value if k not in ("chao92",) else k for k in kinds]
    ns = list(sizes) if sizes is not None else prefix_sizes(config.total_size, stride, start)
    children = np.random.SeedSequence(config.seed).spawn(replications)
    estimates = {k: np.empty((replications, len(ns))) for k in kinds}
    coverage = np.empty((replications, len(ns)))
    truth = np.empty(replications)
    for r, child in enumerate(children):
        rng = np.random.default_rng(child)
        gt = make_ground_truth(config, rng)
        truth[r] = _truth_for(aggregate, gt)
        observations = draw_observations(gt, config, rng)
        for t, sample in enumerate(iter_prefixes(observations, ns)):
            f1 = sum(1 for m in sample.multiplicity.values() if m == 1)
            coverage[r, t] = 1.0 - f1 / sample.n if sample.n else 0.0
            for k in kinds:
                estimates[k][r, t] = _estimate(aggregate, k, sample, mc_config)
    return ExperimentResult(config, aggregate, np.array(ns), truth, estimates, coverage)
