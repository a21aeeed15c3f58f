"""Integrated-sample data model and coverage statistics.

An integrated sample is the concatenation of several sources, each of which
lists an entity at most once.  Duplicates across sources carry the signal:
the f-statistics (how many entities were seen exactly ``j`` times) drive the
Good-Turing coverage estimate and the Chao92 population-size estimator.
"""

from __future__ import annotations

import math
from collections import Counter
from dataclasses import dataclass, field
from functools import cached_property
from typing import Hashable, Iterable, Iterator, Sequence

import numpy as np

from .errors import (
    ConflictingValue,
    DuplicateInSource,
    EmptySample,
    InsufficientSample,
    NonFiniteValue,
    ZeroCoverage,
)


@dataclass(frozen=True)
class Observation:
    source_id: Hashable
    entity_id: Hashable
    value: float


@dataclass(frozen=True)
class IntegratedSample:
    """Arrival-ordered observations plus the unique-entity view.

    Use :func:`build_sample` rather than the constructor; it validates the
    per-source uniqueness and value-consistency invariants.
    """

    observations: tuple[Observation, ...]
    multiplicity: dict[Hashable, int]
    value_of: dict[Hashable, float]
    source_sizes: dict[Hashable, int]

    @property
    def n(self) -> int:
        return len(self.observations)

    @property
    def c(self) -> int:
        return len(self.multiplicity)

    @cached_property
    def entity_ids(self) -> tuple:
        return tuple(self.multiplicity)

    @cached_property
    def counts(self) -> np.ndarray:
        """Multiplicity per unique entity, in first-seen order."""
        return np.fromiter(self.multiplicity.values(), dtype=np.int64, count=self.c)

    @cached_property
    def values(self) -> np.ndarray:
        """Attribute value per unique entity, aligned with :attr:`counts`."""
        return np.fromiter(
            (self.value_of[e] for e in self.multiplicity), dtype=float, count=self.c
        )

    def prefix(self, k: int) -> "IntegratedSample":
        """The sample formed by the first ``k`` arrivals."""
        return build_sample(self.observations[:k])

    def __len__(self) -> int:
        return self.n


class _SampleBuilder:
    """Incremental accumulator used by both build_sample and prefix replay."""

    def __init__(self) -> None:
        self.observations: list[Observation] = []
        self.multiplicity: dict = {}
        self.value_of: dict = {}
        self.source_sizes: dict = {}
        self._seen: set = set()

    def add(self, obs: Observation) -> None:
        value = float(obs.value)
        if not math.isfinite(value):
            raise NonFiniteValue(f"non-finite value {obs.value!r} for entity {obs.entity_id!r}")
        key = (obs.source_id, obs.entity_id)
        if key in self._seen:
            raise DuplicateInSource(
                f"entity {obs.entity_id!r} listed twice by source {obs.source_id!r}"
            )
        known = self.value_of.get(obs.entity_id)
        if known is not None and known != value:
            raise ConflictingValue(
                f"entity {obs.entity_id!r} has values {known!r} and {value!r}"
            )
        self._seen.add(key)
        if type(obs.value) is not float:
            obs = Observation(obs.source_id, obs.entity_id, value)
        self.observations.append(obs)
        self.multiplicity[obs.entity_id] = self.multiplicity.get(obs.entity_id, 0) + 1
        self.value_of[obs.entity_id] = value
        self.source_sizes[obs.source_id] = self.source_sizes.get(obs.source_id, 0) + 1

    def snapshot(self) -> IntegratedSample:
        return IntegratedSample(
            observations=tuple(self.observations),
            multiplicity=dict(self.multiplicity),
            value_of=dict(self.value_of),
            source_sizes=dict(self.source_sizes),
        )


def build_sample(observations: Iterable[Observation]) -> IntegratedSample:
    """Integrate observations, preserving arrival order.

    Raises:
        DuplicateInSource: a source mentions the same entity twice.
        ConflictingValue: one entity appears with two different values.
        NonFiniteValue: a value is NaN or infinite.
    """
    builder = _SampleBuilder()
    for obs in observations:
        builder.add(obs)
    return builder.snapshot()


def iter_prefixes(
    observations: Sequence[Observation], sizes: Iterable[int]
) -> Iterator[IntegratedSample]:
    """Yield the samples formed by the first ``k`` arrivals for each ``k`` in
    ``sizes`` (ascending), building incrementally instead of from scratch."""
    builder = _SampleBuilder()
    consumed = 0
    for k in sizes:
        if k < consumed:
            raise ValueError("prefix sizes must be non-decreasing")
        for obs in observations[consumed:k]:
            builder.add(obs)
        consumed = k
        yield builder.snapshot()


@dataclass(frozen=True)
class FrequencyStatistics:
    n: int
    c: int
    f: dict[int, int] = field(default_factory=dict)

    @property
    def f1(self) -> int:
        return self.f.get(1, 0)

    @property
    def f2(self) -> int:
        return self.f.get(2, 0)

    @property
    def pair_sum(self) -> int:
        """Sum over j of j(j-1) f_j."""
        return sum(j * (j - 1) * fj for j, fj in self.f.items())

    @classmethod
    def from_counts(cls, counts: Iterable[int]) -> "FrequencyStatistics":
        counts = [int(m) for m in counts if m > 0]
        f = Counter(counts)
        return cls(n=sum(counts), c=len(counts), f=dict(sorted(f.items())))


@dataclass(frozen=True)
class CoverageStats:
    c_hat: float
    gamma_sq: float
    n_chao92: float


def frequency_statistics(sample: IntegratedSample) -> FrequencyStatistics:
    return FrequencyStatistics.from_counts(sample.multiplicity.values())


def sample_coverage(fs: FrequencyStatistics) -> float:
    """Good-Turing coverage estimate ``1 - f1/n``."""
    if fs.n == 0:
        raise EmptySample("coverage is undefined for an empty sample")
    return 1.0 - fs.f1 / fs.n


def cv_squared(fs: FrequencyStatistics) -> float:
    """Squared coefficient of variation of the publicity, estimated from
    the f-statistics and clamped at zero."""
    if fs.n < 2:
        raise InsufficientSample("need at least two observations")
    coverage = sample_coverage(fs)
    if coverage <= 0.0:
        raise ZeroCoverage("all observations are singletons")
    estimate = (fs.c / coverage) * fs.pair_sum / (fs.n * (fs.n - 1)) - 1.0
    return max(estimate, 0.0)


def chao92(fs: FrequencyStatistics) -> float:
    """Chao92 estimate of the number of distinct entities in the population.

    Raises:
        ZeroCoverage: every observation is a singleton (the estimate diverges).
    """
    if fs.n == 0:
        raise EmptySample("Chao92 is undefined for an empty sample")
    coverage = sample_coverage(fs)
    if coverage <= 0.0:
        raise ZeroCoverage("all observations are singletons")
    if fs.f1 == 0:
        return float(fs.c)
    gamma_sq = cv_squared(fs)
    return fs.c / coverage + fs.n * (1.0 - coverage) / coverage * gamma_sq


def coverage_stats(fs: FrequencyStatistics) -> CoverageStats:
    return CoverageStats(
        c_hat=sample_coverage(fs),
        gamma_sq=cv_squared(fs) if fs.n >= 2 else 0.0,
        n_chao92=chao92(fs),
    )
