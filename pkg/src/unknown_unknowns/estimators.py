"""SUM estimators for the impact of unobserved entities.

Each estimator returns an adjustment ``delta`` that is added to the observed
sum over unique entities.  The naive estimator substitutes the observed mean
for every missing entity; the frequency estimator substitutes the mean of the
singletons instead.
"""

from __future__ import annotations

import enum
from dataclasses import asdict, dataclass
from typing import TYPE_CHECKING

from .core_stats import (
    FrequencyStatistics,
    IntegratedSample,
    chao92,
    cv_squared,
    frequency_statistics,
    sample_coverage,
)
from .errors import DivergentEstimate, EmptySample

if TYPE_CHECKING:
    from .montecarlo import MCConfig

TRUST_THRESHOLD = 0.4


class EstimatorKind(enum.Enum):
    NAIVE = "naive"
    FREQUENCY = "frequency"
    FREQUENCY_SIMPLE = "frequency-simple"
    BUCKET = "bucket"
    BUCKET_FREQUENCY = "bucket-frequency"
    MONTE_CARLO = "monte-carlo"
    OBSERVED = "observed"

    @property
    def leaf(self) -> "EstimatorKind | None":
        """Per-bucket estimator for the bucket kinds, None otherwise."""
        return {
            EstimatorKind.BUCKET: EstimatorKind.NAIVE,
            EstimatorKind.BUCKET_FREQUENCY: EstimatorKind.FREQUENCY,
        }.get(self)

    @classmethod
    def parse(cls, text: "str | EstimatorKind") -> "EstimatorKind":
        if isinstance(text, cls):
            return text
        key = str(text).strip().lower().replace("_", "-")
        aliases = {"freq": "frequency", "mc": "monte-carlo", "montecarlo": "monte-carlo",
                   "bucket-naive": "bucket", "freq-simple": "frequency-simple"}
        return cls(aliases.get(key, key))


@dataclass(frozen=True)
class EstimateReport:
    phi_obs: float
    delta: float
    phi_hat: float
    n_hat: float | None
    coverage: float
    gamma_sq: float
    trust: bool
    upper_bound: float | None = None
    divergent: bool = False

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, data: dict) -> "EstimateReport":
        return cls(**data)


def _singleton_sum(sample: IntegratedSample) -> float:
    return float(sum(sample.value_of[e] for e, m in sample.multiplicity.items() if m == 1))


def sum_observed(sample: IntegratedSample) -> float:
    """Sum of values over unique entities (each entity counted once)."""
    return float(sum(sample.value_of.values()))


def _require_estimable(fs: FrequencyStatistics) -> None:
    if fs.n == 0:
        raise EmptySample("no observations")
    if fs.n == fs.f1:
        raise DivergentEstimate("all observations are singletons")


def naive_delta(sample: IntegratedSample) -> float:
    """Mean substitution times the Chao92 count of missing entities."""
    fs = frequency_statistics(sample)
    _require_estimable(fs)
    if fs.f1 == 0:
        return 0.0
    phi = sum_observed(sample)
    gamma_sq = cv_squared(fs)
    return phi * fs.f1 * (fs.c + gamma_sq * fs.n) / (fs.c * (fs.n - fs.f1))


def freq_delta(sample: IntegratedSample) -> float:
    """Like :func:`naive_delta` but missing entities take the singletons'
    mean value."""
    fs = frequency_statistics(sample)
    _require_estimable(fs)
    if fs.f1 == 0:
        return 0.0
    gamma_sq = cv_squared(fs)
    return _singleton_sum(sample) * (fs.c + gamma_sq * fs.n) / (fs.n - fs.f1)


def freq_delta_simple(sample: IntegratedSample) -> float:
    """Frequency estimator with the skew correction dropped."""
    fs = frequency_statistics(sample)
    _require_estimable(fs)
    if fs.f1 == 0:
        return 0.0
    return _singleton_sum(sample) * fs.c / (fs.n - fs.f1)


def _report(phi_obs, delta, n_hat, fs, threshold, divergent=False) -> EstimateReport:
    coverage = sample_coverage(fs) if fs.n else 0.0
    try:
        gamma_sq = cv_squared(fs)
    except (DivergentEstimate, EmptySample, ValueError):
        gamma_sq = 0.0
    return EstimateReport(
        phi_obs=phi_obs,
        delta=delta,
        phi_hat=phi_obs + delta,
        n_hat=n_hat,
        coverage=coverage,
        gamma_sq=gamma_sq,
        trust=(not divergent) and coverage >= threshold,
        divergent=divergent,
    )


def estimate_sum(
    sample: IntegratedSample,
    kind: EstimatorKind | str = EstimatorKind.NAIVE,
    *,
    trust_threshold: float = TRUST_THRESHOLD,
    mc_config: "MCConfig | None" = None,
) -> EstimateReport:
    """Adjusted SUM ``phi_obs + delta`` with the requested estimator.

    All-singleton samples do not raise: the report comes back with
    ``divergent=True``, ``delta=0`` and ``trust=False``.
    """
    kind = EstimatorKind.parse(kind)
    fs = frequency_statistics(sample)
    phi_obs = sum_observed(sample)
    if kind is EstimatorKind.OBSERVED:
        return _report(phi_obs, 0.0, float(fs.c), fs, trust_threshold)
    if fs.n == 0:
        raise EmptySample("cannot estimate from an empty sample")
    if fs.n == fs.f1:
        return _report(phi_obs, 0.0, None, fs, trust_threshold, divergent=True)

    if kind is EstimatorKind.MONTE_CARLO:
        from .montecarlo import MCConfig, mc_estimate_n

        result = mc_estimate_n(sample, mc_config or MCConfig())
        delta = phi_obs / fs.c * (result.n_hat - fs.c)
        return _report(phi_obs, delta, result.n_hat, fs, trust_threshold)

    if kind.leaf is not None:
        from .bucketing import dynamic_buckets

        est = dynamic_buckets(sample, leaf=kind.leaf)
        if est.divergent:
            return _report(phi_obs, 0.0, None, fs, trust_threshold, divergent=True)
        return _report(phi_obs, est.total_delta, est.n_hat, fs, trust_threshold)

    delta_fn = {
        EstimatorKind.NAIVE: naive_delta,
        EstimatorKind.FREQUENCY: freq_delta,
        EstimatorKind.FREQUENCY_SIMPLE: freq_delta_simple,
    }[kind]
    n_hat = chao92(fs)
    if kind is EstimatorKind.FREQUENCY_SIMPLE:
        n_hat = fs.c / sample_coverage(fs)
    return _report(phi_obs, delta_fn(sample), n_hat, fs, trust_threshold)
