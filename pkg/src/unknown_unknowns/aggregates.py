"""COUNT, AVG and MIN/MAX on top of the SUM machinery."""

from __future__ import annotations

import enum
import math
from dataclasses import asdict, dataclass

import numpy as np

from .bucketing import dynamic_buckets
from .core_stats import IntegratedSample, chao92, frequency_statistics
from .errors import EmptySample
from .estimators import TRUST_THRESHOLD, EstimateReport, EstimatorKind, _report


class Extreme(enum.Enum):
    MIN = "min"
    MAX = "max"


@dataclass(frozen=True)
class ExtremeReport:
    which: Extreme
    observed_extreme: float
    reported: bool
    value: float | None = None

    def to_dict(self) -> dict:
        d = asdict(self)
        d["which"] = self.which.value
        return d

    @classmethod
    def from_dict(cls, data: dict) -> "ExtremeReport":
        return cls(**{**data, "which": Extreme(data["which"])})


def estimate_count(
    sample: IntegratedSample,
    kind: str | EstimatorKind = "chao92",
    *,
    trust_threshold: float = TRUST_THRESHOLD,
    mc_config=None,
) -> EstimateReport:
    """Estimated number of distinct entities; ``delta`` is the missing count."""
    fs = frequency_statistics(sample)
    if fs.n == 0:
        raise EmptySample("cannot estimate from an empty sample")
    key = str(getattr(kind, "value", kind)).lower()
    if key in ("observed",):
        return _report(float(fs.c), 0.0, float(fs.c), fs, trust_threshold)
    if fs.n == fs.f1:
        return _report(float(fs.c), 0.0, None, fs, trust_threshold, divergent=True)
    if key in ("chao92", "naive"):
        n_hat = chao92(fs)
    elif key in ("monte-carlo", "mc", "montecarlo"):
        from .montecarlo import MCConfig, mc_estimate_n

        n_hat = mc_estimate_n(sample, mc_config or MCConfig()).n_hat
    else:
        raise ValueError(f"unknown count estimator {kind!r}")
    return _report(float(fs.c), n_hat - fs.c, n_hat, fs, trust_threshold)


def _bucket_counts(est) -> np.ndarray:
    counts = np.array(est.per_bucket_n_hat, dtype=float)
    observed = np.array([b.c for b in est.buckets], dtype=float)
    return np.where(np.isfinite(counts), counts, observed)


def estimate_avg(sample: IntegratedSample, *, trust_threshold: float = TRUST_THRESHOLD) -> EstimateReport:
    """Bucket means weighted by each bucket's estimated entity count.

    Buckets come from dynamic bucketing with naive leaves; a divergent bucket
    is weighted by its observed count.
    """
    fs = frequency_statistics(sample)
    if fs.n == 0:
        raise EmptySample("cannot estimate from an empty sample")
    observed_mean = float(sample.values.mean())
    est = dynamic_buckets(sample, leaf=EstimatorKind.NAIVE)
    weights = _bucket_counts(est)
    means = np.array([b.mean() for b in est.buckets])
    avg = float((means * weights).sum() / weights.sum())
    return _report(observed_mean, avg - observed_mean, float(weights.sum()), fs,
                   trust_threshold, divergent=est.divergent)


def estimate_extreme(sample: IntegratedSample, which: str | Extreme = Extreme.MAX) -> ExtremeReport:
    """Report the observed extreme only if its end bucket has no missing
    entities (estimated unknown count rounds to zero)."""
    which = Extreme(getattr(which, "value", which))
    if sample.c == 0:
        raise EmptySample("cannot estimate from an empty sample")
    est = dynamic_buckets(sample, leaf=EstimatorKind.NAIVE)
    end = -1 if which is Extreme.MAX else 0
    bucket = est.buckets[end]
    unknown = est.per_bucket_n_hat[end] - bucket.c
    observed = float(sample.values.max() if which is Extreme.MAX else sample.values.min())
    reported = math.isfinite(unknown) and unknown < 0.5
    return ExtremeReport(which, observed, reported, observed if reported else None)

