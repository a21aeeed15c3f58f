"""Worst-case upper bound on the adjusted SUM.

The bound multiplies a worst-case entity count (coverage replaced by a
high-probability Good-Turing missing-mass bound) by a worst-case mean
(observed mean plus ``z`` standard deviations).  The product bounds the
whole population sum, so :func:`delta_upper_bound` returns a bound on the
adjusted total; subtract the observed sum for a bound on the adjustment.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .core_stats import FrequencyStatistics, IntegratedSample, frequency_statistics
from .errors import EmptySample, InsufficientUnique

# 2*sqrt(2) + sqrt(3)
GT_SLACK_COEF = 2.0 * math.sqrt(2.0) + math.sqrt(3.0)


@dataclass(frozen=True)
class BoundConfig:
    epsilon: float = 0.01
    z: float = 3.0

    def __post_init__(self):
        if not 0.0 < self.epsilon < 1.0:
            raise ValueError("epsilon must lie in (0, 1)")
        if self.z <= 0:
            raise ValueError("z must be positive")


def missing_mass_bound(fs: FrequencyStatistics, epsilon: float = 0.01) -> float:
    """High-probability (1 - epsilon) upper bound on the unobserved mass.

    Not clamped: values >= 1 mean the bound is vacuous at this sample size.
    """
    if fs.n < 1:
        raise EmptySample("need at least one observation")
    return fs.f1 / fs.n + GT_SLACK_COEF * math.sqrt(math.log(3.0 / epsilon) / fs.n)


def count_upper_bound(fs: FrequencyStatistics, epsilon: float = 0.01) -> float | None:
    """``c / (1 - missing-mass bound)``, or None when the bound is vacuous."""
    mass = missing_mass_bound(fs, epsilon)
    if mass >= 1.0:
        return None
    return fs.c / (1.0 - mass)


def mean_upper_bound(sample: IntegratedSample, z: float = 3.0) -> float:
    """Mean of the unique values plus ``z`` population standard deviations."""
    if sample.c < 2:
        raise InsufficientUnique("need at least two unique entities")
    values = sample.values
    return float(values.mean() + z * values.std())


def delta_upper_bound(sample: IntegratedSample, config: BoundConfig = BoundConfig()) -> float | None:
    """Worst-case population SUM, or None when no finite bound exists."""
    fs = frequency_statistics(sample)
    count = count_upper_bound(fs, config.epsilon)
    if count is None:
        return None
    return mean_upper_bound(sample, config.z) * count


def bound_series(samples, config: BoundConfig = BoundConfig()) -> np.ndarray:
    """Bounds over a sequence of samples, +inf where no finite bound exists."""
    out = []
    for s in samples:
        b = delta_upper_bound(s, config)
        out.append(math.inf if b is None else b)
    return np.array(out)
