"""Estimate the impact of unobserved entities on aggregate queries over
integrated multi-source samples."""

from .aggregates import Extreme, ExtremeReport, estimate_avg, estimate_count, estimate_extreme
from .bounds import BoundConfig, count_upper_bound, delta_upper_bound, mean_upper_bound, missing_mass_bound
from .bucketing import Bucket, BucketEstimate, bucket_delta, dynamic_buckets, split_equiheight, split_equiwidth
from .core_stats import (
    CoverageStats,
    FrequencyStatistics,
    IntegratedSample,
    Observation,
    build_sample,
    chao92,
    coverage_stats,
    cv_squared,
    frequency_statistics,
    iter_prefixes,
    sample_coverage,
)
from .errors import *  # noqa: F401,F403
from .estimators import (
    EstimateReport,
    EstimatorKind,
    estimate_sum,
    freq_delta,
    freq_delta_simple,
    naive_delta,
    sum_observed,
)
from .montecarlo import MCConfig, MCResult, kl_divergence, mc_estimate_n, mc_sum_estimate
from .simulator import GroundTruth, SimConfig, Streaker, run_experiment, simulate

__version__ = "0.1.0"
