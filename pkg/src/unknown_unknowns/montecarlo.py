"""Monte-Carlo population-size estimator.

Chao92 assumes the merged sample was drawn with replacement.  When sources
are few or uneven (streakers) that assumption breaks, so instead we
simulate the actual process: for a candidate population size and publicity
skew, every source draws its observed number of items without replacement,
and the merged occurrence histogram is compared with the observed one by
KL-divergence.  A grid over (size, skew) is scored, a quadratic surface is
fitted, and its minimizer is the estimate.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .core_stats import IntegratedSample, chao92, frequency_statistics
from .errors import (
    DimensionMismatch,
    DivergentEstimate,
    EmptySample,
    InvalidDistribution,
    SourceLargerThanPopulation,
)
from .estimators import TRUST_THRESHOLD, EstimateReport, _report, sum_observed
from .sampling import MC_RANK_SCALE, draw_batches, log_ratio, merged_counts, publicity_weights

DEFAULT_LAMBDA_GRID = tuple(round(x, 10) for x in np.linspace(-0.4, 0.4, 9))


@dataclass(frozen=True)
class MCConfig:
    nb_runs: int = 10
    n_grid_steps: int = 10
    lambda_grid: tuple[float, ...] = DEFAULT_LAMBDA_GRID
    seed: int = 0
    smoothing_mass: float = 1e-6
    compare: str = "merged"

    def __post_init__(self):
        if self.nb_runs < 1:
            raise ValueError("nb_runs must be >= 1")
        if self.n_grid_steps < 1:
            raise ValueError("n_grid_steps must be >= 1")
        if not self.lambda_grid:
            raise ValueError("lambda grid must be non-empty")
        if not 0.0 < self.smoothing_mass <= 0.01:
            raise ValueError("smoothing_mass must lie in (0, 0.01]")
        if self.compare not in ("merged", "per-source"):
            raise ValueError("compare must be 'merged' or 'per-source'")


@dataclass(frozen=True)
class MCResult:
    n_hat: float
    lambda_hat: float
    surface: dict[tuple[int, float], float] = field(default_factory=dict)
    fitted_minimum: tuple[float, float, float] | None = None


# -- single simulation ------------------------------------------------------

def simulate_once(
    theta_n: int,
    theta_lambda: float,
    source_sizes,
    rng: np.random.Generator,
) -> np.ndarray:
    """Merged occurrence histogram of one simulated integration.

    Returns counts per simulated item (length ``theta_n``; zeros for items no
    source drew).
    """
    sizes = np.asarray(list(source_sizes), dtype=np.int64)
    if sizes.size and sizes.max() > theta_n:
        raise SourceLargerThanPopulation(
            f"a source of size {sizes.max()} cannot draw from {theta_n} items"
        )
    weights = publicity_weights(theta_n, theta_lambda, MC_RANK_SCALE)
    batches = draw_batches(weights, sizes, 1, rng,
                           log_ratio=log_ratio(theta_n, theta_lambda, MC_RANK_SCALE))
    return merged_counts(batches, theta_n, 1)[0]


# -- distribution comparison -----------------------------------------------

def _descending(counts) -> np.ndarray:
    counts = np.asarray(counts, dtype=float)
    counts = counts[counts > 0]
    return -np.sort(-counts)


def align_frequencies(observed, simulated) -> tuple[np.ndarray, np.ndarray]:
    """Rank-align two occurrence histograms as probability vectors.

    Both sides are sorted by descending multiplicity, zero-padded to the
    longer length and normalized to sum 1.  ``observed`` may be an
    :class:`IntegratedSample` or a sequence of multiplicities.
    """
    if isinstance(observed, IntegratedSample):
        observed = observed.counts
    p, q = _descending(observed), _descending(simulated)
    if not len(p) or not len(q):
        raise EmptySample("both histograms must be non-empty")
    length = max(len(p), len(q))
    p = np.pad(p, (0, length - len(p)))
    q = np.pad(q, (0, length - len(q)))
    return p / p.sum(), q / q.sum()


def smooth(p, q, mass: float = 1e-6) -> tuple[np.ndarray, np.ndarray]:
    """Replace zero entries by ``mass`` and renormalize each vector."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch("vectors must have equal length")
    p = np.where(p == 0, mass, p)
    q = np.where(q == 0, mass, q)
    return p / p.sum(), q / q.sum()


def kl_divergence(p, q) -> float:
    """Discrete KL-divergence ``sum p_i ln(p_i / q_i)``."""
    p, q = np.asarray(p, dtype=float), np.asarray(q, dtype=float)
    if p.shape != q.shape:
        raise DimensionMismatch("vectors must have equal length")
    for vec in (p, q):
        if np.any(vec <= 0) or abs(vec.sum() - 1.0) > 1e-9:
            raise InvalidDistribution("entries must be positive and sum to 1")
    return max(float(np.sum(p * np.log(p / q))), 0.0)


def _kl_rows(obs_desc: np.ndarray, sim_counts: np.ndarray, mass: float) -> np.ndarray:
    """Vectorized align + smooth + KL of one observed histogram against each
    row of ``sim_counts`` (shape (runs, items))."""
    sim = -np.sort(-sim_counts, axis=1).astype(float)
    c_sim = (sim > 0).sum(axis=1)
    lengths = np.maximum(len(obs_desc), c_sim)
    width = int(lengths.max())
    valid = np.arange(width)[None, :] < lengths[:, None]
    p = np.zeros(width)
    p[: len(obs_desc)] = obs_desc
    p = np.broadcast_to(p / p.sum(), sim[:, :width].shape)
    q = sim[:, :width] / sim.sum(axis=1, keepdims=True)
    p = np.where(valid, np.where(p == 0, mass, p), 0.0)
    q = np.where(valid, np.where(q == 0, mass, q), 0.0)
    p /= p.sum(axis=1, keepdims=True)
    q /= q.sum(axis=1, keepdims=True)
    with np.errstate(divide="ignore", invalid="ignore"):
        terms = np.where(valid, p * np.log(p / q), 0.0)
    return np.maximum(terms.sum(axis=1), 0.0)


def _source_sequence(sample: IntegratedSample) -> list:
    """Source ids in order of first arrival."""
    return list(dict.fromkeys(o.source_id for o in sample.observations))


def _cumulative_observed(sample: IntegratedSample, sources: list) -> list[np.ndarray]:
    """Descending multiplicities of the merge of the first j sources, per j."""
    by_source: dict = {s: [] for s in sources}
    for o in sample.observations:
        by_source[o.source_id].append(o.entity_id)
    counts: dict = {}
    out = []
    for s in sources:
        for e in by_source[s]:
            counts[e] = counts.get(e, 0) + 1
        out.append(_descending(list(counts.values())))
    return out


def _grid_point_rng(seed: int, i: int, j: int) -> np.random.Generator:
    return np.random.default_rng(np.random.SeedSequence([seed, i, j]))


def _distance(theta_n, theta_lambda, obs, sizes, config, rng) -> float:
    weights = publicity_weights(theta_n, theta_lambda, MC_RANK_SCALE)
    batches = draw_batches(weights, sizes, config.nb_runs, rng,
                           log_ratio=log_ratio(theta_n, theta_lambda, MC_RANK_SCALE))
    if config.compare == "merged":
        sim = merged_counts(batches, theta_n, config.nb_runs)
        return float(_kl_rows(obs, sim, config.smoothing_mass).mean())
    total = np.zeros(config.nb_runs)
    sim = np.zeros((config.nb_runs, theta_n), dtype=np.int64)
    for j, draws in enumerate(batches):
        sim += merged_counts([draws], theta_n, config.nb_runs)
        total += _kl_rows(obs[j], sim, config.smoothing_mass)
    return float(total.mean() / len(batches))


def _observed_side(sample: IntegratedSample, config: MCConfig):
    sources = _source_sequence(sample)
    sizes = np.array([sample.source_sizes[s] for s in sources], dtype=np.int64)
    if config.compare == "merged":
        return _descending(sample.counts), sizes
    return _cumulative_observed(sample, sources), sizes


def mc_distance(
    theta_n: int,
    theta_lambda: float,
    sample: IntegratedSample,
    config: MCConfig = MCConfig(),
    rng: np.random.Generator | None = None,
) -> float:
    """Mean KL-divergence between the observed histogram and ``nb_runs``
    simulations under (theta_n, theta_lambda)."""
    obs, sizes = _observed_side(sample, config)
    if sizes.size and sizes.max() > theta_n:
        raise SourceLargerThanPopulation(
            f"a source of size {sizes.max()} cannot draw from {theta_n} items"
        )
    rng = rng if rng is not None else np.random.default_rng(config.seed)
    return _distance(int(theta_n), float(theta_lambda), obs, sizes, config, rng)


# -- surface fit -------------------------------------------------------------

def _surface_minimum(x, y, z) -> tuple[float, float, float] | None:
    """Least-squares quadratic in (x, y) on the unit box; returns its
    minimizer over the box, or None when the fit is not convex."""
    columns = {"1": np.ones_like(x)}
    ux, uy = len(np.unique(x)), len(np.unique(y))
    if ux >= 2:
        columns["x"] = x
    if uy >= 2:
        columns["y"] = y
    if ux >= 3:
        columns["xx"] = x * x
    if uy >= 3:
        columns["yy"] = y * y
    if ux >= 2 and uy >= 2:
        columns["xy"] = x * y
    design = np.column_stack(list(columns.values()))
    coef, *_ = np.linalg.lstsq(design, z, rcond=None)
    k = dict(zip(columns, coef))
    a, b, d = k.get("xx", 0.0), k.get("xy", 0.0), k.get("yy", 0.0)
    ex, ey, e0 = k.get("x", 0.0), k.get("y", 0.0), k.get("1", 0.0)
    hessian = np.array([[2 * a, b], [b, 2 * d]])
    if np.linalg.eigvalsh(hessian).min() < -1e-12:
        return None

    def value(px, py):
        return a * px * px + b * px * py + d * py * py + ex * px + ey * py + e0

    def line_min(curv, slope):
        # minimizer of curv*t^2 + slope*t on [0, 1]
        if curv > 0:
            return [min(max(-slope / (2 * curv), 0.0), 1.0)]
        return [0.0, 1.0]

    candidates = [(px, py) for px in (0.0, 1.0) for py in (0.0, 1.0)]
    for px in (0.0, 1.0):
        candidates += [(px, t) for t in line_min(d, b * px + ey)]
    for py in (0.0, 1.0):
        candidates += [(t, py) for t in line_min(a, b * py + ex)]
    det = 4 * a * d - b * b
    if det > 0:
        sx, sy = np.linalg.solve(hessian, [-ex, -ey])
        if 0 <= sx <= 1 and 0 <= sy <= 1:
            candidates.append((float(sx), float(sy)))
    best = min(candidates, key=lambda p: value(*p))
    return best[0], best[1], float(value(*best))


def theta_grid(c: int, n_chao: float, steps: int) -> np.ndarray:
    """Integer population sizes from ``c`` towards ``n_chao``."""
    span = n_chao - c
    step = max(span / steps, 1.0)
    count = int(math.floor(span / step + 1e-9))
    return np.unique(np.round(c + step * np.arange(count + 1)).astype(np.int64))


def mc_estimate_n(sample: IntegratedSample, config: MCConfig = MCConfig()) -> MCResult:
    """Grid search plus quadratic surface fit; the estimate is confined to
    ``[c, Chao92]`` and the skew to the lambda grid's range."""
    fs = frequency_statistics(sample)
    if fs.n == 0:
        raise EmptySample("cannot estimate from an empty sample")
    if fs.n == fs.f1:
        raise DivergentEstimate("all observations are singletons")
    c = fs.c
    n_chao = chao92(fs)
    thetas = theta_grid(c, n_chao, config.n_grid_steps)
    lambdas = np.array(sorted(config.lambda_grid), dtype=float)
    if n_chao - c < 0.5 or len(thetas) < 2:
        return MCResult(n_hat=float(c) if n_chao - c < 0.5 else min(float(thetas[0]), n_chao),
                        lambda_hat=0.0)

    obs, sizes = _observed_side(sample, config)
    surface = {}
    for i, theta in enumerate(thetas):
        for j, lam in enumerate(lambdas):
            rng = _grid_point_rng(config.seed, i, j)
            surface[(int(theta), float(lam))] = _distance(int(theta), float(lam), obs, sizes,
                                                         config, rng)

    keys = list(surface)
    th = np.array([k[0] for k in keys], dtype=float)
    la = np.array([k[1] for k in keys], dtype=float)
    gam = np.array([surface[k] for k in keys])
    lo_l, hi_l = lambdas.min(), lambdas.max()
    x = (th - c) / (thetas.max() - c)
    y = (la - lo_l) / (hi_l - lo_l) if hi_l > lo_l else np.zeros_like(la)
    fit = _surface_minimum(x, y, gam)
    if fit is None:
        best = int(np.argmin(gam))
        theta_hat, lam_hat, val = th[best], la[best], float(gam[best])
    else:
        fx, fy, val = fit
        theta_hat = c + fx * (thetas.max() - c)
        lam_hat = lo_l + fy * (hi_l - lo_l)
    n_hat = float(min(max(theta_hat, c), n_chao))
    return MCResult(n_hat=n_hat, lambda_hat=float(lam_hat), surface=surface,
                    fitted_minimum=(float(theta_hat), float(lam_hat), val))


def mc_sum_estimate(
    sample: IntegratedSample,
    config: MCConfig = MCConfig(),
    *,
    trust_threshold: float = TRUST_THRESHOLD,
) -> EstimateReport:
    """Naive mean substitution with the Monte-Carlo count."""
    fs = frequency_statistics(sample)
    phi = sum_observed(sample)
    if fs.n and fs.n == fs.f1:
        return _report(phi, 0.0, None, fs, trust_threshold, divergent=True)
    result = mc_estimate_n(sample, config)
    delta = phi / fs.c * (result.n_hat - fs.c)
    return _report(phi, delta, result.n_hat, fs, trust_threshold)
