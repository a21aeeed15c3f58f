import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_sample
from oracles import kl as kl_oracle
from unknown_unknowns import (
    MCConfig,
    SimConfig,
    estimate_sum,
    frequency_statistics,
    chao92,
    kl_divergence,
    mc_estimate_n,
    mc_sum_estimate,
    simulate,
)
from unknown_unknowns.errors import DimensionMismatch, InvalidDistribution, SourceLargerThanPopulation
from unknown_unknowns.montecarlo import (
    _surface_minimum,
    align_frequencies,
    mc_distance,
    simulate_once,
    smooth,
    theta_grid,
)


def test_exhaustive_draws():
    rng = np.random.default_rng(0)
    for lam in (-0.4, 0.0, 0.4):
        assert np.all(simulate_once(5, lam, [5], rng) == 1)
    assert np.all(simulate_once(10, 0.3, [10, 10], rng) == 2)
    with pytest.raises(SourceLargerThanPopulation):
        simulate_once(4, 0.0, [5], rng)


def test_uniform_multiplicity_law_of_large_numbers():
    rng = np.random.default_rng(1)
    means = [simulate_once(100, 0.0, [20] * 100, rng).mean() for _ in range(50)]
    assert np.mean(means) == pytest.approx(20, rel=0.05)


def test_alignment_examples():
    p, q = align_frequencies([3, 3, 1], [4, 2, 1])
    assert p == pytest.approx([3 / 7, 3 / 7, 1 / 7])
    assert q == pytest.approx([4 / 7, 2 / 7, 1 / 7])
    p, q = align_frequencies([4, 2, 1], [1, 2, 4])
    assert kl_divergence(*smooth(p, q)) == 0
    p, q = align_frequencies([2, 1, 1], [1, 1, 1, 1, 1])
    assert len(p) == 5 and p[3] == 0 and p[4] == 0
    ps, qs = smooth(p, q)
    assert math.isfinite(kl_divergence(ps, qs))


def test_smoothing():
    p, q = smooth([1.0, 0.0], [0.5, 0.5], 1e-6)
    assert p == pytest.approx([1 / (1 + 1e-6), 1e-6 / (1 + 1e-6)])
    assert q == pytest.approx([0.5, 0.5])


def test_kl_examples():
    assert kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.5 * math.log(5 / 9) + 0.5 * math.log(5), abs=1e-12)
    assert kl_divergence([0.5, 0.5], [0.9, 0.1]) == pytest.approx(0.5108, abs=1e-4)
    with pytest.raises(DimensionMismatch):
        kl_divergence([1.0], [0.5, 0.5])
    with pytest.raises(InvalidDistribution):
        kl_divergence([1.0, 0.0], [0.5, 0.5])


probs = st.lists(st.floats(0.01, 1.0), min_size=1, max_size=12)


@given(probs, st.data())
def test_kl_nonnegative_and_identity(raw, data):
    other = data.draw(st.lists(st.floats(0.01, 1.0), min_size=len(raw), max_size=len(raw)))
    p = np.array(raw) / sum(raw)
    q = np.array(other) / sum(other)
    p, q = p / p.sum(), q / q.sum()
    d = kl_divergence(p, q)
    assert d >= 0
    assert d == pytest.approx(max(kl_oracle(p, q), 0.0), abs=1e-9)
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


def test_distance_deterministic_and_discriminating():
    wins = 0
    for seed in range(20):
        _, sample = simulate(SimConfig(n_items=60, num_sources=100, source_size=5, seed=seed))
        cfg = MCConfig(nb_runs=10, seed=seed)
        near = mc_distance(60, 0.0, sample, cfg, np.random.default_rng(seed))
        far = mc_distance(120, 0.0, sample, cfg, np.random.default_rng(seed))
        wins += near < far
    assert wins >= 18
    cfg = MCConfig(nb_runs=1, seed=3)
    assert mc_distance(70, 0.1, sample, cfg) == mc_distance(70, 0.1, sample, cfg)


def test_distance_near_zero_when_exhausted():
    rows = [(f"s{j}", f"e{i}", 1.0) for j in range(3) for i in range(8)]
    assert mc_distance(8, 0.0, make_sample(rows)) == pytest.approx(0.0, abs=1e-9)


def test_degenerate_grid_returns_observed():
    rows = [(s, e, v) for s in ("s1", "s2") for e, v in (("a", 1.0), ("b", 5.0))]
    sample = make_sample(rows)
    fs = frequency_statistics(sample)
    assert chao92(fs) == fs.c
    assert mc_estimate_n(sample).n_hat == fs.c
    report = mc_sum_estimate(sample)
    assert report.delta == 0 and report.phi_hat == 6.0


def test_sub_unit_grid_stays_at_observed(toy_after):
    # Chao92 is 4.5 here, so no integer candidate lies above c = 4
    assert mc_estimate_n(toy_after).n_hat == 4
    assert mc_sum_estimate(toy_after).phi_hat == 13300


def test_theta_grid():
    assert list(theta_grid(50, 100, 10)) == list(range(50, 101, 5))
    assert list(theta_grid(50, 54.5, 10)) == [50, 51, 52, 53, 54]


def test_surface_fit_recovers_interior_minimum():
    x, y = np.meshgrid(np.linspace(0, 1, 6), np.linspace(0, 1, 5))
    z = (x - 0.3) ** 2 + 2 * (y - 0.7) ** 2 + 0.1 * (x - 0.3) * (y - 0.7) + 1.0
    fx, fy, val = _surface_minimum(x.ravel(), y.ravel(), z.ravel())
    assert (fx, fy) == pytest.approx((0.3, 0.7), abs=1e-9)
    assert val == pytest.approx(1.0)
    assert _surface_minimum(x.ravel(), y.ravel(), -z.ravel()) is None


def test_self_recovery_uniform():
    hits = 0
    for seed in range(20):
        _, sample = simulate(SimConfig(n_items=100, lam=0.0, num_sources=100, source_size=5, seed=seed))
        hits += 90 <= mc_estimate_n(sample, MCConfig(seed=seed)).n_hat <= 110
    assert hits >= 16


def test_streaker_sample():
    cfg = SimConfig(n_items=100, lam=1.0, rho=1.0, num_sources=2, source_size=100,
                    interleave="sequential", seed=4)
    _, full = simulate(cfg)
    sample = full.prefix(130)
    n_chao = chao92(frequency_statistics(sample))
    assert n_chao > 125
    assert abs(mc_estimate_n(sample).n_hat - 100) <= 10


@settings(max_examples=15, deadline=None)
@given(st.integers(0, 10_000))
def test_adjustment_within_naive(seed):
    _, sample = simulate(SimConfig(n_items=40, lam=2.0, rho=1.0, num_sources=6, source_size=6, seed=seed))
    naive = estimate_sum(sample, "naive")
    if naive.divergent:
        return
    mc = mc_sum_estimate(sample, MCConfig(nb_runs=3, seed=seed))
    assert -1e-9 <= mc.delta <= naive.delta + 1e-9


def test_config_validation():
    with pytest.raises(ValueError):
        MCConfig(nb_runs=0)
    with pytest.raises(ValueError):
        MCConfig(compare="sideways")


def test_per_source_comparison_runs():
    _, sample = simulate(SimConfig(n_items=50, num_sources=5, source_size=10, seed=2))
    res = mc_estimate_n(sample, MCConfig(compare="per-source", nb_runs=3))
    fs = frequency_statistics(sample)
    assert fs.c <= res.n_hat <= chao92(fs)
