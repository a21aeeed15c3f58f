"""End-to-end acceptance checks, one test per criterion.

Each test records a pass/fail line that is printed in the pytest terminal
summary, then asserts.  Thresholds and replication counts are the stated
ones; see README for how to run this file alone.
"""

import math
import time
from fractions import Fraction

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from conftest import make_sample, record
from oracles import TOY_AFTER, TOY_BEFORE, exact_chao92, exact_freq_total, exact_naive_total, kl
from unknown_unknowns import (
    FrequencyStatistics,
    MCConfig,
    SimConfig,
    chao92,
    cv_squared,
    estimate_sum,
    frequency_statistics,
    kl_divergence,
    mc_estimate_n,
    sample_coverage,
    simulate,
)
from unknown_unknowns.bounds import delta_upper_bound
from unknown_unknowns.aggregates import estimate_extreme
from unknown_unknowns.bucketing import coverage_count
from unknown_unknowns.core_stats import iter_prefixes
from unknown_unknowns.io_cli import ingest_csv, write_sample_csv
from unknown_unknowns.simulator import draw_observations, make_ground_truth, prefix_sizes, run_experiment

SUM_KINDS = ("naive", "frequency", "frequency-simple", "bucket", "bucket-frequency")


def _exact(rows):
    s = make_sample(rows)
    return s, s.multiplicity, s.value_of


# 1 -------------------------------------------------------------------------

def test_criterion_01_toy_golden():
    t0 = time.perf_counter()
    before, mb, vb = _exact(TOY_BEFORE)
    after, ma, va = _exact(TOY_AFTER)
    checks = []

    def rel(got, want):
        checks.append(abs(got - float(want)) <= 1e-6 * abs(float(want)))

    def rounded(got, want):
        checks.append(abs(got - want) <= 1)

    rel(estimate_sum(before, "observed").phi_hat, 13000)
    rel(estimate_sum(after, "observed").phi_hat, 13300)
    rel(estimate_sum(before, "naive").phi_hat, exact_naive_total(mb, vb))
    rel(estimate_sum(after, "naive").phi_hat, exact_naive_total(ma, va))
    rel(estimate_sum(before, "frequency").phi_hat, exact_freq_total(mb, vb))
    rel(estimate_sum(after, "frequency").phi_hat, exact_freq_total(ma, va))
    rel(estimate_sum(before, "bucket").phi_hat, 14500)
    rel(estimate_sum(after, "bucket").phi_hat, 13950)
    fs = frequency_statistics(before)
    rel(sample_coverage(fs), Fraction(6, 7))
    rel(cv_squared(fs), Fraction(1, 6))
    rel(chao92(fs), exact_chao92(mb))
    rounded(estimate_sum(before, "naive").phi_hat, 16009.26)
    rounded(estimate_sum(after, "naive").phi_hat, 14962.5)
    rounded(estimate_sum(before, "frequency").phi_hat, 13694.44)
    rounded(estimate_sum(after, "frequency").phi_hat, 13450)
    elapsed = time.perf_counter() - t0
    ok = all(checks) and elapsed < 1.0
    record(1, ok, f"{sum(checks)}/{len(checks)} golden values, {elapsed:.3f}s")
    assert ok


# 2 -------------------------------------------------------------------------

def test_criterion_02_split_monotonicity():
    t0 = time.perf_counter()
    rng = np.random.default_rng(2024)
    size = 10_000
    n = rng.integers(2, 100_000, size)
    c = np.array([rng.integers(1, k + 1) for k in n])
    f1 = np.array([rng.integers(0, min(k, m - 1) + 1) for k, m in zip(c, n)])
    alpha = rng.random(size)
    # keep only tuples where both halves have more observations than singletons
    ok_domain = (alpha * f1 < n / 2) & ((1 - alpha) * f1 < n / 2)
    alpha = np.where(ok_domain, alpha, 0.5)
    whole = coverage_count(n, c, f1)
    halves = coverage_count(n / 2, c / 2, alpha * f1) + coverage_count(n / 2, c / 2, (1 - alpha) * f1)
    holds = whole <= halves * (1 + 1e-12)
    even = 2 * coverage_count(n / 2, c / 2, f1 / 2)
    equal = np.abs(even - whole) <= 1e-9 * whole
    elapsed = time.perf_counter() - t0
    ok = holds.all() and equal.all() and elapsed < 5.0
    record(2, ok, f"inequality {holds.sum()}/{size}, equality at 1/2 {equal.sum()}/{size}, {elapsed:.2f}s")
    assert ok


# 3 -------------------------------------------------------------------------

def test_criterion_03_ideal_regime():
    t0 = time.perf_counter()
    cfg = SimConfig(n_items=100, lam=0.0, rho=0.0, num_sources=100, source_size=5, seed=3)
    cheap = run_experiment(cfg, SUM_KINDS, 50, stride=10)
    cov = cheap.coverage.mean(axis=0)
    covered = cheap.ns[cov >= 0.6]
    mc_sizes = [n for n in prefix_sizes(cfg.total_size, 20) if n >= covered[0]]
    mc = run_experiment(cfg, ("monte-carlo",), 50, sizes=mc_sizes)

    worst_mid, worst_end, worst_bias = {}, {}, {}
    for res, kinds in ((cheap, SUM_KINDS), (mc, ("monte-carlo",))):
        mask = np.isin(res.ns, covered)
        for k in kinds:
            err = res.mean_abs_error(k)
            at = int(np.argmax(np.where(mask, err, -1)))
            worst_mid[k] = (float(err[at]), int(res.ns[at]))
            worst_end[k] = float(err[-1])
            worst_bias[k] = float(np.abs(np.mean(res.errors(k), axis=0))[mask].max())
    elapsed = time.perf_counter() - t0
    top = max(worst_mid, key=lambda k: worst_mid[k][0])
    ok = (worst_mid[top][0] < 0.10 and max(worst_end.values()) < 0.03 and elapsed < 30)
    record(3, ok, f"worst mean |rel err| once C>=0.6: {worst_mid[top][0]:.3f} ({top}, n={worst_mid[top][1]}); "
                  f"at full coverage (C={cov[-1]:.3f}): {max(worst_end.values()):.4f}; "
                  f"largest |mean signed rel err| once C>=0.6: {max(worst_bias.values()):.3f}; {elapsed:.1f}s")
    assert ok


# 4 -------------------------------------------------------------------------

def test_criterion_04_realistic_dominance():
    t0 = time.perf_counter()
    cfg = SimConfig(lam=4.0, rho=1.0, num_sources=10, source_size=50, seed=4)
    res = run_experiment(cfg, ("naive", "bucket"), 50, stride=10)
    mask = res.ns >= 100
    bucket = res.mean_abs_error("bucket", relative=False)[mask]
    naive = res.mean_abs_error("naive", relative=False)[mask]
    dominated = bucket <= naive
    final = float(res.mean_abs_error("bucket")[-1])
    elapsed = time.perf_counter() - t0
    ok = dominated.all() and final < 0.15 and elapsed < 60
    record(4, ok, f"bucket <= naive at {dominated.sum()}/{len(dominated)} steps, "
                  f"bucket final rel err {final:.3f}, {elapsed:.1f}s")
    assert ok


# 5 -------------------------------------------------------------------------

def test_criterion_05_rare_events_underestimated():
    worst = {}
    for w, nj in ((100, 5), (10, 50), (5, 100)):
        cfg = SimConfig(lam=4.0, rho=0.0, num_sources=w, source_size=nj, seed=5)
        res = run_experiment(cfg, SUM_KINDS + ("monte-carlo",), 50, sizes=[cfg.total_size])
        for k in res.estimates:
            signed = float(np.mean(res.errors(k)[:, -1]))
            worst[(w, k)] = signed
    top = max(worst, key=worst.get)
    ok = all(v <= 0 for v in worst.values())
    record(5, ok, f"largest mean signed final error {worst[top]:+.4f} ({top[1]}, w={top[0]})")
    assert ok


# 6 -------------------------------------------------------------------------

def test_criterion_06_sequential_streakers():
    t0 = time.perf_counter()
    cfg = SimConfig(lam=1.0, rho=1.0, num_sources=20, source_size=100, interleave="sequential", seed=6)
    sizes = prefix_sizes(cfg.total_size, 10, start=110)
    res = run_experiment(cfg, ("naive", "monte-carlo"), 20, sizes=sizes)
    mc = res.mean_abs_error("monte-carlo")
    naive = res.mean_abs_error("naive")
    better = mc < naive
    elapsed = time.perf_counter() - t0
    ok = better.all() and mc[-1] < 0.15 and naive[-1] > 0.25 and elapsed < 300
    record(6, ok, f"MC < naive at {better.sum()}/{len(better)} steps after the first streaker "
                  f"(ties where both are exact: {int(((mc == naive) & (mc == 0)).sum())}); "
                  f"final MC {mc[-1]:.3f}, naive {naive[-1]:.3f}; {elapsed:.1f}s")
    assert ok


# 7 -------------------------------------------------------------------------

@pytest.mark.parametrize("lam", [0.0, 0.4])
def test_criterion_07_mc_self_recovery(lam):
    hits = 0
    for seed in range(20):
        _, sample = simulate(SimConfig(n_items=100, lam=lam, num_sources=100, source_size=5, seed=700 + seed))
        n_hat = mc_estimate_n(sample, MCConfig(seed=seed)).n_hat
        hits += 90 <= n_hat <= 110
    prev = _seven.get("detail", "")
    _seven["ok"] = _seven.get("ok", True) and hits >= 16
    _seven["detail"] = (prev + "; " if prev else "") + f"lambda={lam}: {hits}/20 in [90,110]"
    record(7, _seven["ok"], _seven["detail"])
    assert hits >= 16


_seven: dict = {}


# 8 -------------------------------------------------------------------------

def test_criterion_08_upper_bound():
    cfg = SimConfig(lam=1.0, rho=1.0, num_sources=20, source_size=25, seed=8)
    sizes = prefix_sizes(cfg.total_size, 50, start=100)
    children = np.random.SeedSequence(cfg.seed).spawn(200)
    dominated = runs_with_bound = 0
    at = {100: [], 500: []}
    for child in children:
        rng = np.random.default_rng(child)
        gt = make_ground_truth(cfg, rng)
        obs = draw_observations(gt, cfg, rng)
        finite, holds = False, True
        for n, sample in zip(sizes, iter_prefixes(obs, sizes)):
            fs = frequency_statistics(sample)
            bound = delta_upper_bound(sample)
            if n in at:
                at[n].append(math.inf if bound is None else bound)
            if bound is None or sample_coverage(fs) < 0.4:
                continue
            finite = True
            holds &= bound >= gt.true_sum
        runs_with_bound += finite
        dominated += finite and holds
    share = dominated / runs_with_bound if runs_with_bound else 0.0
    m100, m500 = float(np.median(at[100])), float(np.median(at[500]))
    ok = share >= 0.99 and m500 < m100
    record(8, ok, f"bound >= truth in {dominated}/{runs_with_bound} runs with a finite bound; "
                  f"median bound n=100: {m100:.4g}, n=500: {m500:.4g}")
    assert ok


# 9 -------------------------------------------------------------------------

def test_criterion_09_extreme_gating():
    cfg = SimConfig(lam=1.0, rho=1.0, num_sources=20, source_size=25, seed=9)
    sizes = prefix_sizes(cfg.total_size, 50, start=100)
    children = np.random.SeedSequence(cfg.seed).spawn(1000)
    tally = {"max": [0, 0], "min": [0, 0]}
    for child in children:
        rng = np.random.default_rng(child)
        gt = make_ground_truth(cfg, rng)
        obs = draw_observations(gt, cfg, rng)
        truth = {"max": gt.values.max(), "min": gt.values.min()}
        for sample in iter_prefixes(obs, sizes):
            for which in ("max", "min"):
                rep = estimate_extreme(sample, which)
                if rep.reported:
                    tally[which][0] += 1
                    tally[which][1] += rep.value == truth[which]
    rates = {w: (hit / rep if rep else math.nan) for w, (rep, hit) in tally.items()}
    ok = all(rep > 0 and hit / rep >= 0.90 for rep, hit in tally.values())
    record(9, ok, "; ".join(f"{w}: exact in {hit}/{rep} reports ({rates[w]:.3f})"
                            for w, (rep, hit) in tally.items()))
    assert ok


# 10 ------------------------------------------------------------------------

counts = st.lists(st.integers(1, 15), min_size=1, max_size=80)


@settings(max_examples=200, deadline=None)
@given(counts)
def _f_stat_and_chao(cs):
    fs = FrequencyStatistics.from_counts(cs)
    assert sum(fs.f.values()) == fs.c and sum(j * k for j, k in fs.f.items()) == fs.n
    assert 0.0 <= sample_coverage(fs) <= 1.0
    if fs.n > fs.f1:
        assert chao92(fs) >= fs.c - 1e-9


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0.01, 1.0), min_size=2, max_size=10), st.randoms(use_true_random=False))
def _kl_props(raw, rnd):
    p = np.array(raw) / sum(raw)
    q = np.array(rnd.sample(raw, len(raw))) / sum(raw)
    assert kl_divergence(p, q) >= 0
    assert kl_divergence(p, q) == pytest.approx(max(kl(p, q), 0.0), abs=1e-9)
    assert kl_divergence(p, p) == pytest.approx(0.0, abs=1e-12)


def test_criterion_10_invariants(tmp_path):
    t0 = time.perf_counter()
    _f_stat_and_chao()
    _kl_props()
    _, sample = simulate(SimConfig(lam=2.0, rho=1.0, seed=10))
    path = tmp_path / "s.csv"
    write_sample_csv(sample, path)
    assert frequency_statistics(ingest_csv(path)) == frequency_statistics(sample)
    assert simulate(SimConfig(lam=2.0, rho=1.0, seed=10))[1] == sample
    a = run_experiment(SimConfig(seed=11), ("naive", "bucket"), 2, stride=100)
    b = run_experiment(SimConfig(seed=11), ("naive", "bucket"), 2, stride=100)
    assert all(np.array_equal(a.estimates[k], b.estimates[k]) for k in a.estimates)
    elapsed = time.perf_counter() - t0
    record(10, elapsed < 10, f"all invariant checks green, {elapsed:.2f}s")
    assert elapsed < 10
