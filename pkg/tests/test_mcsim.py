import math

import numpy as np
import pytest
from scipy import stats

from pptarp.analytic import calibrate_threshold, calibrated_metrics, false_alarm_prob, j_law
from pptarp.core import ContentionResource, SystemConfig
from pptarp.mcsim import (
    Z95,
    MetricEstimate,
    _complex_normal,
    draw_assignments,
    estimate_metrics,
    run_session,
    simulate_statistic_block,
    simulate_statistic_symbolwise,
    trial_rng,
)
from pptarp.specfun import gamma_cdf

KS_CRIT_1PCT = 1.6276
# asymptotic KS critical value at 1% split over the 9 (k, M_p) cases of the grid test
KS_CRIT_GRID = math.sqrt(-0.5 * math.log(0.01 / 9 / 2))


def ks_against_law(samples, law, scale):
    """One-sample KS distance between samples and law(x * scale)."""
    x = np.sort(samples)
    cdf = np.array([gamma_cdf(law, v * scale) for v in x])
    n = x.size
    return max(np.max(np.arange(1, n + 1) / n - cdf), np.max(cdf - np.arange(n) / n))


def test_no_devices_no_assignments():
    assert draw_assignments(SystemConfig(n_devices=0), np.random.default_rng(0)) == []


def test_single_resource_collects_everyone():
    cfg = SystemConfig(n_devices=7, n_preambles=1, m_base=4, m_partial=4)
    assert draw_assignments(cfg, np.random.default_rng(0)) == [ContentionResource(0, 0)] * 7


def test_assignment_uniformity():
    cfg = SystemConfig(n_devices=10_000, n_preambles=12, m_base=64, m_partial=8)
    rng = np.random.default_rng(11)
    counts = np.zeros(cfg.n_resources)
    for _ in range(100):
        for res in draw_assignments(cfg, rng):
            counts[res.flat_index(cfg.n_partial_units)] += 1
    n = counts.sum()
    p = 1 / cfg.n_resources
    sigma = math.sqrt(n * p * (1 - p))
    assert n == 1_000_000
    assert np.all(np.abs(counts - n * p) < 4 * sigma)
    assert stats.chisquare(counts).pvalue > 1e-3


def test_noise_floor_mean():
    cfg = SystemConfig(m_partial=8)
    j = simulate_statistic_block(0, cfg, np.random.default_rng(1), size=100_000)
    assert abs(j.mean() - 1.0) < 3 * math.sqrt(1 / 8 / j.size)


def test_single_device_mean():
    cfg = SystemConfig(m_partial=8, snr_db=-5)
    j = simulate_statistic_block(1, cfg, np.random.default_rng(2), size=100_000)
    expected = 1 + 10 ** (-0.5) * 20
    assert expected == pytest.approx(7.3246, abs=1e-4)
    assert abs(j.mean() - expected) < 3 * expected / math.sqrt(8 * j.size)
    # and it agrees with the closed-form law
    assert j_law(1, cfg).mean / cfg.block_symbols == pytest.approx(expected)


def test_block_scalar_draw():
    assert isinstance(simulate_statistic_block(1, SystemConfig(), np.random.default_rng(0)), float)


@pytest.mark.parametrize("k", [0, 1, 2])
@pytest.mark.parametrize("m_p", [1, 8, 64])
def test_block_statistic_follows_gamma_law(k, m_p):
    cfg = SystemConfig(m_partial=m_p, snr_db=-5)
    n = 20_000
    j = simulate_statistic_block(k, cfg, np.random.default_rng(100 + 10 * k + m_p), size=n)
    d = ks_against_law(j, j_law(k, cfg), cfg.block_symbols)
    assert d < KS_CRIT_GRID / math.sqrt(n)


@pytest.mark.parametrize("k,m_p", [(0, 8), (1, 8), (2, 64)])
def test_symbolwise_matches_block(k, m_p):
    cfg = SystemConfig(m_partial=m_p, snr_db=-5)
    a = simulate_statistic_block(k, cfg, np.random.default_rng(7), size=100_000)
    b = simulate_statistic_symbolwise(k, cfg, np.random.default_rng(8), size=100_000)
    res = stats.ks_2samp(a, b)
    assert res.statistic < KS_CRIT_1PCT * math.sqrt(2 / 100_000)


def test_symbolwise_zero_noise_is_channel_power():
    cfg = SystemConfig(m_partial=8, snr_db=-5)
    j = simulate_statistic_symbolwise(1, cfg, np.random.default_rng(3), noise_scale=0.0)
    h = _complex_normal(np.random.default_rng(3), (1, 8, 1))[0, :, 0]
    expected = cfg.snr_linear * cfg.block_symbols * np.mean(np.abs(h) ** 2)
    assert j == pytest.approx(expected, rel=1e-12)


def test_symbolwise_zero_noise_no_devices():
    j = simulate_statistic_symbolwise(0, SystemConfig(), np.random.default_rng(0), size=10, noise_scale=0.0)
    assert np.all(j == 0.0)


def test_lone_device_always_detected_at_minus_inf():
    out = run_session(SystemConfig(n_devices=1), trial_rng(0, 0), threshold_db=-math.inf)
    assert out.successes == 1 and out.collisions == 0
    assert out.per_device[0].success


def test_forced_collision_fails_everyone():
    cfg = SystemConfig(n_devices=2, n_preambles=1, m_base=1, m_partial=1)
    for i in range(20):
        out = run_session(cfg, trial_rng(5, i), threshold_db=0.0)
        assert out.collisions == 2 and out.successes == 0
        assert all(d.collided and not d.success for d in out.per_device)


@pytest.mark.parametrize("n_dev,m_p,snr", [(1, 64, -5), (5, 8, -5), (10, 2, -10), (30, 1, -5), (0, 16, -5)])
def test_session_invariants(n_dev, m_p, snr):
    cfg = SystemConfig(n_devices=n_dev, m_partial=m_p, snr_db=snr)
    th = calibrate_threshold(1e-2, m_p)
    for i in range(50):
        out = run_session(cfg, trial_rng(9, i), threshold_db=th)
        assert sum(out.occupancy.values()) == n_dev
        assert len(out.detected) == cfg.n_resources
        solo_missed = sum(1 for d in out.per_device if not d.collided and not d.detected)
        assert out.successes + out.collisions + solo_missed == n_dev
        for d in out.per_device:
            assert d.success == (not d.collided and d.detected)
            assert d.collided == (out.occupancy[d.resource] > 1)
        assert out.active == len(out.occupancy)
        assert out.empty_observed == cfg.n_resources - out.active


def test_false_alarm_counter_matches_closed_form():
    cfg = SystemConfig(n_devices=5, m_partial=8)
    th = calibrate_threshold(1e-2, 8)
    fa = empties = 0
    for i in range(10_000):
        out = run_session(cfg, trial_rng(21, i), threshold_db=th)
        fa += out.false_alarms
        empties += out.empty_observed
    p = false_alarm_prob(th, 8)
    assert abs(fa / empties - p) < 3 * math.sqrt(p * (1 - p) / empties)


def test_session_stream_reproducible():
    cfg = SystemConfig(n_devices=5, m_partial=8, threshold_db=3.0)
    a = [run_session(cfg, trial_rng(3, i)) for i in range(20)]
    b = [run_session(cfg, trial_rng(3, i)) for i in range(20)]
    assert a == b
    assert a != [run_session(cfg, trial_rng(4, i)) for i in range(20)]


def test_estimates_independent_of_workers_and_chunking():
    cfg = SystemConfig(n_devices=5, m_partial=8)
    th = calibrate_threshold(1e-2, 8)
    ref = estimate_metrics(cfg, 1200, 17, threshold_db=th)
    assert ref == estimate_metrics(cfg, 1200, 17, threshold_db=th, chunk_size=37)
    assert ref == estimate_metrics(cfg, 1200, 17, threshold_db=th, workers=2, chunk_size=300)


def test_metric_estimate_half_width():
    m = MetricEstimate.from_counts(30, 1000)
    assert m.half_width_95 == pytest.approx(Z95 * math.sqrt(0.03 * 0.97 / 1000))
    assert m.interval() == pytest.approx((0.03 - m.half_width_95, 0.03 + m.half_width_95))
    assert MetricEstimate.from_counts(0, 10).half_width_95 == 0.0


def test_no_devices_leaves_device_metrics_empty():
    est = estimate_metrics(SystemConfig(n_devices=0, m_partial=8), 200, 1, threshold_db=3.0)
    assert est.p_md is None and est.p_c is None and est.p_s is None
    assert est.p_fa.trials == 200 * 96


def test_sampled_empty_resources():
    cfg = SystemConfig(n_devices=5, m_partial=1)
    th = calibrate_threshold(1e-1, 1)
    est = estimate_metrics(cfg, 3000, 2, threshold_db=th, empty_samples=20)
    assert est.p_fa.trials == 3000 * 20
    assert est.p_fa.agrees_with(false_alarm_prob(th, 1), z=4)


def test_estimator_consistency_over_repeats():
    cfg = SystemConfig(n_devices=5, m_partial=4, snr_db=-5)
    th = calibrate_threshold(1e-2, 4)
    exact = calibrated_metrics(cfg, 1e-2)
    checks = misses = 0
    for rep in range(30):
        est = estimate_metrics(cfg, 2000, 1000 + rep, threshold_db=th)
        for name in ("p_fa", "p_md", "p_c", "p_s"):
            m = getattr(est, name)
            checks += 1
            misses += not abs(m.value - getattr(exact, name)) < 4 * m.half_width_95
    assert misses <= checks // 100


def test_single_device_baseline_always_succeeds():
    cfg = SystemConfig(n_devices=1, m_partial=64, snr_db=-5)
    est = estimate_metrics(cfg, 2000, 4, threshold_db=calibrate_threshold(1e-4, 64))
    assert est.p_s.value == 1.0


def test_table2_row_5_minus5_by_simulation():
    cfg = SystemConfig(n_devices=5, m_partial=8, snr_db=-5)
    est = estimate_metrics(cfg, 100_000, 12345, threshold_db=calibrate_threshold(1e-4, 8))
    assert est.p_s.value == pytest.approx(0.945, abs=est.p_s.half_width_95)
    assert est.p_c.value == pytest.approx(0.0410, abs=est.p_c.half_width_95)
