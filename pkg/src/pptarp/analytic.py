"""Closed-form detection, collision and success probabilities.

Units: the per-symbol noise variance is 1 and the SNR is linear per symbol.
The noise-only statistic then has mean ``nu * xi`` and thresholds in dB are
taken relative to that mean, i.e. a resource is declared active when
``J / (nu * xi) > 10 ** (threshold_db / 10)``.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .core import SystemConfig, db_to_linear, linear_to_db, validate
from .specfun import GammaLaw, inv_reg_upper_gamma, log_gamma, reg_lower_gamma, reg_upper_gamma

TAIL_TOL = 1e-12


@dataclass(frozen=True)
class AnalyticMetrics:
    p_fa: float
    p_md: float
    p_c: float
    p_s: float
    threshold_linear: float

    @property
    def threshold_db(self) -> float:
        return linear_to_db(self.threshold_linear)


def j_law(k: int, config: SystemConfig) -> GammaLaw:
    """Law of the accumulated statistic of a resource shared by ``k`` devices."""
    if k < 0:
        raise ValueError(f"device count must be >= 0, got {k}")
    n = config.block_symbols
    m_p = config.m_partial
    return GammaLaw(shape=m_p, rate=m_p / (k * config.snr_linear * n * n + n))


def _tau(threshold_db: float) -> float:
    if threshold_db == -math.inf:
        return 0.0
    if threshold_db == math.inf:
        return math.inf
    return db_to_linear(threshold_db)


def false_alarm_prob(threshold_db: float, m_p: int) -> float:
    """Probability that a resource nobody used crosses the threshold."""
    return reg_upper_gamma(m_p, m_p * _tau(threshold_db))


def calibrate_threshold(target_pfa: float, m_p: int) -> float:
    """Threshold in dB that yields a false-alarm probability of ``target_pfa``."""
    if not 0.0 < target_pfa < 1.0:
        raise ValueError(f"target_pfa must lie in (0, 1), got {target_pfa!r}")
    return linear_to_db(inv_reg_upper_gamma(m_p, target_pfa) / m_p)


def _selection_prob(config: SystemConfig) -> float:
    return 1.0 / config.n_resources


def occupancy_pmf(k: int, config: SystemConfig) -> float:
    """Probability that exactly ``k`` devices pick a given resource."""
    n = config.n_devices
    if not 0 <= k <= n:
        raise ValueError(f"k must lie in [0, {n}], got {k}")
    p = _selection_prob(config)
    if p == 1.0:
        return 1.0 if k == n else 0.0
    log_comb = log_gamma(n + 1) - log_gamma(k + 1) - log_gamma(n - k + 1)
    return math.exp(log_comb + k * math.log(p) + (n - k) * math.log1p(-p))


def _active_prob(config: SystemConfig) -> float:
    # delta = 1 - p_0, without cancellation for small p
    return -math.expm1(config.n_devices * math.log1p(-_selection_prob(config)))


def misdetection_prob(
    threshold_db: float, config: SystemConfig, tail_tol: float = TAIL_TOL
) -> float:
    """Mis-detection probability of a resource used by at least one device.

    The sum over occupancy ``k`` stops once the remaining binomial mass is
    provably below ``tail_tol``; ``tail_tol=0`` sums every term.
    """
    config = validate(config)
    n = config.n_devices
    if n < 1:
        raise ValueError("mis-detection probability is undefined without devices (n_devices = 0)")
    delta = _active_prob(config)
    p = _selection_prob(config)
    m_p = config.m_partial
    x0 = m_p * _tau(threshold_db)
    gain = config.snr_linear * config.block_symbols
    odds = p / (1.0 - p) if p < 1.0 else math.inf

    total = 0.0
    for k in range(1, n + 1):
        pk = occupancy_pmf(k, config)
        total += pk * reg_lower_gamma(m_p, x0 / (1.0 + k * gain))
        if tail_tol > 0.0 and k < n:
            ratio = (n - k) / (k + 1) * odds
            # the pmf decreases geometrically past the mode
            if ratio < 1.0 and pk * ratio / (1.0 - ratio) < tail_tol:
                break
    return min(1.0, total / delta)


def collision_prob(config: SystemConfig) -> float:
    """Probability that a tagged device shares its resource with another."""
    if config.n_devices < 1:
        raise ValueError("collision probability needs at least one device")
    return -math.expm1((config.n_devices - 1) * math.log1p(-_selection_prob(config)))


def success_prob(config: SystemConfig, threshold_db: float | None = None) -> AnalyticMetrics:
    """Bundle p_fa, p_md, p_c and p_s = (1 - p_c)(1 - p_md) at one threshold."""
    config = validate(config)
    if threshold_db is None:
        threshold_db = config.threshold_db
    if threshold_db is None:
        raise ValueError("no detection threshold given and config.threshold_db is unset")
    p_fa = false_alarm_prob(threshold_db, config.m_partial)
    p_md = misdetection_prob(threshold_db, config)
    p_c = collision_prob(config)
    return AnalyticMetrics(
        p_fa=p_fa,
        p_md=p_md,
        p_c=p_c,
        p_s=(1.0 - p_c) * (1.0 - p_md),
        threshold_linear=_tau(threshold_db),
    )


def calibrated_metrics(config: SystemConfig, target_pfa: float) -> AnalyticMetrics:
    """Metrics with the threshold set for a constant false-alarm rate."""
    return success_prob(config, calibrate_threshold(target_pfa, config.m_partial))
