"""Monte Carlo simulation of NPRACH contention sessions with partial preambles.

Each session: devices pick a (preamble, partial unit) resource uniformly,
the eNodeB forms the accumulated correlation statistic of every resource
under block Rayleigh fading, and compares it with the detection threshold.

Trial ``i`` of a run with master seed ``s`` always draws from the generator
seeded by ``SeedSequence(s, spawn_key=(i,))``, so results do not depend on
chunking or on how many worker processes share the trials.
"""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass

import numpy as np

from .core import ContentionResource, SystemConfig, db_to_linear, validate

Z95 = 1.959963984540054
DEFAULT_CHUNK = 1000

# Tally layout: for each metric, (events, observations, sum y^2, sum n^2, sum y*n)
# where y and n are the per-session event and observation counts.
_METRICS = ("p_fa", "p_md", "p_c", "p_s")


def trial_rng(seed: int, index: int) -> np.random.Generator:
    """Independent generator for trial ``index`` of master seed ``seed``."""
    return np.random.Generator(np.random.PCG64(np.random.SeedSequence(seed, spawn_key=(index,))))


def _complex_normal(rng: np.random.Generator, shape, variance: float = 1.0) -> np.ndarray:
    scale = math.sqrt(variance / 2.0)
    return scale * (rng.standard_normal(shape) + 1j * rng.standard_normal(shape))


def _draw_flat(config: SystemConfig, rng: np.random.Generator) -> np.ndarray:
    return rng.integers(0, config.n_resources, size=config.n_devices)


def draw_assignments(config: SystemConfig, rng: np.random.Generator) -> list[ContentionResource]:
    """Step 1: every device picks a preamble and a partial unit uniformly."""
    g = config.n_partial_units
    return [ContentionResource.from_flat(i, g) for i in _draw_flat(config, rng)]


def simulate_statistic_block(
    k: int, config: SystemConfig, rng: np.random.Generator, size: int | None = None
):
    """Normalized detection statistic J / (nu*xi) of a resource shared by ``k`` devices.

    Works at basic-unit granularity: within a repetition the channel is
    constant, so the correlation of the ``nu*xi`` symbols sums coherently to
    ``nu*xi*sqrt(P)*h`` plus noise of variance ``nu*xi``.
    Returns a float, or an array of ``size`` independent draws.
    """
    if k < 0:
        raise ValueError(f"device count must be >= 0, got {k}")
    n = config.block_symbols
    m_p = config.m_partial
    shape = (1 if size is None else size, m_p)
    h = _complex_normal(rng, shape + (k,)).sum(axis=-1)
    r = n * math.sqrt(config.snr_linear) * h + _complex_normal(rng, shape, n)
    j = np.mean(np.abs(r) ** 2, axis=-1) / n
    return float(j[0]) if size is None else j


def simulate_statistic_symbolwise(
    k: int,
    config: SystemConfig,
    rng: np.random.Generator,
    size: int | None = None,
    noise_scale: float = 1.0,
    batch: int = 2000,
):
    """Same statistic as :func:`simulate_statistic_block`, built symbol by symbol.

    Every received symbol ``y = sum_k sqrt(P) h x + w`` is generated with
    ``x = 1``, correlated against ``x``, summed per repetition, squared and
    averaged.  ``noise_scale`` multiplies the noise amplitude (0 disables it).
    """
    if k < 0:
        raise ValueError(f"device count must be >= 0, got {k}")
    total = 1 if size is None else size
    out = np.empty(total)
    for start in range(0, total, batch):
        stop = min(total, start + batch)
        out[start:stop] = _symbolwise_batch(k, config, rng, stop - start, noise_scale)
    return float(out[0]) if size is None else out


def _symbolwise_batch(k, config, rng, count, noise_scale):
    m_p, nu, xi = config.m_partial, config.nu, config.xi
    x = np.ones((m_p, nu, xi), dtype=complex)
    # channel held over a basic unit (nu symbol groups)
    h = _complex_normal(rng, (count, m_p, k))
    faded = math.sqrt(config.snr_linear) * h.sum(axis=-1)[:, :, None, None] * x
    w = _complex_normal(rng, (count, m_p, nu, xi))
    y = faded + noise_scale * w
    corr = y * np.conj(x)
    r = corr.sum(axis=(-1, -2))
    return np.mean(np.abs(r) ** 2, axis=-1) / (nu * xi)


@dataclass(frozen=True)
class DeviceResult:
    resource: ContentionResource
    collided: bool
    detected: bool
    success: bool


@dataclass(frozen=True)
class SessionOutcome:
    """Result of one contention round.

    ``occupancy`` lists only used resources; any resource missing from it
    had no device.  ``detected`` covers every resource whose statistic was
    simulated.
    """

    occupancy: dict
    detected: dict
    per_device: list
    false_alarms: int
    empty_observed: int
    misdetections: int
    active: int
    collisions: int
    successes: int


@dataclass
class _SessionDraw:
    assignment: np.ndarray
    occupancy: np.ndarray
    observed: np.ndarray
    detected: np.ndarray


def _simulate_session(
    config: SystemConfig,
    threshold_linear: float,
    rng: np.random.Generator,
    empty_samples: int | None = None,
) -> _SessionDraw:
    n_res = config.n_resources
    n = config.block_symbols
    m_p = config.m_partial
    assignment = _draw_flat(config, rng)
    occupancy = np.bincount(assignment, minlength=n_res)

    if empty_samples is None:
        observed = np.ones(n_res, dtype=bool)
    else:
        observed = occupancy > 0
        empty = np.flatnonzero(~observed)
        pick = rng.choice(empty, size=min(empty_samples, empty.size), replace=False)
        observed[pick] = True
    rows = np.flatnonzero(observed)
    slot = np.full(n_res, -1)
    slot[rows] = np.arange(rows.size)

    h = _complex_normal(rng, (config.n_devices, m_p))
    faded = np.zeros((rows.size, m_p), dtype=complex)
    np.add.at(faded, slot[assignment], h)
    r = n * math.sqrt(config.snr_linear) * faded + _complex_normal(rng, (rows.size, m_p), n)
    stat = np.mean(np.abs(r) ** 2, axis=-1) / n

    detected = np.zeros(n_res, dtype=bool)
    detected[rows] = stat > threshold_linear
    return _SessionDraw(assignment, occupancy, observed, detected)


def _resolve_threshold(config: SystemConfig, threshold_db: float | None) -> float:
    if threshold_db is None:
        threshold_db = config.threshold_db
    if threshold_db is None:
        raise ValueError("no detection threshold given and config.threshold_db is unset")
    if threshold_db == -math.inf:
        return -math.inf
    return db_to_linear(threshold_db)


def run_session(
    config: SystemConfig,
    rng: np.random.Generator,
    threshold_db: float | None = None,
    empty_samples: int | None = None,
) -> SessionOutcome:
    """Simulate one session (Steps 1 and 2) and record per-device results."""
    config = validate(config)
    tau = _resolve_threshold(config, threshold_db)
    draw = _simulate_session(config, tau, rng, empty_samples)
    g = config.n_partial_units

    occupancy = {
        ContentionResource.from_flat(i, g): int(draw.occupancy[i])
        for i in np.flatnonzero(draw.occupancy)
    }
    detected = {
        ContentionResource.from_flat(i, g): bool(draw.detected[i])
        for i in np.flatnonzero(draw.observed)
    }
    per_device = []
    for flat in draw.assignment:
        collided = bool(draw.occupancy[flat] > 1)
        det = bool(draw.detected[flat])
        per_device.append(
            DeviceResult(ContentionResource.from_flat(flat, g), collided, det, det and not collided)
        )
    empty = draw.observed & (draw.occupancy == 0)
    active = draw.occupancy > 0
    return SessionOutcome(
        occupancy=occupancy,
        detected=detected,
        per_device=per_device,
        false_alarms=int(np.count_nonzero(draw.detected & empty)),
        empty_observed=int(np.count_nonzero(empty)),
        misdetections=int(np.count_nonzero(active & ~draw.detected)),
        active=int(np.count_nonzero(active)),
        collisions=sum(d.collided for d in per_device),
        successes=sum(d.success for d in per_device),
    )


@dataclass(frozen=True)
class MetricEstimate:
    """Empirical probability with a normal-approximation 95% half-width.

    ``trials`` counts observations (resources or devices).  Observations
    from the same session can be correlated (colliding devices come in
    groups), so the variance is inflated by ``design_effect``, estimated
    with sessions as clusters; it is 1 for independent observations.
    """

    value: float
    trials: int
    half_width_95: float
    design_effect: float = 1.0

    @classmethod
    def from_counts(cls, events: int, trials: int, design_effect: float = 1.0) -> MetricEstimate:
        if trials <= 0:
            raise ValueError("an estimate needs at least one observation")
        value = events / trials
        hw = Z95 * math.sqrt(design_effect * value * (1.0 - value) / trials)
        return cls(value, trials, hw, design_effect)

    def interval(self) -> tuple[float, float]:
        return self.value - self.half_width_95, self.value + self.half_width_95

    def agrees_with(self, p: float, z: float = Z95) -> bool:
        """True if the estimate lies in the ``z``-sigma sampling interval around ``p``."""
        sd = math.sqrt(self.design_effect * p * (1.0 - p) / self.trials)
        return abs(self.value - p) <= z * sd


@dataclass(frozen=True)
class SimulationEstimate:
    p_fa: MetricEstimate | None
    p_md: MetricEstimate | None
    p_c: MetricEstimate | None
    p_s: MetricEstimate | None
    sessions: int

    def as_dict(self) -> dict:
        return {name: getattr(self, name) for name in _METRICS}


def _session_counts(draw: _SessionDraw) -> tuple:
    occ = draw.occupancy
    empty = draw.observed & (occ == 0)
    active = occ > 0
    n_dev = draw.assignment.size
    on_own = occ[draw.assignment] == 1
    collided = n_dev - int(np.count_nonzero(on_own))
    success = int(np.count_nonzero(on_own & draw.detected[draw.assignment]))
    return (
        (int(np.count_nonzero(draw.detected & empty)), int(np.count_nonzero(empty))),
        (int(np.count_nonzero(active & ~draw.detected)), int(np.count_nonzero(active))),
        (collided, n_dev),
        (success, n_dev),
    )


def _run_chunk(args) -> list:
    config, tau, seed, start, stop, empty_samples = args
    tally = [[0, 0, 0, 0, 0] for _ in _METRICS]
    for i in range(start, stop):
        draw = _simulate_session(config, tau, trial_rng(seed, i), empty_samples)
        for acc, (y, n) in zip(tally, _session_counts(draw)):
            acc[0] += y
            acc[1] += n
            acc[2] += y * y
            acc[3] += n * n
            acc[4] += y * n
    return tally


def _estimate_from_tally(acc, sessions: int) -> MetricEstimate | None:
    y, n, yy, nn, yn = acc
    if n == 0:
        return None
    r = y / n
    iid = r * (1.0 - r) / n
    deff = 1.0
    if iid > 0.0 and sessions > 1:
        n_bar = n / sessions
        resid = yy - 2.0 * r * yn + r * r * nn
        clustered = max(resid, 0.0) / (n_bar**2 * sessions * (sessions - 1))
        deff = clustered / iid
    return MetricEstimate.from_counts(y, n, deff)


def estimate_metrics(
    config: SystemConfig,
    n_trials: int,
    seed: int | None = None,
    *,
    threshold_db: float | None = None,
    empty_samples: int | None = None,
    workers: int = 1,
    chunk_size: int = DEFAULT_CHUNK,
) -> SimulationEstimate:
    """Run ``n_trials`` independent sessions and estimate p_fa, p_md, p_c, p_s.

    p_fa is measured over empty resources, p_md over used resources, and
    p_c, p_s over devices.  Counts are summed exactly, so the result is
    identical for any ``workers`` or ``chunk_size``.
    """
    config = validate(config)
    if n_trials < 1:
        raise ValueError(f"n_trials must be >= 1, got {n_trials}")
    seed = config.seed if seed is None else seed
    tau = _resolve_threshold(config, threshold_db)
    jobs = [
        (config, tau, seed, start, min(n_trials, start + chunk_size), empty_samples)
        for start in range(0, n_trials, chunk_size)
    ]
    if workers > 1 and len(jobs) > 1:
        with ProcessPoolExecutor(max_workers=workers) as pool:
            parts = list(pool.map(_run_chunk, jobs))
    else:
        parts = [_run_chunk(job) for job in jobs]

    total = [[sum(part[m][f] for part in parts) for f in range(5)] for m in range(len(_METRICS))]
    estimates = [_estimate_from_tally(acc, n_trials) for acc in total]
    return SimulationEstimate(*estimates, sessions=n_trials)
