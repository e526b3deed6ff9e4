"""Choose the partial-preamble repetition count that maximizes ARP success."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

from . import analytic
from .core import MAX_REPETITION_EXPONENT, ConfigError, SystemConfig, is_power_of_two, validate
from .mcsim import estimate_metrics


@dataclass(frozen=True)
class CandidateRow:
    m_p: int
    g: int
    threshold_db: float
    p_fa: float
    p_md: float
    p_c: float
    p_s: float
    feasible: bool = True
    sim_p_s: float | None = None


@dataclass(frozen=True)
class OptimizationReport:
    rows: list
    best_m_p: int
    target_pfa: float
    config: SystemConfig
    notes: list = field(default_factory=list)

    @property
    def best_row(self) -> CandidateRow:
        return self.row(self.best_m_p)

    @property
    def baseline_row(self) -> CandidateRow:
        return self.row(self.config.m_base)

    def row(self, m_p: int) -> CandidateRow:
        for r in self.rows:
            if r.m_p == m_p:
                return r
        raise KeyError(m_p)


def candidate_repetitions(m_base: int) -> list[int]:
    """Admissible M_p values: powers of two up to both M_b and 2^7."""
    if not is_power_of_two(m_base):
        raise ConfigError(f"m_base must be a power of two, got {m_base}")
    return [2**q for q in range(MAX_REPETITION_EXPONENT + 1) if 2**q <= m_base]


def evaluate_candidate(template: SystemConfig, m_p: int, target_pfa: float) -> CandidateRow:
    cfg = template.replace(m_partial=m_p)
    threshold_db = analytic.calibrate_threshold(target_pfa, m_p)
    m = analytic.success_prob(cfg, threshold_db)
    return CandidateRow(
        m_p=m_p,
        g=cfg.n_partial_units,
        threshold_db=threshold_db,
        p_fa=m.p_fa,
        p_md=m.p_md,
        p_c=m.p_c,
        p_s=m.p_s,
    )


def _argmax(rows) -> CandidateRow:
    # ties go to the larger M_p, which detects better at equal success
    return max(rows, key=lambda r: (r.p_s, r.m_p))


def optimize(
    template: SystemConfig,
    target_pfa: float,
    *,
    max_p_c: float | None = None,
    max_p_md: float | None = None,
    verify_top: int = 0,
    verify_trials: int = 10_000,
    seed: int | None = None,
) -> OptimizationReport:
    """Sweep every candidate M_p with a CFAR-calibrated threshold and pick the best.

    The objective is the closed-form success probability.  ``max_p_c`` and
    ``max_p_md`` drop candidates that violate the bound before the argmax.
    With ``verify_top > 0`` the best feasible candidates are re-simulated
    and re-ranked by their simulated success probability.
    """
    template = validate(template)
    if not 0.0 < target_pfa < 1.0:
        raise ValueError(f"target_pfa must lie in (0, 1), got {target_pfa!r}")
    if template.n_devices < 1:
        raise ValueError("optimization needs at least one contending device")

    rows = []
    for m_p in candidate_repetitions(template.m_base):
        row = evaluate_candidate(template, m_p, target_pfa)
        feasible = (max_p_c is None or row.p_c <= max_p_c) and (
            max_p_md is None or row.p_md <= max_p_md
        )
        rows.append(replace(row, feasible=feasible))

    feasible = [r for r in rows if r.feasible]
    if not feasible:
        raise ValueError("no candidate M_p satisfies the p_c / p_md constraints")
    best = _argmax(feasible)
    notes = []

    if verify_top > 0:
        ranked = sorted(feasible, key=lambda r: (r.p_s, r.m_p), reverse=True)[:verify_top]
        simulated = {}
        for r in ranked:
            est = estimate_metrics(
                template.replace(m_partial=r.m_p),
                verify_trials,
                seed,
                threshold_db=r.threshold_db,
            )
            simulated[r.m_p] = est.p_s.value
        rows = [replace(r, sim_p_s=simulated.get(r.m_p)) for r in rows]
        sim_best = max(simulated, key=lambda m: (simulated[m], m))
        if sim_best != best.m_p:
            notes.append(
                f"simulation re-ranking moved the optimum from M_p={best.m_p} to M_p={sim_best}"
            )
        best = next(r for r in rows if r.m_p == sim_best)

    return OptimizationReport(
        rows=rows, best_m_p=best.m_p, target_pfa=target_pfa, config=template, notes=notes
    )
