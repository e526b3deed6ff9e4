"""Command-line front end: analytic evaluation, simulation, sweeps and Table II.

Exit codes: 0 success, 1 usage error, 2 invalid configuration,
3 runtime or numerical failure (including an unwritable output path).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import math
import sys
from dataclasses import dataclass, field

from . import __version__, analytic
from .core import ConfigError, SystemConfig, load_config
from .mcsim import estimate_metrics
from .optimizer import candidate_repetitions, optimize
from .specfun import ConvergenceError

log = logging.getLogger("pptarp")

MODES = ("analytic", "simulate", "optimize", "sweep-threshold", "sweep-mp", "table2")
FORMATS = ("csv", "json")

EXIT_OK, EXIT_USAGE, EXIT_CONFIG, EXIT_RUNTIME = 0, 1, 2, 3

INT_COLUMNS = {"n_devices", "m_b", "m_p", "g", "trials", "is_best"}
DB_COLUMNS = {"snr_db", "threshold_db", "base_threshold_db"}
METRICS = ("p_fa", "p_md", "p_c", "p_s")

# flag -> SystemConfig field
_CONFIG_FLAGS = {
    "xi": "xi",
    "nu": "nu",
    "np": "n_preambles",
    "mb": "m_base",
    "mp": "m_partial",
    "snr_db": "snr_db",
    "nm": "n_devices",
    "threshold_db": "threshold_db",
    "seed": "seed",
}


class UsageError(Exception):
    pass


@dataclass
class ExperimentSpec:
    mode: str
    config: SystemConfig
    target_pfa: float = 1e-4
    trials: int = 0
    out: str | None = None
    fmt: str = "csv"
    workers: int = 1
    empty_samples: int | None = None
    start: float = -5.0
    stop: float = 15.0
    step: float = 0.5
    mp_values: list = field(default_factory=list)
    snr_values: list = field(default_factory=list)
    nm_values: list = field(default_factory=list)


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        self.exit(EXIT_USAGE, f"{self.prog}: error: {message}\n")


def _float_list(text: str) -> list[float]:
    try:
        return [float(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated numbers, got {text!r}")


def _int_list(text: str) -> list[int]:
    try:
        return [int(v) for v in text.split(",") if v.strip()]
    except ValueError:
        raise argparse.ArgumentTypeError(f"expected comma-separated integers, got {text!r}")


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    g = common.add_argument_group("configuration")
    g.add_argument("--config", metavar="FILE", help="key = value config file")
    g.add_argument("--xi", type=int, help="symbols per symbol group")
    g.add_argument("--nu", type=int, help="symbol groups per basic unit")
    g.add_argument("--np", type=int, help="number of preambles N_P")
    g.add_argument("--mb", type=int, help="baseline repetitions M_b")
    g.add_argument("--mp", type=int, help="partial-preamble repetitions M_p (default M_b)")
    g.add_argument("--snr-db", type=float, help="per-symbol received SNR in dB")
    g.add_argument("--nm", type=int, help="contending devices per session N_M")
    g.add_argument("--threshold-db", type=float, help="fixed detection threshold (overrides --target-pfa)")
    r = common.add_argument_group("run")
    r.add_argument("--seed", type=int, help="master RNG seed")
    r.add_argument("--trials", type=int, help="simulated sessions per point (0 = analytic only)")
    r.add_argument("--target-pfa", type=float, default=1e-4, help="false-alarm target for threshold calibration")
    r.add_argument("--workers", type=int, default=1, help="worker processes for simulation")
    r.add_argument("--empty-samples", type=int, help="simulate only this many empty resources per session")
    r.add_argument("--out", help="output file (default: stdout)")
    r.add_argument("--format", dest="fmt", choices=FORMATS, default="csv")

    parser = _Parser(prog="pptarp", description="Partial preamble transmission ARP toolkit")
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="mode", metavar="MODE")
    sub.required = True
    helps = {
        "analytic": "closed-form metrics for one configuration",
        "simulate": "Monte Carlo metrics next to the closed forms",
        "optimize": "best M_p for the given load and SNR",
        "sweep-threshold": "metrics versus detection threshold",
        "sweep-mp": "metrics versus M_p (trade-off curve)",
        "table2": "optimal M_p for each (N_M, SNR) pair, baseline versus proposed",
    }
    for mode in MODES:
        p = sub.add_parser(mode, parents=[common], help=helps[mode])
        if mode == "sweep-threshold":
            p.add_argument("--start", type=float, default=-5.0)
            p.add_argument("--stop", type=float, default=15.0)
            p.add_argument("--step", type=float, default=0.5)
            p.add_argument("--mp-values", type=_int_list, help="M_p values, e.g. 16,64")
            p.add_argument("--snr-values", type=_float_list, help="SNR values in dB, e.g. -10,-5")
        if mode == "sweep-mp":
            p.add_argument("--mp-values", type=_int_list, help="candidate M_p values (default: all)")
        if mode == "table2":
            p.add_argument("--nm-values", type=_int_list, default=[1, 2, 5, 10])
            p.add_argument("--snr-values", type=_float_list, default=[-5.0, -10.0])
    return parser


def parse_args(argv) -> ExperimentSpec:
    """Turn command-line arguments into an :class:`ExperimentSpec`.

    Flags override values read from ``--config``.  Invalid configurations
    raise :class:`ConfigError`; malformed usage exits with status 1.
    """
    parser = build_parser()
    if not argv:
        parser.print_usage(sys.stderr)
        parser.exit(EXIT_USAGE, "pptarp: error: a MODE is required\n")
    ns = parser.parse_args(argv)

    values = {}
    if ns.config:
        try:
            values.update(load_config(ns.config))
        except OSError as exc:
            raise ConfigError(f"cannot read config file: {exc}") from None
    for flag, name in _CONFIG_FLAGS.items():
        v = getattr(ns, flag)
        if v is not None:
            values[name] = v
    values.setdefault("m_partial", values.get("m_base", SystemConfig.m_base))
    config = SystemConfig(**values)

    trials = ns.trials if ns.trials is not None else (10_000 if ns.mode == "simulate" else 0)
    if trials < 0 or (ns.mode == "simulate" and trials < 1):
        raise UsageError("--trials must be >= 1 in simulate mode and >= 0 elsewhere")
    if not 0.0 < ns.target_pfa < 1.0:
        raise ConfigError(f"--target-pfa must lie in (0, 1), got {ns.target_pfa}")
    if ns.workers < 1:
        raise UsageError("--workers must be >= 1")

    spec = ExperimentSpec(
        mode=ns.mode,
        config=config,
        target_pfa=ns.target_pfa,
        trials=trials,
        out=ns.out,
        fmt=ns.fmt,
        workers=ns.workers,
        empty_samples=ns.empty_samples,
    )
    if ns.mode == "sweep-threshold":
        if not ns.step > 0:
            raise UsageError("--step must be > 0")
        if ns.stop < ns.start:
            raise UsageError("sweep range is empty (--stop < --start)")
        spec.start, spec.stop, spec.step = ns.start, ns.stop, ns.step
        spec.mp_values = ns.mp_values or [config.m_partial]
        spec.snr_values = ns.snr_values or [config.snr_db]
    elif ns.mode == "sweep-mp":
        spec.mp_values = ns.mp_values or candidate_repetitions(config.m_base)
    elif ns.mode == "table2":
        spec.nm_values = ns.nm_values
        spec.snr_values = ns.snr_values
        if not spec.nm_values or not spec.snr_values:
            raise UsageError("table2 needs nonempty --nm-values and --snr-values")
    for m_p in spec.mp_values:
        config.replace(m_partial=m_p)  # validates each sweep point up front
    return spec


def _round(name: str, value):
    if value is None:
        return None
    if name in INT_COLUMNS:
        return int(value)
    if name in DB_COLUMNS:
        return float(f"{value:.3f}")
    return float(f"{value:.5e}")


def _format(name: str, value) -> str:
    if value is None:
        return ""
    if name in INT_COLUMNS:
        return str(int(value))
    if name in DB_COLUMNS:
        return f"{value:.3f}"
    return f"{value:.5e}"


def _record(**fields) -> dict:
    return {k: _round(k, v) for k, v in fields.items()}


def _analytic_fields(cfg: SystemConfig, threshold_db: float) -> dict:
    p_fa = analytic.false_alarm_prob(threshold_db, cfg.m_partial)
    if cfg.n_devices < 1:
        return dict(threshold_db=threshold_db, p_fa=p_fa, p_md=None, p_c=None, p_s=None)
    m = analytic.success_prob(cfg, threshold_db)
    return dict(threshold_db=threshold_db, p_fa=m.p_fa, p_md=m.p_md, p_c=m.p_c, p_s=m.p_s)


def _sim_fields(spec: ExperimentSpec, cfg: SystemConfig, threshold_db: float, expected: dict) -> dict:
    if spec.trials < 1:
        return {}
    _warn_rare(spec, cfg, expected)
    est = estimate_metrics(
        cfg,
        spec.trials,
        cfg.seed,
        threshold_db=threshold_db,
        empty_samples=spec.empty_samples,
        workers=spec.workers,
    )
    out = {"trials": spec.trials}
    for name in METRICS:
        m = getattr(est, name)
        out[f"sim_{name}"] = None if m is None else m.value
        out[f"sim_{name}_hw"] = None if m is None else m.half_width_95
    return out


def _warn_rare(spec: ExperimentSpec, cfg: SystemConfig, expected: dict) -> None:
    empties = spec.empty_samples if spec.empty_samples is not None else cfg.n_resources
    opportunities = {"p_fa": spec.trials * max(empties - cfg.n_devices, 1)}
    if cfg.n_devices:
        opportunities["p_md"] = spec.trials * min(cfg.n_devices, cfg.n_resources)
    for name, n in opportunities.items():
        p = expected.get(name)
        if p is not None and n * p < 100:
            log.warning(
                "M_p=%d: only %.3g %s events expected in %d sessions; estimate will be noisy",
                cfg.m_partial, n * p, name, spec.trials,
            )


def _threshold_for(spec: ExperimentSpec, cfg: SystemConfig) -> float:
    if cfg.threshold_db is not None:
        return cfg.threshold_db
    return analytic.calibrate_threshold(spec.target_pfa, cfg.m_partial)


def _point(spec: ExperimentSpec, cfg: SystemConfig, threshold_db: float, **extra) -> dict:
    a = _analytic_fields(cfg, threshold_db)
    return _record(
        n_devices=cfg.n_devices,
        snr_db=cfg.snr_db,
        m_p=cfg.m_partial,
        g=cfg.n_partial_units,
        **a,
        **extra,
        **_sim_fields(spec, cfg, threshold_db, a),
    )


def build_records(spec: ExperimentSpec) -> list[dict]:
    cfg = spec.config
    if spec.mode in ("analytic", "simulate"):
        return [_point(spec, cfg, _threshold_for(spec, cfg))]

    if spec.mode == "sweep-threshold":
        n_steps = int(math.floor((spec.stop - spec.start) / spec.step + 1e-9))
        grid = [spec.start + i * spec.step for i in range(n_steps + 1)]
        return [
            _point(spec, cfg.replace(m_partial=m_p, snr_db=snr), d)
            for snr in spec.snr_values
            for m_p in spec.mp_values
            for d in grid
        ]

    if spec.mode in ("optimize", "sweep-mp"):
        _need_devices(cfg)
        report = optimize(cfg, spec.target_pfa)
        m_values = spec.mp_values if spec.mode == "sweep-mp" else [r.m_p for r in report.rows]
        best = max((report.row(m) for m in m_values), key=lambda r: (r.p_s, r.m_p)).m_p
        return [
            _point(spec, cfg.replace(m_partial=m), report.row(m).threshold_db, is_best=m == best)
            for m in m_values
        ]

    if spec.mode == "table2":
        records = []
        for nm in spec.nm_values:
            for snr in spec.snr_values:
                template = cfg.replace(n_devices=nm, snr_db=snr, threshold_db=None)
                _need_devices(template)
                report = optimize(template, spec.target_pfa)
                base, best = report.baseline_row, report.best_row
                best_cfg = template.replace(m_partial=best.m_p)
                a = dict(threshold_db=best.threshold_db, p_fa=best.p_fa, p_md=best.p_md, p_c=best.p_c, p_s=best.p_s)
                records.append(
                    _record(
                        n_devices=nm,
                        snr_db=snr,
                        m_b=cfg.m_base,
                        base_threshold_db=base.threshold_db,
                        base_p_fa=base.p_fa,
                        base_p_md=base.p_md,
                        base_p_c=base.p_c,
                        base_p_s=base.p_s,
                        m_p=best.m_p,
                        g=best.g,
                        **a,
                        **_sim_fields(spec, best_cfg, best.threshold_db, a),
                    )
                )
        return records
    raise UsageError(f"unknown mode {spec.mode!r}")


def _need_devices(cfg: SystemConfig) -> None:
    if cfg.n_devices < 1:
        raise ConfigError("this mode needs at least one contending device (--nm >= 1)")


def render_csv(records: list[dict]) -> str:
    columns = []
    for rec in records:
        columns.extend(k for k in rec if k not in columns)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(columns)
    for rec in records:
        writer.writerow([_format(c, rec.get(c)) for c in columns])
    return buf.getvalue()


def parse_csv(text: str) -> list[dict]:
    """Read records written by :func:`render_csv`; blank cells become ``None``."""
    rows = list(csv.reader(io.StringIO(text)))
    if not rows:
        return []
    header, out = rows[0], []
    for row in rows[1:]:
        rec = {}
        for name, cell in zip(header, row):
            if cell == "":
                rec[name] = None
            elif name in INT_COLUMNS:
                rec[name] = int(cell)
            else:
                rec[name] = float(cell)
        out.append(rec)
    return out


def render_json(spec: ExperimentSpec, records: list[dict]) -> str:
    doc = {
        "tool": "pptarp",
        "version": __version__,
        "mode": spec.mode,
        "seed": spec.config.seed,
        "trials": spec.trials,
        "target_pfa": spec.target_pfa,
        "config": spec.config.as_dict(),
        "records": records,
    }
    return json.dumps(doc, indent=2) + "\n"


def run_experiment(spec: ExperimentSpec) -> int:
    """Compute the records for ``spec`` and write them; returns the exit status."""
    records = build_records(spec)
    text = render_csv(records) if spec.fmt == "csv" else render_json(spec, records)
    if spec.out is None:
        sys.stdout.write(text)
    else:
        with open(spec.out, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
    return EXIT_OK


def main(argv=None) -> int:
    logging.basicConfig(level=logging.INFO, format="%(name)s: %(levelname)s: %(message)s")
    argv = sys.argv[1:] if argv is None else list(argv)
    try:
        spec = parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else EXIT_USAGE
    except UsageError as exc:
        print(f"pptarp: error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    except ConfigError as exc:
        print(f"pptarp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    try:
        return run_experiment(spec)
    except ConfigError as exc:
        print(f"pptarp: invalid configuration: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ConvergenceError, ArithmeticError, ValueError, OSError) as exc:
        print(f"pptarp: error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
