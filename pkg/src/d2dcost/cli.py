"""Command-line front end.

Curves and tables go out as CSV, scalar results as JSON.  With ``--out``
and CSV format, a JSON summary is written next to the CSV
(``<out>.summary.json``).
"""

from __future__ import annotations

import argparse
import csv
import io
import json
import logging
import sys
import time
from dataclasses import replace

from . import __version__, analytic, experiments
from .config import ConfigError, RunConfig, load_config
from .model import reference_codes, validate
from .simulate import SimConfig, replicate, run

logger = logging.getLogger("d2dcost")

EXIT_CONFIG = 1
EXIT_NUMERIC = 2
EXIT_IO = 3


def _grid(args, config: RunConfig):
    """Repair intervals in t.u. from the flags, falling back to the config."""
    sched = config.schedule
    if args.delta is not None:
        values = [args.delta]
    elif args.delta_grid is not None:
        values = list(experiments.parse_grid(args.delta_grid))
    elif sched.delta is not None:
        values = [sched.delta]
    else:
        values = list(experiments.parse_grid(sched.delta_grid))
    return config.to_time(values)


def _apply_overrides(args, config: RunConfig) -> RunConfig:
    sched = config.schedule
    if getattr(args, "units", None):
        sched = replace(sched, units=args.units)
    if getattr(args, "tol", None) is not None:
        sched = replace(sched, tol=args.tol)
    sim = config.simulation
    for flag, name in (("intervals", "intervals"), ("seed", "seed"), ("replications", "replications")):
        value = getattr(args, flag, None)
        if value is not None:
            if value < (0 if name == "seed" else 1):
                raise ConfigError(f"simulation.{name}", f"invalid value {value}")
            sim = replace(sim, **{name: value})
    if getattr(args, "track_population", False):
        sim = replace(sim, track_population=True)
    out = config.output
    if args.out is not None:
        out = replace(out, path=args.out)
    if args.format is not None:
        out = replace(out, format=args.format)
    return replace(config, schedule=sched, simulation=sim, output=out)


def _metadata(config: RunConfig, engine: str, started: float) -> dict:
    return {
        "version": __version__,
        "engine": engine,
        "seed": config.simulation.seed if engine == "simulated" else None,
        "wall_time_s": round(time.perf_counter() - started, 6),
        "config": config.to_dict(),
    }


def _write_text(path, text):
    if path is None:
        sys.stdout.write(text)
        return
    with open(path, "w", encoding="utf-8", newline="") as fh:
        fh.write(text)


def _emit(config: RunConfig, summary: dict, csv_text: str | None = None):
    path = config.output.path
    if csv_text is not None and config.output.format == "csv":
        _write_text(path, csv_text)
        if path is not None:
            _write_text(f"{path}.summary.json", json.dumps(summary, indent=2) + "\n")
        return
    _write_text(path, json.dumps(summary, indent=2) + "\n")


def cmd_analyze(args, config: RunConfig, started: float) -> int:
    code, params = config.storage_code(), config.network_params()
    table = experiments.sweep_delta(code, params, _grid(args, config), "analytic")
    summary = {"code": code.label, "rows": [r._asdict() for r in table.rows],
               "metadata": _metadata(config, "analytic", started)}
    _emit(config, summary, table.to_csv())
    return 0


def cmd_simulate(args, config: RunConfig, started: float) -> int:
    code, params = config.storage_code(), config.network_params()
    sim = config.simulation
    rows, results = [], []
    for idx, delta in enumerate(_grid(args, config)):
        cfg = SimConfig(code, params, delta, sim.intervals, sim.seed + idx, sim.replications,
                        sim.track_population)
        res = replicate(cfg) if sim.replications > 1 else run(cfg)
        results.append({"delta": delta, **res.as_dict()})
        rows.append(experiments.CurveRow(delta, delta * params.mu, res.repair_cost_rate,
                                         res.download_cost_rate, res.total_cost_rate,
                                         res.normalized_total))
    table = experiments.CurveTable(rows, {"engine": "simulated"})
    summary = {"code": code.label, "results": results,
               "metadata": _metadata(config, "simulated", started)}
    _emit(config, summary, table.to_csv())
    return 0


def cmd_delta_max(args, config: RunConfig, started: float) -> int:
    code, params = config.storage_code(), config.network_params()
    res = experiments.find_delta_max(code, params, config.schedule.tol)
    finite = res.delta_max is not None
    summary = {
        "code": code.label,
        "delta_max": res.delta_max if finite else "none",
        "mu_delta_max": res.delta_max * params.mu if finite else "none",
        "bracket": list(res.bracket) if res.bracket else None,
        "residual": res.residual,
        "grid_resolution": res.grid_resolution,
        "metadata": _metadata(config, "analytic", started),
    }
    _emit(config, summary)
    return 0


def cmd_optimal_delta(args, config: RunConfig, started: float) -> int:
    code, params = config.storage_code(), config.network_params()
    res = experiments.find_optimal_delta(code, params, config.schedule.tol)
    scale = params.N * params.omega * params.rho_bs
    summary = {
        "code": code.label,
        "delta_star": res.delta_star,
        "mu_delta_star": res.delta_star * params.mu,
        "cost_star": res.cost_star,
        "normalized_cost_star": res.cost_star / scale,
        "metadata": _metadata(config, "analytic", started),
    }
    _emit(config, summary)
    return 0


def cmd_sweep_rho(args, config: RunConfig, started: float) -> int:
    params = config.network_params()
    codes = reference_codes(params.M) if args.reference_codes else [config.storage_code()]
    grid = experiments.parse_grid(args.rho_grid or config.schedule.rho_grid)
    rows = experiments.sweep_rho(codes, params, grid, config.schedule.tol)
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(["rho", "code", "mu_delta_max"])
    for row in rows:
        writer.writerow([repr(row.rho), row.code, "" if row.mu_delta_max is None else repr(row.mu_delta_max)])
    summary = {"rows": [r._asdict() for r in rows], "metadata": _metadata(config, "analytic", started)}
    _emit(config, summary, buf.getvalue())
    return 0


def cmd_validate(args, config: RunConfig, started: float) -> int:
    code, params = config.storage_code(), config.network_params()
    report = validate(code, params)
    summary = {"code": code.label, "rate": code.rate, **report.as_dict(),
               "metadata": _metadata(config, "analytic", started)}
    _emit(config, summary)
    return 0


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="JSON run configuration")
    common.add_argument("--out", help="output path (default: stdout)")
    common.add_argument("--format", choices=("csv", "json"))

    schedule = argparse.ArgumentParser(add_help=False)
    schedule.add_argument("--delta", type=float, help="single repair interval")
    schedule.add_argument("--delta-grid", help="lin:a:b:n or log:a:b:n")
    schedule.add_argument("--units", choices=("mu_delta", "time"),
                          help="interpret intervals as mu*delta (default) or t.u.")

    search = argparse.ArgumentParser(add_help=False)
    search.add_argument("--tol", type=float, help="bracket width in t.u.")

    parser = argparse.ArgumentParser(prog="d2dcost", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("analyze", parents=[common, schedule], help="closed-form cost curve")
    p.set_defaults(func=cmd_analyze)

    p = sub.add_parser("simulate", parents=[common, schedule], help="Monte Carlo cost curve")
    p.add_argument("--intervals", type=int)
    p.add_argument("--seed", type=int)
    p.add_argument("--replications", type=int)
    p.add_argument("--track-population", action="store_true")
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("delta-max", parents=[common, search], help="break-even repair interval")
    p.set_defaults(func=cmd_delta_max)

    p = sub.add_parser("optimal-delta", parents=[common, search], help="cost-minimizing repair interval")
    p.set_defaults(func=cmd_optimal_delta)

    p = sub.add_parser("sweep-rho", parents=[common, search], help="break-even interval vs cost ratio")
    p.add_argument("--rho-grid")
    p.add_argument("--reference-codes", action="store_true",
                   help="sweep the six reference codes instead of the configured one")
    p.set_defaults(func=cmd_sweep_rho)

    p = sub.add_parser("validate", parents=[common], help="check the code against the cell")
    p.set_defaults(func=cmd_validate)
    return parser


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        # usage errors are configuration errors; exit status 2 is reserved
        return EXIT_CONFIG if exc.code else 0
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    started = time.perf_counter()
    try:
        config = _apply_overrides(args, load_config(args.config))
        return args.func(args, config, started)
    except ConfigError as exc:
        logger.error("config error: %s", exc)
        return EXIT_CONFIG
    except analytic.NumericalInstabilityError as exc:
        logger.error("numerical instability: %s", exc)
        return EXIT_NUMERIC
    except OSError as exc:
        logger.error("I/O error: %s", exc)
        return EXIT_IO
    except ValueError as exc:
        logger.error("invalid input: %s", exc)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
