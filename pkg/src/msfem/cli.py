"""Command-line driver: ``msfem run | converge | preset-list``."""
from __future__ import annotations

import argparse
import logging
import sys
from pathlib import Path

import numpy as np

from .config import KEYS, PRESETS, ConfigError, load_config
from .linalg import SolverError
from .mms import SourceGateError

EXIT_OK = 0
EXIT_CONFIG = 2
EXIT_SOLVER = 3
EXIT_CHECK = 4
EXIT_GATE = 5
EXIT_IO = 6


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="msfem", description=__doc__)
    parser.add_argument("-v", "--verbose", action="store_true")
    sub = parser.add_subparsers(dest="command", required=True)

    run = sub.add_parser("run", help="integrate one configuration")
    run.add_argument("--preset", choices=sorted(PRESETS))
    run.add_argument("--config", type=Path, help="flat key = value file")
    run.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    run.add_argument("--out", type=Path, default=None,
                     help="directory for diagnostics, VTK snapshots and line samples")
    run.add_argument("--check", action="append", default=[], choices=["mass", "energy"])
    run.add_argument("--check-tol", type=float, default=1e-8)

    conv = sub.add_parser("converge", help="manufactured-solution convergence table")
    conv.add_argument("--preset", choices=["example52"], default="example52")
    conv.add_argument("--config", type=Path)
    conv.add_argument("--set", dest="overrides", action="append", default=[], metavar="KEY=VALUE")
    conv.add_argument("--degree", type=int, default=None)
    conv.add_argument("--grid", default="4,8,16", help="comma-separated list of M")
    conv.add_argument("--dt-rule", choices=["h", "sqrt_h"], default=None)
    conv.add_argument("--T", type=float, default=1.0)
    conv.add_argument("--report-times", default=None, help="comma-separated times (default: T)")
    conv.add_argument("--csv", type=Path, default=None)

    sub.add_parser("preset-list", help="list built-in presets")
    return parser


def _relative_drift(values) -> float:
    v = np.asarray(values)
    return float(np.max(np.abs(v - v[0])) / abs(v[0])) if v[0] != 0 else float(np.max(np.abs(v)))


def _cmd_run(args) -> int:
    from .io import OutputWriter
    from .stepper import run

    overrides = list(args.overrides)
    cfg = load_config(args.config, args.preset, overrides)
    if args.out is not None:
        fill = {}
        if not cfg.csv_path:
            fill["csv_path"] = str(args.out / "diagnostics.csv")
        if not cfg.vtk_dir:
            fill["vtk_dir"] = str(args.out / "vtk")
        if not cfg.samples_path:
            fill["samples_path"] = str(args.out / "line_samples.csv")
        cfg = cfg.replace(**fill)
        args.out.mkdir(parents=True, exist_ok=True)
        cfg.save(args.out / "config.txt")
    print(cfg.to_text(), end="")
    print(f"# effective dt = {cfg.dt_effective!r} ({cfg.n_steps} steps)")
    writer = OutputWriter(cfg)
    try:
        result = run(cfg, observers=(writer,))
    finally:
        writer.close()
    diags = result.diagnostics
    mass = _relative_drift([d.mass for d in diags])
    energy = _relative_drift([d.energy for d in diags])
    print(f"steps={len(diags) - 1} mass_drift={mass:.3e} energy_drift={energy:.3e}")
    failed = [name for name, value in (("mass", mass), ("energy", energy))
              if name in args.check and not value <= args.check_tol]
    if failed:
        print(f"check failed: {', '.join(failed)} drift above {args.check_tol:g}", file=sys.stderr)
        return EXIT_CHECK
    return EXIT_OK


def _cmd_converge(args) -> int:
    from .io import write_csv
    from .mms import ErrorReport, convergence_study, report_row

    base = load_config(args.config, args.preset, args.overrides)
    degree = args.degree or base.degree
    grid = [int(m) for m in args.grid.split(",") if m.strip()]
    times = [float(t) for t in args.report_times.split(",")] if args.report_times else None
    rows = convergence_study(grid, degree, args.dt_rule, args.T, times, base=base,
                             log=lambda msg: print(msg, file=sys.stderr))
    table = [report_row(r) for r in rows]
    columns = ["M", "h", "dt", "t"] + list(ErrorReport.NORMS) + [f"eoc_{n}" for n in ErrorReport.NORMS]
    if args.csv:
        write_csv(args.csv, table, columns)
    print(",".join(columns))
    for row in table:
        print(",".join("%.6e" % row[c] if isinstance(row[c], float) else str(row[c]) for c in columns))
    return EXIT_OK


def _cmd_presets(_args) -> int:
    for name, values in PRESETS.items():
        inverse = {attr: key for key, attr in KEYS.items()}
        print(name + ": " + " ".join(f"{inverse[k]}={v}" for k, v in values.items()))
    return EXIT_OK


def main(argv=None) -> int:
    parser = _build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING, format="%(message)s")
    handlers = {"run": _cmd_run, "converge": _cmd_converge, "preset-list": _cmd_presets}
    try:
        return handlers[args.command](args)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except SourceGateError as exc:
        print(f"source check failed: {exc}", file=sys.stderr)
        return EXIT_GATE
    except SolverError as exc:
        print(f"solver failure: {exc}", file=sys.stderr)
        return EXIT_SOLVER
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO
    except ValueError as exc:
        print(f"invalid input: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
