#!/usr/bin/env python3
"""H1/L2 error tables and observed orders for the manufactured solution.

    python3 scripts/convergence_tables.py --degree 2 --dt-rule h --grid 4,8,16
    python3 scripts/convergence_tables.py --degree 1 --dt-rule sqrt_h --start first_order,taylor2,exact
    python3 scripts/convergence_tables.py --interpolation --grid 2,4,8,16

With --interpolation only the nodal interpolant of the exact solution is
measured, which separates approximation error from time-stepping error.
"""
import argparse
import sys
from pathlib import Path

from msfem.assembly import FormContext
from msfem.config import preset
from msfem.io import write_csv
from msfem.mesh import build_unit_cube_mesh
from msfem.mms import ErrorReport, attach_eoc, build_example52, convergence_study, interpolation_errors, report_row


def _print(rows, label):
    print(f"# {label}")
    print(f"{'M':>4} {'dt':>9} {'t':>6} {'Psi H1':>11} {'eoc':>6} {'A H1':>11} {'eoc':>6} "
          f"{'Psi L2':>11} {'eoc':>6} {'A L2':>11} {'eoc':>6}")
    for r in rows:
        e = lambda n: f"{r.eoc[n]:6.3f}" if n in r.eoc else "     -"
        print(f"{r.M:4d} {r.dt:9.4g} {r.t:6.3g} {r.errPsi_H1:11.4e} {e('errPsi_H1')} {r.errA_H1:11.4e} "
              f"{e('errA_H1')} {r.errPsi_L2:11.4e} {e('errPsi_L2')} {r.errA_L2:11.4e} {e('errA_L2')}")


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--degree", type=int, default=2)
    ap.add_argument("--grid", default="4,8,16")
    ap.add_argument("--dt-rule", choices=["h", "sqrt_h"], default=None)
    ap.add_argument("--T", type=float, default=1.0)
    ap.add_argument("--start", default="exact", help="comma-separated start modes")
    ap.add_argument("--interpolation", action="store_true")
    ap.add_argument("--csv", type=Path, default=None)
    args = ap.parse_args()
    grid = [int(m) for m in args.grid.split(",")]
    dt_rule = args.dt_rule or ("h" if args.degree == 2 else "sqrt_h")

    all_rows = []
    if args.interpolation:
        ex = build_example52()
        rows = attach_eoc([interpolation_errors(FormContext(build_unit_cube_mesh(M), args.degree), ex, args.T)
                           for M in grid])
        _print(rows, f"interpolation only, P{args.degree}, t={args.T}")
        all_rows += [dict(report_row(r), start="interp") for r in rows]
    else:
        for start in args.start.split(","):
            base = preset("example52", start=start)
            log = lambda msg: print(msg, file=sys.stderr)
            rows = convergence_study(grid, args.degree, dt_rule, args.T, base=base, log=log)
            _print(rows, f"P{args.degree}, dt rule {dt_rule}, start {start}")
            all_rows += [dict(report_row(r), start=start) for r in rows]
    if args.csv:
        cols = ["start", "M", "h", "dt", "t"] + list(ErrorReport.NORMS) + [f"eoc_{n}" for n in ErrorReport.NORMS]
        write_csv(args.csv, all_rows, cols)


if __name__ == "__main__":
    main()
