#!/usr/bin/env python3
"""Localized-density benchmark: conservation check plus probe densities over time.

    python3 scripts/run_example51.py --M 8 --T 0.5 --out runs/ex51
"""
import argparse
from pathlib import Path

import numpy as np

from msfem.config import preset
from msfem.io import OutputWriter
from msfem.stepper import run


def main():
    ap = argparse.ArgumentParser(description=__doc__, formatter_class=argparse.RawDescriptionHelpFormatter)
    ap.add_argument("--M", type=int, default=8)
    ap.add_argument("--degree", type=int, default=1)
    ap.add_argument("--T", type=float, default=0.5)
    ap.add_argument("--no-charge-source", action="store_true")
    ap.add_argument("--out", type=Path, default=Path("runs/example51"))
    args = ap.parse_args()

    cfg = preset("example51", M=args.M, degree=args.degree, T=args.T,
                 charge_source=not args.no_charge_source,
                 csv_path=str(args.out / "diagnostics.csv"), vtk_dir=str(args.out / "vtk"),
                 samples_path=str(args.out / "line_samples.csv"))
    args.out.mkdir(parents=True, exist_ok=True)
    cfg.save(args.out / "config.txt")
    writer = OutputWriter(cfg)
    try:
        res = run(cfg, observers=(writer,))
    finally:
        writer.close()
    mass = np.array([d.mass for d in res.diagnostics])
    energy = np.array([d.energy for d in res.diagnostics])
    print(f"{cfg.n_steps} steps, dt={cfg.dt_effective:g}")
    print(f"mass   {mass[0]:.12f} -> {mass[-1]:.12f}  max drift {np.max(np.abs(mass / mass[0] - 1)):.2e}")
    print(f"energy {energy[0]:.8f} -> {energy[-1]:.8f}")
    print(f"outputs in {args.out}")


if __name__ == "__main__":
    main()
