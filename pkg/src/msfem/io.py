"""CSV, legacy VTK and line-sample output."""
from __future__ import annotations

import csv
import math
from pathlib import Path

import numpy as np

from .space import ScalarField, evaluate_at_points

# Point probes used for the density plots of the first benchmark.
PROBES = {
    "x1": (0.25, 0.5, 0.75),
    "x2": (0.5, 0.5, 0.5),
    "x3": (0.4, 0.5, 0.6),
}


def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(int(v))
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return "%.16e" % v
    return str(v)


def write_csv(path, rows, columns=None) -> Path:
    """Write dict rows with floats in 17-significant-digit scientific notation."""
    path = Path(path)
    rows = list(rows)
    columns = list(columns or (rows[0].keys() if rows else []))
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        with path.open("w", newline="") as fh:
            w = csv.writer(fh, lineterminator="\n")
            w.writerow(columns)
            for row in rows:
                w.writerow([_fmt(row.get(c, math.nan)) for c in columns])
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc}") from exc
    return path


class CsvAppender:
    """Row-by-row CSV writer that fixes the header on the first row."""

    def __init__(self, path):
        self.path = Path(path)
        self.columns = None
        self.path.parent.mkdir(parents=True, exist_ok=True)
        self._fh = self.path.open("w", newline="")
        self._w = csv.writer(self._fh, lineterminator="\n")

    def write(self, row: dict) -> None:
        if self.columns is None:
            self.columns = list(row)
            self._w.writerow(self.columns)
        self._w.writerow([_fmt(row.get(c, math.nan)) for c in self.columns])

    def close(self) -> None:
        self._fh.close()


def vertex_values(space, coeffs) -> np.ndarray:
    """Nodal values at mesh vertices; vector fields come back as (nv, 3)."""
    coeffs = np.asarray(coeffs)
    if len(coeffs) == 3 * space.n_dofs:
        return coeffs.reshape(3, -1)[:, space.vertex_dofs].T
    return coeffs[space.vertex_dofs]


def write_vtk(path, mesh, psi_vertices, A_vertices, title: str = "msfem fields") -> Path:
    """Legacy ASCII unstructured grid with rho, Re/Im Psi and A at the vertices."""
    path = Path(path)
    psi = np.asarray(psi_vertices, dtype=complex)
    A = np.asarray(A_vertices, dtype=float).reshape(-1, 3)
    nv, nc = mesh.n_vertices, mesh.n_cells
    if psi.shape != (nv,) or A.shape != (nv, 3):
        raise ValueError("field arrays must hold one value per mesh vertex")
    lines = ["# vtk DataFile Version 3.0", title, "ASCII", "DATASET UNSTRUCTURED_GRID",
             f"POINTS {nv} double"]
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in mesh.vertices]
    lines.append(f"CELLS {nc} {5 * nc}")
    lines += [f"4 {a} {b} {c} {d}" for a, b, c, d in mesh.cells]
    lines.append(f"CELL_TYPES {nc}")
    lines += ["10"] * nc
    lines.append(f"POINT_DATA {nv}")
    for name, values in (("rho", np.abs(psi) ** 2), ("re_psi", psi.real), ("im_psi", psi.imag)):
        lines += [f"SCALARS {name} double 1", "LOOKUP_TABLE default"]
        lines += [f"{v:.17g}" for v in values]
    lines.append("VECTORS A double")
    lines += [f"{x:.17g} {y:.17g} {z:.17g}" for x, y, z in A]
    try:
        path.parent.mkdir(parents=True, exist_ok=True)
        path.write_text("\n".join(lines) + "\n")
    except OSError as exc:
        raise OSError(f"cannot write VTK file {path}: {exc}") from exc
    return path


def line_samples(psi: ScalarField, n: int = 101):
    """Density along the diagonal x1 = x2 = x3 = s, s in [0, 1]."""
    if n < 2:
        raise ValueError("need at least two sample points")
    s = np.linspace(0.0, 1.0, n)
    rho = np.abs(evaluate_at_points(psi, np.column_stack([s, s, s]))) ** 2
    return s, rho


def probe_density(psi: ScalarField, probes=None) -> dict:
    probes = PROBES if probes is None else probes
    pts = np.array(list(probes.values()), dtype=float)
    rho = np.abs(evaluate_at_points(psi, pts)) ** 2
    return dict(zip(probes, rho.tolist()))


class OutputWriter:
    """Stepper observer that emits the configured files."""

    def __init__(self, config):
        self.config = config
        self.diag = CsvAppender(config.csv_path) if config.csv_path else None
        self.samples = None
        self.probes = None
        if config.sample_every > 0 and config.samples_path:
            path = Path(config.samples_path)
            self.samples = CsvAppender(path)
            self.probes = CsvAppender(path.with_name(path.stem + "_probes" + path.suffix))
        self.vtk_files: list[Path] = []

    def __call__(self, sim, state, diag) -> None:
        cfg = self.config
        if self.diag is not None:
            self.diag.write(diag.row())
        need_vtk = cfg.vtk_every > 0 and cfg.vtk_dir and state.k % cfg.vtk_every == 0
        need_samples = self.samples is not None and state.k % cfg.sample_every == 0
        if not (need_vtk or need_samples):
            return
        psi_full, A_full = sim.full_fields(state)
        if need_vtk:
            space = sim.ctx.scalar
            path = Path(cfg.vtk_dir) / f"fields_{state.k:06d}.vtk"
            self.vtk_files.append(write_vtk(path, sim.mesh, vertex_values(space, psi_full),
                                            vertex_values(space, A_full), f"t={state.t:.6f}"))
        if need_samples:
            field = ScalarField(sim.ctx.scalar, psi_full)
            s, rho = line_samples(field, cfg.line_samples)
            for si, ri in zip(s, rho):
                self.samples.write({"t": state.t, "s": si, "rho": ri})
            row = {"t": state.t}
            row.update({f"rho_{k}": v for k, v in probe_density(field).items()})
            self.probes.write(row)

    def close(self) -> None:
        for w in (self.diag, self.samples, self.probes):
            if w is not None:
                w.close()
