import numpy as np
import pytest

from msfem.cli import EXIT_CHECK, EXIT_CONFIG, EXIT_GATE, EXIT_OK, main
from msfem.config import preset
from msfem.io import PROBES, line_samples, probe_density, vertex_values, write_csv, write_vtk
from msfem.mesh import build_unit_cube_mesh
from msfem.problems import example51
from msfem.space import ScalarField, ScalarSpace, interpolate_scalar


def read_vtk(path):
    """Minimal legacy-VTK ASCII reader, independent of the writer."""
    tokens = open(path).read().split("\n")
    assert tokens[0] == "# vtk DataFile Version 3.0"
    assert tokens[2] == "ASCII" and tokens[3] == "DATASET UNSTRUCTURED_GRID"
    words = " ".join(tokens[4:]).split()
    out, i = {"scalars": {}}, 0
    while i < len(words):
        key = words[i]
        if key == "POINTS":
            n = int(words[i + 1])
            out["points"] = np.array(words[i + 3:i + 3 + 3 * n], float).reshape(n, 3)
            i += 3 + 3 * n
        elif key == "CELLS":
            n, size = int(words[i + 1]), int(words[i + 2])
            raw = np.array(words[i + 3:i + 3 + size], int).reshape(n, 5)
            assert np.all(raw[:, 0] == 4)
            out["cells"] = raw[:, 1:]
            i += 3 + size
        elif key == "CELL_TYPES":
            n = int(words[i + 1])
            out["types"] = np.array(words[i + 2:i + 2 + n], int)
            i += 2 + n
        elif key == "POINT_DATA":
            npts = int(words[i + 1])
            i += 2
        elif key == "SCALARS":
            name = words[i + 1]
            assert words[i + 4:i + 6] == ["LOOKUP_TABLE", "default"]
            out["scalars"][name] = np.array(words[i + 6:i + 6 + npts], float)
            i += 6 + npts
        elif key == "VECTORS":
            out["vectors"] = np.array(words[i + 3:i + 3 + 3 * npts], float).reshape(npts, 3)
            i += 3 + 3 * npts
        else:
            raise AssertionError(f"unexpected token {key}")
    return out


def test_vtk_zero_fields_on_single_cube(tmp_path):
    mesh = build_unit_cube_mesh(1)
    path = write_vtk(tmp_path / "z.vtk", mesh, np.zeros(8, complex), np.zeros((8, 3)))
    data = read_vtk(path)
    assert data["points"].shape == (8, 3) and data["cells"].shape == (6, 4)
    assert np.all(data["types"] == 10)
    assert set(data["scalars"]) == {"rho", "re_psi", "im_psi"}
    assert np.all(data["scalars"]["rho"] == 0) and not data["vectors"].any()


def test_vtk_values_round_trip(tmp_path):
    mesh = build_unit_cube_mesh(2)
    rng = np.random.default_rng(0)
    psi = rng.standard_normal(27) + 1j * rng.standard_normal(27)
    A = rng.standard_normal((27, 3))
    data = read_vtk(write_vtk(tmp_path / "r.vtk", mesh, psi, A))
    assert np.array_equal(data["points"], mesh.vertices)
    assert np.array_equal(data["cells"], mesh.cells)
    assert np.all(data["scalars"]["rho"] >= 0)
    assert np.allclose(data["scalars"]["rho"], np.abs(psi) ** 2, rtol=1e-15)
    assert np.array_equal(data["scalars"]["re_psi"], psi.real)
    assert np.array_equal(data["vectors"], A)


def test_vtk_rejects_bad_shapes_and_paths(tmp_path):
    mesh = build_unit_cube_mesh(1)
    with pytest.raises(ValueError):
        write_vtk(tmp_path / "x.vtk", mesh, np.zeros(7), np.zeros((8, 3)))
    blocker = tmp_path / "file"
    blocker.write_text("")
    with pytest.raises(OSError, match="file"):
        write_vtk(blocker / "x.vtk", mesh, np.zeros(8), np.zeros((8, 3)))


def test_line_samples_of_zero_field():
    sp = ScalarSpace(build_unit_cube_mesh(2), 2)
    s, rho = line_samples(ScalarField(sp, np.zeros(sp.n_dofs, complex)), 11)
    assert s[0] == 0 and s[-1] == 1 and len(s) == 11
    assert not rho.any()
    with pytest.raises(ValueError):
        line_samples(ScalarField(sp, np.zeros(sp.n_dofs)), 1)


def test_initial_density_at_center_and_probes():
    sp = ScalarSpace(build_unit_cube_mesh(4), 1)
    field = interpolate_scalar(sp, example51().psi0)
    rho = probe_density(field, {"c": (0.5, 0.5, 0.5)})
    assert rho["c"] == pytest.approx(8.0, rel=1e-12)
    assert set(probe_density(field)) == set(PROBES)
    assert PROBES["x1"] == (0.25, 0.5, 0.75)


def test_vertex_values_pick_vertex_dofs():
    mesh = build_unit_cube_mesh(2)
    sp = ScalarSpace(mesh, 2)
    field = interpolate_scalar(sp, lambda x: x[:, 0] + 2 * x[:, 1], homogeneous=False)
    assert np.allclose(vertex_values(sp, field.coeffs), mesh.vertices[:, 0] + 2 * mesh.vertices[:, 1])


def test_csv_uses_seventeen_digits(tmp_path):
    path = write_csv(tmp_path / "a.csv", [{"k": 1, "x": 1 / 3, "ok": True}])
    header, row = path.read_text().splitlines()
    assert header == "k,x,ok"
    assert row == "1,3.3333333333333331e-01,1"


def _run(args, capsys):
    code = main(args)
    return code, capsys.readouterr()


def test_cli_run_with_mass_check(tmp_path, capsys):
    out = tmp_path / "o"
    code, cap = _run(["run", "--preset", "example51", "--set", "mesh.M=3", "--set", "time.T=0.01",
                      "--set", "output.vtk_every=2", "--set", "output.sample_every=2",
                      "--check", "mass", "--out", str(out)], capsys)
    assert code == EXIT_OK
    assert "time.dt = 0.0025" in cap.out and "effective dt" in cap.out
    assert len(list((out / "vtk").glob("fields_*.vtk"))) == 3
    samples = (out / "line_samples.csv").read_text().splitlines()
    assert samples[0] == "t,s,rho" and len(samples) == 1 + 3 * 101
    probes = (out / "line_samples_probes.csv").read_text().splitlines()
    assert probes[0] == "t,rho_x1,rho_x2,rho_x3"
    assert (out / "diagnostics.csv").read_text().count("\n") == 1 + 5
    assert preset("example51", M=3, T=0.01).replace(
        csv_path=str(out / "diagnostics.csv"), vtk_dir=str(out / "vtk"), vtk_every=2, sample_every=2,
        samples_path=str(out / "line_samples.csv")).to_text() == (out / "config.txt").read_text()


def test_cli_outputs_are_deterministic(tmp_path, capsys):
    texts = []
    for name in ("a", "b"):
        code, _ = _run(["run", "--preset", "example51", "--set", "mesh.M=3", "--set", "time.T=0.01",
                        "--set", f"output.csv_path={tmp_path / name}.csv"], capsys)
        assert code == EXIT_OK
        texts.append((tmp_path / f"{name}.csv").read_bytes())
    assert texts[0] == texts[1]


def test_cli_failed_check_exit_code(capsys):
    # example53 is driven by a current source, so energy is not conserved
    code, cap = _run(["run", "--preset", "example53", "--set", "mesh.M=2", "--set", "time.T=0.01",
                      "--check", "energy"], capsys)
    assert code == EXIT_CHECK and "energy" in cap.err


@pytest.mark.parametrize("args", [["run", "--preset", "example51", "--set", "fe.degree=3"],
                                  ["run", "--preset", "example51", "--set", "bogus.key=1"],
                                  ["converge", "--grid", "4"]])
def test_cli_config_errors(args, capsys):
    code, cap = _run(args, capsys)
    assert code == EXIT_CONFIG and cap.err


def test_cli_converge_and_gate(tmp_path, capsys, monkeypatch):
    code, cap = _run(["converge", "--degree", "1", "--grid", "2,3", "--T", "0.25",
                      "--csv", str(tmp_path / "c.csv")], capsys)
    assert code == EXIT_OK
    lines = (tmp_path / "c.csv").read_text().splitlines()
    assert lines[0].startswith("M,h,dt,t,") and "eoc_errPsi_H1" in lines[0] and len(lines) == 3

    import msfem.mms as mms

    def broken(*a, **k):
        raise mms.SourceGateError("forced")
    monkeypatch.setattr(mms, "check_sources", broken)
    code, cap = _run(["converge", "--grid", "2,3", "--T", "0.25"], capsys)
    assert code == EXIT_GATE


def test_preset_list(capsys):
    code, cap = _run(["preset-list"], capsys)
    assert code == EXIT_OK
    assert "example51: problem=example51" in cap.out and "time.dt=0.0025" in cap.out
