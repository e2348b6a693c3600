import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from msfem.mesh import LOCAL_FACES, boundary_vertex_classification, build_unit_cube_mesh, face_incidence


@pytest.mark.parametrize("M", [1, 2, 3])
def test_counts(M):
    mesh = build_unit_cube_mesh(M)
    assert mesh.n_vertices == (M + 1) ** 3
    assert mesh.n_cells == 6 * M**3
    assert len(mesh.boundary_faces) == 12 * M**2
    assert mesh.h == pytest.approx(1.0 / M)


def test_single_cube():
    mesh = build_unit_cube_mesh(1)
    assert mesh.n_vertices == 8 and mesh.n_cells == 6
    # every Kuhn tetrahedron contains the main diagonal
    for cell in mesh.cells:
        assert 0 in cell and 7 in cell


@settings(max_examples=6, deadline=None)
@given(M=st.integers(1, 6))
def test_volumes_positive_and_sum_to_one(M):
    vol = build_unit_cube_mesh(M).signed_volumes()
    assert np.all(vol > 0)
    assert np.allclose(vol, 1.0 / (6 * M**3), rtol=1e-12)
    assert vol.sum() == pytest.approx(1.0, abs=1e-12)


@pytest.mark.parametrize("M", [1, 2, 4])
def test_conforming_faces(M):
    mesh = build_unit_cube_mesh(M)
    counts = face_incidence(mesh)
    assert set(counts.values()) <= {1, 2}
    boundary = {k for k, c in counts.items() if c == 1}
    assert len(boundary) == 12 * M**2
    # boundary face table matches the incidence count and lies on the reported plane
    listed = set()
    for (cell, lf), normal in zip(mesh.boundary_faces, mesh.boundary_normals):
        verts = mesh.cells[cell, LOCAL_FACES[lf]]
        listed.add(tuple(sorted(verts.tolist())))
        axis = int(np.argmax(np.abs(normal)))
        coords = mesh.vertices[verts, axis]
        assert np.all(coords == (1.0 if normal[axis] > 0 else 0.0))
        # outward: the opposite vertex is on the inner side
        opposite = mesh.vertices[mesh.cells[cell, lf]]
        assert (opposite[axis] - coords[0]) * normal[axis] < 0
    assert listed == boundary


def test_lexicographic_vertex_order():
    M = 3
    mesh = build_unit_cube_mesh(M)
    for idx in [0, 5, 17, 63]:
        i, j, k = mesh.grid[idx]
        assert idx == (i * (M + 1) + j) * (M + 1) + k
        assert np.allclose(mesh.vertices[idx], np.array([i, j, k]) / M)


def test_boundary_classification():
    M = 3
    cls = boundary_vertex_classification(build_unit_cube_mesh(M))
    sizes = np.bincount([len(c) for c in cls], minlength=4)
    assert sizes.tolist() == [(M - 1) ** 3, 6 * (M - 1) ** 2, 12 * (M - 1), 8]
    assert cls[0] == frozenset({(-1, 0, 0), (0, -1, 0), (0, 0, -1)})


@settings(max_examples=20, deadline=None)
@given(pts=st.lists(st.tuples(*[st.floats(0.0, 1.0)] * 3), min_size=1, max_size=20))
def test_locate_roundtrip(pts):
    mesh = build_unit_cube_mesh(3)
    pts = np.array(pts)
    cells, ref = mesh.locate(pts)
    bary = np.column_stack([1 - ref.sum(axis=1), ref])
    assert np.all(bary > -1e-9)
    J = mesh.jacobians()[cells]
    back = mesh.vertices[mesh.cells[cells, 0]] + np.einsum("pij,pj->pi", J, ref)
    assert np.allclose(back, pts, atol=1e-12)


@pytest.mark.parametrize("bad", [0, -1, 2.5, True])
def test_invalid_resolution(bad):
    with pytest.raises(ValueError):
        build_unit_cube_mesh(bad)


def test_locate_rejects_outside():
    with pytest.raises(ValueError):
        build_unit_cube_mesh(2).locate([[1.5, 0.2, 0.2]])
