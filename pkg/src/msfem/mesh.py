"""Uniform Kuhn tetrahedral partition of the unit cube."""
from __future__ import annotations

import itertools
from dataclasses import dataclass, field

import numpy as np

# Local face l of a tetrahedron is the face opposite local vertex l.
LOCAL_FACES = np.array([[1, 2, 3], [0, 2, 3], [0, 1, 3], [0, 1, 2]])


@dataclass(frozen=True, eq=False)
class Mesh:
    """Conforming tetrahedral mesh of (0,1)^3 with M cubes per axis.

    ``boundary_faces`` rows are ``(cell, local_face)``; the matching row of
    ``boundary_normals`` is the outward unit normal (always +-e_i).
    """

    M: int
    vertices: np.ndarray
    cells: np.ndarray
    grid: np.ndarray
    boundary_faces: np.ndarray
    boundary_normals: np.ndarray
    cell_perm: np.ndarray = field(repr=False)

    @property
    def h(self) -> float:
        return 1.0 / self.M

    @property
    def n_vertices(self) -> int:
        return len(self.vertices)

    @property
    def n_cells(self) -> int:
        return len(self.cells)

    def jacobians(self) -> np.ndarray:
        """Affine map matrices J with x = v0 + J xi, shape (n_cells, 3, 3)."""
        v = self.vertices[self.cells]
        return np.stack([v[:, 1] - v[:, 0], v[:, 2] - v[:, 0], v[:, 3] - v[:, 0]], axis=2)

    def signed_volumes(self) -> np.ndarray:
        return np.linalg.det(self.jacobians()) / 6.0

    def locate(self, points) -> tuple[np.ndarray, np.ndarray]:
        """Find the containing cell and reference coordinates of each point.

        Points on shared faces are assigned to one of the candidate cells;
        the field value there is the same from either side.
        """
        points = np.atleast_2d(np.asarray(points, dtype=float))
        if np.any(points < -1e-12) or np.any(points > 1 + 1e-12):
            raise ValueError("points must lie inside the unit cube")
        M = self.M
        scaled = np.clip(points, 0.0, 1.0) * M
        cube = np.minimum(np.floor(scaled).astype(int), M - 1)
        local = scaled - cube
        # Kuhn simplex sigma contains y with y[sigma0] >= y[sigma1] >= y[sigma2].
        order = np.argsort(-local, axis=1, kind="stable")
        perm_id = np.array([_PERM_INDEX[tuple(o)] for o in order])
        cube_id = (cube[:, 0] * M + cube[:, 1]) * M + cube[:, 2]
        cell = cube_id * 6 + perm_id
        J = self.jacobians()[cell]
        v0 = self.vertices[self.cells[cell, 0]]
        ref = np.linalg.solve(J, (points - v0)[..., None])[..., 0]
        return cell, ref


_PERMS = list(itertools.permutations(range(3)))
_PERM_INDEX = {p: i for i, p in enumerate(_PERMS)}


def _kuhn_offsets() -> np.ndarray:
    """Vertex offsets (6, 4, 3) of the Kuhn tetrahedra of the unit cube."""
    tets = []
    eye = np.eye(3, dtype=int)
    for p in _PERMS:
        v0 = np.zeros(3, dtype=int)
        v1 = v0 + eye[p[0]]
        v2 = v1 + eye[p[1]]
        v3 = v2 + eye[p[2]]
        verts = [v0, v1, v2, v3]
        if np.linalg.det(np.array([v1, v2, v3])) < 0:
            verts[2], verts[3] = verts[3], verts[2]
        tets.append(verts)
    return np.array(tets)


def build_unit_cube_mesh(M: int) -> Mesh:
    """Split each of the M^3 subcubes into the 6 tetrahedra around its main diagonal."""
    if isinstance(M, bool) or int(M) != M or M < 1:
        raise ValueError(f"mesh.M must be a positive integer, got {M!r}")
    M = int(M)
    n = M + 1
    ijk = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"), axis=-1)
    grid = ijk.reshape(-1, 3)
    vertices = grid / M

    cubes = np.stack(np.meshgrid(np.arange(M), np.arange(M), np.arange(M), indexing="ij"), axis=-1)
    cubes = cubes.reshape(-1, 1, 1, 3)
    corners = cubes + _kuhn_offsets()[None]  # (M^3, 6, 4, 3)
    cells = (corners[..., 0] * n + corners[..., 1]) * n + corners[..., 2]
    cells = cells.reshape(-1, 4)
    cell_perm = np.tile(np.arange(6), M**3)

    faces, normals = _boundary_faces(grid[cells], M)
    return Mesh(M, vertices, cells, grid, faces, normals, cell_perm)


def _boundary_faces(cell_grid: np.ndarray, M: int):
    rows, normals = [], []
    for lf, verts in enumerate(LOCAL_FACES):
        fg = cell_grid[:, verts, :]  # (nc, 3, 3)
        for axis in range(3):
            for side, value in ((-1.0, 0), (1.0, M)):
                on = np.all(fg[:, :, axis] == value, axis=1)
                idx = np.nonzero(on)[0]
                if idx.size:
                    rows.append(np.column_stack([idx, np.full(idx.size, lf)]))
                    nvec = np.zeros((idx.size, 3))
                    nvec[:, axis] = side
                    normals.append(nvec)
    order_rows = np.concatenate(rows)
    order = np.lexsort((order_rows[:, 1], order_rows[:, 0]))
    return order_rows[order], np.concatenate(normals)[order]


def boundary_vertex_classification(mesh: Mesh) -> list[frozenset]:
    """Outward face normals (as integer 3-tuples) active at each vertex."""
    result = []
    for g in mesh.grid:
        normals = set()
        for axis in range(3):
            if g[axis] == 0:
                normals.add(tuple(-int(a == axis) for a in range(3)))
            elif g[axis] == mesh.M:
                normals.add(tuple(int(a == axis) for a in range(3)))
        result.append(frozenset(normals))
    return result


def face_incidence(mesh: Mesh) -> dict[tuple[int, int, int], int]:
    """Number of cells sharing each face, keyed by sorted vertex triple."""
    counts: dict[tuple[int, int, int], int] = {}
    faces = np.sort(mesh.cells[:, LOCAL_FACES].reshape(-1, 3), axis=1)
    keys, cnt = np.unique(faces, axis=0, return_counts=True)
    for k, c in zip(map(tuple, keys.tolist()), cnt.tolist()):
        counts[k] = c
    return counts
