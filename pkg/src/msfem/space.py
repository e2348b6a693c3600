"""Global dof maps for the complex scalar space and the real vector space.

Dofs live on the lattice of Lagrange nodes, (M*r + 1)^3 points numbered
lexicographically; for r = 2 every edge midpoint of the Kuhn mesh lands on
the refined lattice, so the numbering needs no edge bookkeeping.
Vector dofs are blocked by component: dof = component * n_nodes + node.
"""
from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .elements import EDGES, ReferenceElement
from .mesh import Mesh


class ScalarSpace:
    def __init__(self, mesh: Mesh, degree: int):
        self.mesh = mesh
        self.element = ReferenceElement(degree)
        self.degree = degree
        r = degree
        self.n_lattice = mesh.M * r + 1
        cell_lat = mesh.grid[mesh.cells] * r  # (nc, 4, 3)
        if r == 2:
            mids = np.stack([(cell_lat[:, a] + cell_lat[:, b]) // 2 for a, b in EDGES], axis=1)
            cell_lat = np.concatenate([cell_lat, mids], axis=1)
        self.cell_dofs = self._index(cell_lat)
        n = self.n_lattice
        lat = np.stack(np.meshgrid(np.arange(n), np.arange(n), np.arange(n), indexing="ij"), axis=-1)
        self.lattice = lat.reshape(-1, 3)
        self.nodes = self.lattice / (n - 1)
        self.dirichlet = np.any((self.lattice == 0) | (self.lattice == n - 1), axis=1)
        self.free = np.nonzero(~self.dirichlet)[0]
        self.vertex_dofs = self._index(mesh.grid * r)

    def _index(self, lat):
        n = self.n_lattice
        return (lat[..., 0] * n + lat[..., 1]) * n + lat[..., 2]

    @property
    def n_dofs(self) -> int:
        return self.n_lattice**3

    @property
    def dirichlet_dofs(self) -> np.ndarray:
        return np.nonzero(self.dirichlet)[0]

    def node_normals(self) -> np.ndarray:
        """Boolean (n_dofs, 3): node lies on a face x_i = 0 or 1."""
        n = self.n_lattice
        return (self.lattice == 0) | (self.lattice == n - 1)


class VectorSpace:
    """(Y_h^r)^3 with the tangential trace A x n = 0 imposed nodewise."""

    def __init__(self, scalar: ScalarSpace):
        self.scalar = scalar
        self.mesh = scalar.mesh
        self.degree = scalar.degree
        self.n_nodes = scalar.n_dofs
        on_face = scalar.node_normals()
        # A face x_i node keeps only component i; the union over faces applies
        # at edges and corners, which therefore lose every component.
        zeroed = np.zeros((self.n_nodes, 3), dtype=bool)
        for i in range(3):
            for j in range(3):
                if i != j:
                    zeroed[:, j] |= on_face[:, i]
        self.constrained = zeroed.T.reshape(-1)
        self.free = np.nonzero(~self.constrained)[0]
        nc = len(scalar.cell_dofs)
        self.cell_dofs = (scalar.cell_dofs[:, None, :] + self.n_nodes * np.arange(3)[None, :, None]).reshape(nc, -1)

    @property
    def n_dofs(self) -> int:
        return 3 * self.n_nodes

    def constrained_components(self) -> dict[int, set[int]]:
        z = self.constrained.reshape(3, -1)
        return {int(n): {int(c) for c in np.nonzero(z[:, n])[0]} for n in np.nonzero(z.any(axis=0))[0]}


@dataclass
class ScalarField:
    space: ScalarSpace
    coeffs: np.ndarray


@dataclass
class VectorField:
    space: VectorSpace
    coeffs: np.ndarray

    def nodal(self) -> np.ndarray:
        """Per-node vectors, shape (n_nodes, 3)."""
        return self.coeffs.reshape(3, -1).T


def interpolate_scalar(space: ScalarSpace, f, homogeneous: bool = True) -> ScalarField:
    """Nodal interpolant; ``f`` maps an (n, 3) array of points to n values."""
    values = np.asarray(f(space.nodes), dtype=complex)
    values = np.broadcast_to(values, (space.n_dofs,)).copy()
    if homogeneous:
        values[space.dirichlet] = 0.0
    return ScalarField(space, values)


def interpolate_vector(space: VectorSpace, g, constrained: bool = True) -> VectorField:
    """Nodal interpolant of ``g``: (n, 3) points -> (n, 3) vectors."""
    values = np.asarray(g(space.scalar.nodes), dtype=float)
    values = np.broadcast_to(values, (space.n_nodes, 3))
    coeffs = values.T.reshape(-1).copy()
    if constrained:
        coeffs[space.constrained] = 0.0
    return VectorField(space, coeffs)


def _cell_inverse_jacobian(mesh: Mesh, cell: int) -> np.ndarray:
    v = mesh.vertices[mesh.cells[cell]]
    J = np.column_stack([v[1] - v[0], v[2] - v[0], v[3] - v[0]])
    return np.linalg.inv(J)


def evaluate_field(field, cell: int, ref_point, gradient: bool = False):
    """Value (and optionally gradient / Jacobian) of a field at a reference point.

    For a vector field the value has shape (3,) and the gradient is the
    matrix G[c, d] = d A_c / d x_d.
    """
    if isinstance(field, VectorField):
        scalar = field.space.scalar
        coeffs = field.coeffs.reshape(3, -1)
    else:
        scalar = field.space
        coeffs = field.coeffs[None, :]
    dofs = scalar.cell_dofs[cell]
    p = np.reshape(ref_point, (1, 3))
    phi = scalar.element.eval(p)[0]
    local = coeffs[:, dofs]
    value = local @ phi
    if isinstance(field, ScalarField):
        value = value[0]
    if not gradient:
        return value
    dphi = scalar.element.grad(p)[0] @ _cell_inverse_jacobian(scalar.mesh, cell)
    grad = local @ dphi
    if isinstance(field, ScalarField):
        grad = grad[0]
    return value, grad


def evaluate_at_points(field, points) -> np.ndarray:
    """Evaluate a field at physical points (located through the mesh)."""
    scalar = field.space.scalar if isinstance(field, VectorField) else field.space
    cells, ref = scalar.mesh.locate(points)
    phi = scalar.element.eval(ref)  # (np, nloc)
    if isinstance(field, VectorField):
        coeffs = field.coeffs.reshape(3, -1)
        local = coeffs[:, scalar.cell_dofs[cells]]  # (3, np, nloc)
        return np.einsum("cpl,pl->pc", local, phi)
    return np.einsum("pl,pl->p", field.coeffs[scalar.cell_dofs[cells]], phi)
