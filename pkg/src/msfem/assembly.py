"""Assembly of the integral forms of the Maxwell-Schroedinger scheme.

Conventions: the L2 product is (u, v) = int u conj(v); for the scalar
space, matrix entry K[i, j] = B(A; N_j, N_i), so K @ c represents
B(A; sum c_j N_j, N_i).  With real basis functions,

    B(A; N_j, N_i) = (grad N_j, grad N_i) + (|A|^2 N_j, N_i)
                     + i [ (A . grad N_j, N_i) - (N_j, A . grad N_i) ],

which is Hermitian.  Coefficient fields are evaluated as finite element
functions at quadrature points; all A- or Psi-dependent forms share one
rule so the discrete energy identity holds to rounding.

Every ``assemble_*`` accepts ``reduced``: when true, constrained dofs
(Dirichlet for the scalar space, tangential for the vector space) are
eliminated and the result acts on free dofs only.
"""
from __future__ import annotations

from functools import cached_property

import numpy as np

from .elements import QuadratureRule, quadrature_for
from .linalg import Pattern
from .mesh import Mesh
from .space import ScalarField, ScalarSpace, VectorField, VectorSpace


class CellValues:
    """Basis data for one quadrature rule on every cell."""

    def __init__(self, space: ScalarSpace, rule: QuadratureRule):
        mesh = space.mesh
        J = mesh.jacobians()
        Jinv = np.linalg.inv(J)
        det = np.abs(np.linalg.det(J))
        self.rule = rule
        self.phi = space.element.eval(rule.points)  # (nq, nl)
        dref = space.element.grad(rule.points)  # (nq, nl, 3)
        self.dphi = np.einsum("qlr,crd->cqld", dref, Jinv, optimize=True)  # (nc, nq, nl, 3)
        self.jxw = det[:, None] * rule.weights[None, :]
        v0 = mesh.vertices[mesh.cells[:, 0]]
        self.points = v0[:, None, :] + np.einsum("cdr,qr->cqd", J, rule.points)

    @cached_property
    def dphi_by_node(self) -> np.ndarray:
        """Gradients laid out (nc, nl, nq * 3) for batched products."""
        nc, nq, nl, _ = self.dphi.shape
        return np.ascontiguousarray(self.dphi.transpose(0, 2, 1, 3)).reshape(nc, nl, nq * 3)


class FormContext:
    """Mesh, spaces, quadrature policy and physical constants for assembly.

    Quadrature: degree 2r for constant-coefficient forms, min(4r, 6) for
    forms with discrete-field coefficients, loads and error norms.
    """

    def __init__(self, mesh: Mesh, degree: int, gamma: float = 1.0, V0: float = 0.0):
        if gamma <= 0:
            raise ValueError(f"penalty factor gamma must be positive, got {gamma}")
        self.mesh = mesh
        self.degree = degree
        self.gamma = float(gamma)
        self.V0 = float(V0)
        self.scalar = ScalarSpace(mesh, degree)
        self.vector = VectorSpace(self.scalar)
        self.linear_rule = quadrature_for(2 * degree)
        self.coef_rule = quadrature_for(min(4 * degree, 6))
        self._patterns: dict = {}

    @cached_property
    def linear_values(self) -> CellValues:
        return CellValues(self.scalar, self.linear_rule)

    @cached_property
    def coef_values(self) -> CellValues:
        return CellValues(self.scalar, self.coef_rule)

    def pattern(self, kind: str, reduced: bool) -> Pattern:
        key = (kind, reduced)
        if key not in self._patterns:
            if kind == "scalar":
                sp_ = self.scalar
                self._patterns[key] = Pattern(sp_.cell_dofs, sp_.n_dofs, sp_.free if reduced else None)
            else:
                vs = self.vector
                self._patterns[key] = Pattern(vs.cell_dofs, vs.n_dofs, vs.free if reduced else None)
        return self._patterns[key]

    def block_index(self, reduced: bool) -> np.ndarray:
        """Scatter indices of the three diagonal component blocks, (nc, 3, nl, nl)."""
        p = self.pattern("vector", reduced)
        nl = self.scalar.cell_dofs.shape[1]
        s = p.scatter.reshape(-1, 3, nl, 3, nl)
        return np.stack([s[:, c, :, c, :] for c in range(3)], axis=1)

    # free <-> full coefficient vectors
    def expand_scalar(self, reduced_coeffs) -> np.ndarray:
        out = np.zeros(self.scalar.n_dofs, dtype=complex)
        out[self.scalar.free] = reduced_coeffs
        return out

    def expand_vector(self, reduced_coeffs) -> np.ndarray:
        out = np.zeros(self.vector.n_dofs)
        out[self.vector.free] = reduced_coeffs
        return out


def _full(ctx: FormContext, x, kind: str) -> np.ndarray:
    if isinstance(x, (ScalarField, VectorField)):
        return x.coeffs
    x = np.asarray(x)
    space = ctx.scalar if kind == "scalar" else ctx.vector
    if len(x) == space.n_dofs:
        return x
    if len(x) == len(space.free):
        return ctx.expand_scalar(x) if kind == "scalar" else ctx.expand_vector(x)
    raise ValueError(f"coefficient vector of length {len(x)} does not match the {kind} space")


def scalar_at_qp(ctx: FormContext, psi, cv: CellValues | None = None):
    """Values (nc, nq) and gradients (nc, nq, 3) of a scalar field."""
    cv = cv or ctx.coef_values
    local = _full(ctx, psi, "scalar")[ctx.scalar.cell_dofs]  # (nc, nl)
    val = local @ cv.phi.T
    grad = np.matmul(local[:, None, :], cv.dphi_by_node).reshape(val.shape + (3,))
    return val, grad


def vector_at_qp(ctx: FormContext, A, cv: CellValues | None = None, jacobian: bool = True):
    """Values (nc, nq, 3) and Jacobians G[..., c, d] = dA_c/dx_d of a vector field."""
    cv = cv or ctx.coef_values
    coeffs = _full(ctx, A, "vector").reshape(3, -1)
    local = coeffs[:, ctx.scalar.cell_dofs].transpose(1, 0, 2)  # (nc, 3, nl)
    val = np.matmul(local, cv.phi.T).transpose(0, 2, 1)
    if not jacobian:
        return val, None
    nc, nq = cv.jxw.shape
    jac = np.matmul(local, cv.dphi_by_node).reshape(nc, 3, nq, 3).transpose(0, 2, 1, 3)
    return val, jac


def _weighted_mass_local(cv: CellValues, weight=None) -> np.ndarray:
    w = cv.jxw if weight is None else cv.jxw * weight
    X = w[:, :, None] * cv.phi[None]
    return np.matmul(X.transpose(0, 2, 1), cv.phi)


def assemble_scalar_mass(ctx: FormContext, reduced: bool = False):
    return ctx.pattern("scalar", reduced).assemble(_weighted_mass_local(ctx.linear_values))


def assemble_stiffness(ctx: FormContext, reduced: bool = False):
    cv = ctx.linear_values
    X = cv.jxw[:, :, None, None] * cv.dphi
    local = np.einsum("cqid,cqjd->cij", X, cv.dphi, optimize=True)
    return ctx.pattern("scalar", reduced).assemble(local)


def assemble_weighted_mass(ctx: FormContext, weight, reduced: bool = False):
    """(w N_j, N_i) for a weight given at the coefficient-rule quadrature points."""
    return ctx.pattern("scalar", reduced).assemble(_weighted_mass_local(ctx.coef_values, weight))


def _block_diagonal(ctx: FormContext, local_scalar: np.ndarray, reduced: bool):
    p = ctx.pattern("vector", reduced)
    blocks = np.broadcast_to(local_scalar[:, None], (local_scalar.shape[0], 3) + local_scalar.shape[1:])
    return p.assemble(blocks, ctx.block_index(reduced))


def assemble_vector_mass(ctx: FormContext, reduced: bool = False):
    return _block_diagonal(ctx, _weighted_mass_local(ctx.linear_values), reduced)


def assemble_div_curl(ctx: FormContext, reduced: bool = False):
    """The two pieces (div A, div v) and (curl A, curl v) of the magnetic form."""
    cv = ctx.linear_values
    nc, nq, nl, _ = cv.dphi.shape
    X = cv.jxw[:, :, None, None] * cv.dphi
    # G[c, a, b, i, j] = int d_a N_i d_b N_j
    G = np.einsum("cqia,cqjb->cabij", X, cv.dphi, optimize=True)
    S = np.einsum("caaij->cij", G)
    div = G.transpose(0, 1, 3, 2, 4)
    # curl(N_i e_a) . curl(N_j e_b) = delta_ab grad N_i . grad N_j - d_b N_i d_a N_j
    curl = -G.transpose(0, 2, 3, 1, 4).copy()
    for a in range(3):
        curl[:, a, :, a, :] += S
    p = ctx.pattern("vector", reduced)
    shape = (nc, 3 * nl, 3 * nl)
    return p.assemble(div.reshape(shape)), p.assemble(curl.reshape(shape))


def assemble_D(ctx: FormContext, reduced: bool = False):
    """D(A, v) = gamma (div A, div v) + (curl A, curl v)."""
    div, curl = assemble_div_curl(ctx, reduced)
    return ctx.pattern("vector", reduced).matrix(ctx.gamma * div.data + curl.data)


def coupling_local(ctx: FormContext, A, Aq=None) -> np.ndarray:
    """C[c, i, j] = int (A . grad N_j) N_i on each cell."""
    cv = ctx.coef_values
    if Aq is None:
        Aq, _ = vector_at_qp(ctx, A, cv, jacobian=False)
    adg = np.matmul(cv.dphi, Aq[..., None])[..., 0]
    X = cv.jxw[:, :, None] * cv.phi[None]
    return np.matmul(X.transpose(0, 2, 1), adg)


def assemble_coupling(ctx: FormContext, A, reduced: bool = False):
    """Real antisymmetric matrix C - C^T; B gets i times it."""
    C = coupling_local(ctx, A)
    return ctx.pattern("scalar", reduced).assemble(C - C.transpose(0, 2, 1))


def assemble_B(ctx: FormContext, A, reduced: bool = False, stiffness=None):
    """Matrix of the covariant form B(A; ., .) (Hermitian)."""
    cv = ctx.coef_values
    Aq, _ = vector_at_qp(ctx, A, cv, jacobian=False)
    W = _weighted_mass_local(cv, np.einsum("cqd,cqd->cq", Aq, Aq))
    C = coupling_local(ctx, A, Aq)
    p = ctx.pattern("scalar", reduced)
    S = assemble_stiffness(ctx, reduced) if stiffness is None else stiffness
    data = S.data + p.scatter_data(W + 1j * (C - C.transpose(0, 2, 1)))
    return p.matrix(data)


def current_density(ctx: FormContext, psi):
    """f(Psi, Psi) = (i/2)(Psi* grad Psi - Psi grad Psi*) = -Im(Psi* grad Psi) at quadrature points."""
    val, grad = scalar_at_qp(ctx, psi)
    return -np.imag(np.conj(val)[..., None] * grad)


def assemble_current(ctx: FormContext, psi, reduced: bool = False) -> np.ndarray:
    """Load vector (f(Psi, Psi), v) on the vector space."""
    cv = ctx.coef_values
    J = current_density(ctx, psi)  # (nc, nq, 3)
    local = np.einsum("cq,cqa,qi->cai", cv.jxw, J, cv.phi, optimize=True)
    return ctx.pattern("vector", reduced).scatter_vector(local.reshape(local.shape[0], -1))


def assemble_density_mass(ctx: FormContext, psi, reduced: bool = False):
    """(|Psi|^2 A, v) as a matrix acting on A."""
    val, _ = scalar_at_qp(ctx, psi)
    return _block_diagonal(ctx, _weighted_mass_local(ctx.coef_values, np.abs(val) ** 2), reduced)


def assemble_load_vector(ctx: FormContext, g, t: float = 0.0, kind: str = "vector", reduced: bool = False):
    """(g(., t), v) for a pointwise source ``g(points, t)``.

    ``points`` is an (n, 3) array; a vector source returns (n, 3), a scalar
    source returns (n,) and may be complex.
    """
    cv = ctx.coef_values
    nc, nq, _ = cv.points.shape
    vals = np.asarray(g(cv.points.reshape(-1, 3), t))
    if kind == "vector":
        vals = np.broadcast_to(vals, (nc * nq, 3)).reshape(nc, nq, 3)
        local = np.einsum("cq,cqa,qi->cai", cv.jxw, vals, cv.phi, optimize=True)
        return ctx.pattern("vector", reduced).scatter_vector(local.reshape(nc, -1))
    vals = np.broadcast_to(vals, (nc * nq,)).reshape(nc, nq)
    local = np.einsum("cq,cq,qi->ci", cv.jxw, vals, cv.phi, optimize=True)
    return ctx.pattern("scalar", reduced).scatter_vector(local)


def assemble_div_load(ctx: FormContext, s_q: np.ndarray, reduced: bool = False) -> np.ndarray:
    """(s, div v) for s given at the coefficient-rule quadrature points."""
    cv = ctx.coef_values
    local = np.einsum("cq,cqia->cai", cv.jxw * s_q, cv.dphi, optimize=True)
    return ctx.pattern("vector", reduced).scatter_vector(local.reshape(local.shape[0], -1))
