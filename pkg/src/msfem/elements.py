"""Lagrange P1/P2 bases on the reference tetrahedron and quadrature rules.

Reference tetrahedron: vertices (0,0,0), (1,0,0), (0,1,0), (0,0,1), with
barycentric coordinates l0 = 1 - x - y - z, l1 = x, l2 = y, l3 = z.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import lru_cache

import numpy as np

REF_VERTICES = np.array([[0.0, 0.0, 0.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
EDGES = ((0, 1), (0, 2), (0, 3), (1, 2), (1, 3), (2, 3))

# d(l_i)/d(x,y,z)
_BARY_GRAD = np.array([[-1.0, -1.0, -1.0], [1.0, 0.0, 0.0], [0.0, 1.0, 0.0], [0.0, 0.0, 1.0]])


def barycentric(points: np.ndarray) -> np.ndarray:
    points = np.atleast_2d(points)
    return np.column_stack([1.0 - points.sum(axis=1), points])


@dataclass(frozen=True)
class ReferenceElement:
    degree: int

    def __post_init__(self):
        if self.degree not in (1, 2):
            raise ValueError(f"unsupported element degree {self.degree}; supported degrees are 1 and 2")

    @property
    def n_nodes(self) -> int:
        return 4 if self.degree == 1 else 10

    @property
    def nodes(self) -> np.ndarray:
        if self.degree == 1:
            return REF_VERTICES.copy()
        mids = [(REF_VERTICES[a] + REF_VERTICES[b]) / 2 for a, b in EDGES]
        return np.vstack([REF_VERTICES, mids])

    def eval(self, points) -> np.ndarray:
        """Basis values, shape (n_points, n_nodes)."""
        lam = barycentric(np.asarray(points, dtype=float))
        if self.degree == 1:
            return lam
        vert = lam * (2.0 * lam - 1.0)
        edge = np.column_stack([4.0 * lam[:, a] * lam[:, b] for a, b in EDGES])
        return np.hstack([vert, edge])

    def grad(self, points) -> np.ndarray:
        """Reference gradients, shape (n_points, n_nodes, 3)."""
        lam = barycentric(np.asarray(points, dtype=float))
        npts = lam.shape[0]
        if self.degree == 1:
            return np.broadcast_to(_BARY_GRAD, (npts, 4, 3)).copy()
        out = np.empty((npts, 10, 3))
        for i in range(4):
            out[:, i, :] = (4.0 * lam[:, i] - 1.0)[:, None] * _BARY_GRAD[i]
        for e, (a, b) in enumerate(EDGES):
            out[:, 4 + e, :] = 4.0 * (lam[:, a, None] * _BARY_GRAD[b] + lam[:, b, None] * _BARY_GRAD[a])
        return out


def eval_basis(elem: ReferenceElement, p) -> np.ndarray:
    return elem.eval(np.reshape(p, (1, 3)))[0]


def eval_basis_grad(elem: ReferenceElement, p) -> np.ndarray:
    return elem.grad(np.reshape(p, (1, 3)))[0]


@dataclass(frozen=True)
class QuadratureRule:
    points: np.ndarray
    weights: np.ndarray
    degree: int

    def __len__(self):
        return len(self.weights)


def _orbit(*bary) -> np.ndarray:
    """All distinct permutations of a barycentric 4-tuple, as reference xyz."""
    perms = sorted(set(itertools.permutations(bary)))
    return np.array([p[1:] for p in perms])


def _rule(orbits, degree) -> QuadratureRule:
    pts, wts = [], []
    for bary, w in orbits:
        o = _orbit(*bary)
        pts.append(o)
        wts.append(np.full(len(o), w / 6.0))
    return QuadratureRule(np.vstack(pts), np.concatenate(wts), degree)


# Symmetric rules with positive weights (Keast 1986; weights for unit volume).
def _keast_orbits(degree):
    if degree <= 1:
        return [((0.25, 0.25, 0.25, 0.25), 1.0)], 1
    if degree == 2:
        a = 0.1381966011250105151795413165634361
        return [((1 - 3 * a, a, a, a), 0.25)], 2
    if degree <= 4:
        a, b = 0.1005267652252045, 0.3143728734931922
        return [
            ((0.5, 0.5, 0.0, 0.0), 0.0190476190476190),
            ((1 - 3 * a, a, a, a), 0.0885898247429807),
            ((1 - 3 * b, b, b, b), 0.1328387466855907),
        ], 4
    if degree == 5:
        a, c = 1.0 / 11.0, 0.0665501535736643
        return [
            ((0.25, 0.25, 0.25, 0.25), 0.1817020685825351),
            ((0.0, 1 / 3, 1 / 3, 1 / 3), 0.0361607142857143),
            ((1 - 3 * a, a, a, a), 0.0698714945161738),
            ((0.5 - c, 0.5 - c, c, c), 0.0656948493683187),
        ], 5
    if degree == 6:
        a, b, c = 0.2146028712591517, 0.0406739585346113, 0.3223378901422757
        d, e = 0.0636610018750175, 0.2696723314583159
        return [
            ((1 - 3 * a, a, a, a), 0.0399227502581679),
            ((1 - 3 * b, b, b, b), 0.0100772110553207),
            ((1 - 3 * c, c, c, c), 0.0553571815436544),
            ((1 - 2 * d - e, d, d, e), 0.0482142857142857),
        ], 6
    raise ValueError(f"no quadrature rule for degree {degree}; supported degrees are 0..6")


def _monomial_exponents(degree):
    return [(a, b, c) for a in range(degree + 1) for b in range(degree + 1 - a)
            for c in range(degree + 1 - a - b)]


def monomial_integral(a: int, b: int, c: int) -> float:
    """Exact integral of x^a y^b z^c over the reference tetrahedron."""
    from math import factorial

    return factorial(a) * factorial(b) * factorial(c) / factorial(a + b + c + 3)


@lru_cache(maxsize=None)
def quadrature_for(degree: int) -> QuadratureRule:
    """Rule exact for polynomials of total degree <= ``degree`` (at most 6)."""
    if degree < 0 or degree > 6:
        raise ValueError(f"no quadrature rule for degree {degree}; supported degrees are 0..6")
    orbits, exact = _keast_orbits(degree)
    rule = _rule(orbits, exact)
    # Tabulated weights carry ~15 digits; re-fit them to the moment equations so
    # every rule is exact to rounding.
    exps = _monomial_exponents(exact)
    V = np.array([[x**a * y**b * z**c for x, y, z in rule.points] for a, b, c in exps])
    rhs = np.array([monomial_integral(*e) for e in exps])
    w, *_ = np.linalg.lstsq(V, rhs, rcond=None)
    if np.max(np.abs(w - rule.weights)) > 1e-12 or np.any(w <= 0):
        raise RuntimeError(f"tabulated degree-{exact} rule is inconsistent")
    return QuadratureRule(rule.points, w, exact)


def gauss_jacobi_rule(n: int) -> QuadratureRule:
    """Collapsed (conical product) rule with n^3 points, exact to degree 2n-1."""
    from scipy.special import roots_jacobi

    x0, w0 = roots_jacobi(n, 2.0, 0.0)
    x1, w1 = roots_jacobi(n, 1.0, 0.0)
    x2, w2 = np.polynomial.legendre.leggauss(n)
    a, b, c = (x0 + 1) / 2, (x1 + 1) / 2, (x2 + 1) / 2
    wa, wb, wc = w0 / 8, w1 / 4, w2 / 2
    A, B, C = np.meshgrid(a, b, c, indexing="ij")
    WA, WB, WC = np.meshgrid(wa, wb, wc, indexing="ij")
    x = A
    y = (1 - A) * B
    z = (1 - A) * (1 - B) * C
    pts = np.column_stack([x.ravel(), y.ravel(), z.ravel()])
    return QuadratureRule(pts, (WA * WB * WC).ravel(), 2 * n - 1)
