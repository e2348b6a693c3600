"""Manufactured solutions, error norms and empirical convergence orders."""
from __future__ import annotations

import math
from dataclasses import asdict, dataclass, field
from typing import Callable

import numpy as np

PI = math.pi


@dataclass(frozen=True)
class SeparableTerm:
    """c(t) * u0(x1) * u1(x2) * u2(x3) with hand-coded derivatives.

    ``time`` returns (c, c', c''); each spatial factor returns (u, u', u'').
    """

    time: Callable[[float], tuple]
    factors: tuple

    def _parts(self, x):
        return [f(x[:, d]) for d, f in enumerate(self.factors)]

    def value(self, x, t):
        (u0, _, _), (u1, _, _), (u2, _, _) = self._parts(x)
        return self.time(t)[0] * u0 * u1 * u2

    def dt(self, x, t, order: int = 1):
        (u0, _, _), (u1, _, _), (u2, _, _) = self._parts(x)
        return self.time(t)[order] * u0 * u1 * u2

    def grad(self, x, t):
        p = self._parts(x)
        c = self.time(t)[0]
        return c * np.column_stack([
            p[0][1] * p[1][0] * p[2][0],
            p[0][0] * p[1][1] * p[2][0],
            p[0][0] * p[1][0] * p[2][1],
        ])

    def hessian(self, x, t):
        p = self._parts(x)
        c = self.time(t)[0]
        H = np.empty((len(x), 3, 3), dtype=np.result_type(c, float))
        for d in range(3):
            for e in range(3):
                orders = [0, 0, 0]
                if d == e:
                    orders[d] = 2
                else:
                    orders[d] = orders[e] = 1
                H[:, d, e] = c * p[0][orders[0]] * p[1][orders[1]] * p[2][orders[2]]
        return H


def _sin(k):
    return lambda x: (np.sin(k * x), k * np.cos(k * x), -k * k * np.sin(k * x))


def _cos(k):
    return lambda x: (np.cos(k * x), -k * np.sin(k * x), -k * k * np.cos(k * x))


def _bubble_exp(x):
    e = np.exp(x / 5.0)
    q = x - x * x
    return e * q, e * (q / 5.0 + 1.0 - 2.0 * x), e * (q / 25.0 + 2.0 * (1.0 - 2.0 * x) / 5.0 - 2.0)


def _psi_time_poly(t):
    e = 20.0 * np.exp(1j * t)
    p = 1.0 + 3.0 * t * t
    return e * p, e * (1j * p + 6.0 * t), e * (-p + 12j * t + 6.0)


def _psi_time_wave(t):
    e = 5.0 * np.exp(1j * PI * t)
    return e, 1j * PI * e, -PI * PI * e


def _sin_t(t):
    return math.sin(PI * t), PI * math.cos(PI * t), -PI * PI * math.sin(PI * t)


def _cos_t(t):
    return math.cos(PI * t), -PI * math.sin(PI * t), -PI * PI * math.cos(PI * t)


@dataclass
class ExactSolution:
    """Closed-form (Psi, A) with sources f (Schroedinger) and g (Maxwell).

    ``psi_formula`` / ``A_formula`` are plain transcriptions of the closed
    forms, kept separate from the separable-term derivative machinery so the
    two can be checked against each other.
    """

    psi_terms: list
    A_terms: list  # per component: list of SeparableTerm
    psi_formula: Callable
    A_formula: Callable
    gamma: float = 1.0
    V0: float = 5.0
    T: float = 4.0
    name: str = "example52"

    def psi(self, x, t):
        return sum(term.value(x, t) for term in self.psi_terms)

    def psi_t(self, x, t):
        return sum(term.dt(x, t) for term in self.psi_terms)

    def grad_psi(self, x, t):
        return sum(term.grad(x, t) for term in self.psi_terms)

    def lap_psi(self, x, t):
        return sum(np.trace(term.hessian(x, t), axis1=1, axis2=2) for term in self.psi_terms)

    def A(self, x, t):
        return np.column_stack([sum(term.value(x, t) for term in comp) for comp in self.A_terms])

    def A_t(self, x, t, order: int = 1):
        return np.column_stack([sum(term.dt(x, t, order) for term in comp) for comp in self.A_terms])

    def jac_A(self, x, t):
        """J[n, c, d] = dA_c / dx_d."""
        return np.stack([sum(term.grad(x, t) for term in comp) for comp in self.A_terms], axis=1)

    def div_A(self, x, t):
        return np.trace(self.jac_A(x, t), axis1=1, axis2=2)

    def curl_A(self, x, t):
        J = self.jac_A(x, t)
        return np.column_stack([J[:, 2, 1] - J[:, 1, 2], J[:, 0, 2] - J[:, 2, 0], J[:, 1, 0] - J[:, 0, 1]])

    def _hessians_A(self, x, t):
        return [sum(term.hessian(x, t) for term in comp) for comp in self.A_terms]

    def grad_div_A(self, x, t):
        H = self._hessians_A(x, t)
        return sum(H[j][:, j, :] for j in range(3))

    def lap_A(self, x, t):
        return np.column_stack([np.trace(Hj, axis1=1, axis2=2) for Hj in self._hessians_A(x, t)])

    def f(self, x, t):
        """Schroedinger source: -i Psi_t + (1/2)(i grad + A)^2 Psi + V0 Psi."""
        psi = self.psi(x, t)
        gpsi = self.grad_psi(x, t)
        A = self.A(x, t)
        covariant = (-self.lap_psi(x, t) + 1j * self.div_A(x, t) * psi
                     + 2j * np.einsum("nd,nd->n", A, gpsi) + np.einsum("nd,nd->n", A, A) * psi)
        return -1j * self.psi_t(x, t) + 0.5 * covariant + self.V0 * psi

    def g(self, x, t):
        """Maxwell source: A_tt + curl curl A - gamma grad div A + f(Psi, Psi) + |Psi|^2 A."""
        psi = self.psi(x, t)
        gpsi = self.grad_psi(x, t)
        A = self.A(x, t)
        gd = self.grad_div_A(x, t)
        curlcurl = gd - self.lap_A(x, t)
        current = -np.imag(np.conj(psi)[:, None] * gpsi)
        return self.A_t(x, t, 2) + curlcurl - self.gamma * gd + current + (np.abs(psi) ** 2)[:, None] * A


def _psi52_formula(x, t):
    x1, x2, x3 = x[:, 0], x[:, 1], x[:, 2]
    poly = 20.0 * np.exp(1j * t) * (1 + 3 * t**2) * np.exp((x1 + x2 + x3) / 5.0)
    bubble = x1 * x2 * x3 * (1 - x1) * (1 - x2) * (1 - x3)
    wave = 5.0 * np.exp(1j * PI * t) * np.sin(2 * PI * x1) * np.sin(2 * PI * x2) * np.sin(2 * PI * x3)
    return poly * bubble + wave


def _A52_formula(x, t):
    s1, s2, s3 = (np.sin(2 * PI * x[:, d]) for d in range(3))
    c1, c2, c3 = (np.cos(2 * PI * x[:, d]) for d in range(3))
    r1, r2, r3 = (np.sin(PI * x[:, d]) for d in range(3))
    k1, k2, k3 = (np.cos(PI * x[:, d]) for d in range(3))
    fast = np.column_stack([c1 * s2 * s3, s1 * c2 * s3, s1 * s2 * c3])
    slow = np.column_stack([k1 * r2 * r3, r1 * k2 * r3, r1 * r2 * k3])
    return math.sin(PI * t) * fast + math.cos(PI * t) * slow


def build_example52(gamma: float = 1.0, V0: float = 5.0, T: float = 4.0) -> ExactSolution:
    psi_terms = [
        SeparableTerm(_psi_time_poly, (_bubble_exp, _bubble_exp, _bubble_exp)),
        SeparableTerm(_psi_time_wave, (_sin(2 * PI),) * 3),
    ]
    A_terms = []
    for j in range(3):
        fast = tuple(_cos(2 * PI) if d == j else _sin(2 * PI) for d in range(3))
        slow = tuple(_cos(PI) if d == j else _sin(PI) for d in range(3))
        A_terms.append([SeparableTerm(_sin_t, fast), SeparableTerm(_cos_t, slow)])
    return ExactSolution(psi_terms, A_terms, _psi52_formula, _A52_formula, gamma, V0, T)


# --- finite-difference residual gate --------------------------------------

_D1 = np.array([1.0, -8.0, 0.0, 8.0, -1.0]) / 12.0
_D2 = np.array([-1.0, 16.0, -30.0, 16.0, -1.0]) / 12.0
_OFF = np.arange(-2, 3)


def _fd_space(fun, x, t, h):
    """Gradient-like and Hessian-like FD tensors of fun(x, t) at one point x (3,)."""
    f0 = fun(x[None], t)[0]
    shape = np.shape(f0)
    grad = np.zeros((3,) + shape, dtype=np.result_type(f0))
    hess = np.zeros((3, 3) + shape, dtype=np.result_type(f0))
    for d in range(3):
        pts = np.repeat(x[None], 5, axis=0)
        pts[:, d] += _OFF * h
        vals = fun(pts, t)
        grad[d] = np.tensordot(_D1, vals, axes=1) / h
        hess[d, d] = np.tensordot(_D2, vals, axes=1) / h**2
    for d in range(3):
        for e in range(d + 1, 3):
            pts = np.repeat(x[None], 25, axis=0).reshape(5, 5, 3)
            pts[:, :, d] += _OFF[:, None] * h
            pts[:, :, e] += _OFF[None, :] * h
            vals = fun(pts.reshape(-1, 3), t).reshape((5, 5) + shape)
            mixed = np.tensordot(_D1, np.tensordot(_D1, vals, axes=(0, 1)), axes=(0, 0)) / h**2
            hess[d, e] = hess[e, d] = mixed
    return grad, hess


def _fd_time(fun, x, t, h, second=False):
    vals = np.array([fun(x[None], t + o * h)[0] for o in _OFF])
    stencil = _D2 / h**2 if second else _D1 / h
    return np.tensordot(stencil, vals, axes=1)


def source_residuals(exact: ExactSolution, n_samples: int = 20, seed: int = 0,
                     h: float = 1e-3) -> np.ndarray:
    """Relative strong-form residuals of the stored f, g at random (x, t).

    Derivatives come from finite differences of ``psi_formula``/``A_formula``
    only, so this is independent of the hand-coded derivatives.
    Returns an (n_samples, 2) array: Schroedinger and Maxwell residuals.
    """
    rng = np.random.default_rng(seed)
    out = np.empty((n_samples, 2))
    for s in range(n_samples):
        x = rng.uniform(0.05, 0.95, size=3)
        t = rng.uniform(0.1, exact.T)
        psi = exact.psi_formula(x[None], t)[0]
        A = exact.A_formula(x[None], t)[0]
        gpsi, hpsi = _fd_space(exact.psi_formula, x, t, h)
        jA, hA = _fd_space(exact.A_formula, x, t, h)  # jA[d, c] = d_d A_c
        psi_t = _fd_time(exact.psi_formula, x, t, h)
        A_tt = _fd_time(exact.A_formula, x, t, h, second=True)
        lap = np.trace(hpsi)
        div = np.trace(jA)
        # curl curl A_c = sum_d d_d (d_c A_d - d_d A_c)
        curlcurl = np.array([sum(hA[d, c, d] - hA[d, d, c] for d in range(3)) for c in range(3)])
        grad_div = np.array([sum(hA[c, d, d] for d in range(3)) for c in range(3)])
        schro_terms = [-1j * psi_t, -0.5 * lap, 0.5j * div * psi, 1j * (A @ gpsi),
                       0.5 * (A @ A) * psi, exact.V0 * psi]
        f = exact.f(x[None], t)[0]
        r_s = abs(sum(schro_terms) - f) / max(max(abs(v) for v in schro_terms), abs(f))
        current = -np.imag(np.conj(psi) * gpsi)
        max_terms = [A_tt, curlcurl, -exact.gamma * grad_div, current, abs(psi) ** 2 * A]
        g = exact.g(x[None], t)[0]
        r_m = (np.linalg.norm(sum(max_terms) - g)
               / max(max(np.linalg.norm(v) for v in max_terms), np.linalg.norm(g)))
        out[s] = r_s, r_m
    return out


class SourceGateError(RuntimeError):
    pass


def check_sources(exact: ExactSolution, n_samples: int = 20, rtol: float = 1e-4, seed: int = 0) -> float:
    res = source_residuals(exact, n_samples, seed)
    worst = float(res.max())
    if not worst <= rtol:
        raise SourceGateError(f"manufactured sources fail the residual gate: {worst:.3e} > {rtol:.1e}")
    return worst


# --- error norms ------------------------------------------------------------

@dataclass
class ErrorReport:
    M: int
    h: float
    dt: float
    t: float
    errA_L2: float
    errA_div: float
    errA_curl: float
    errA_H1: float
    errPsi_L2: float
    errPsi_H1semi: float
    errPsi_H1: float
    eoc: dict = field(default_factory=dict)

    NORMS = ("errA_L2", "errA_div", "errA_curl", "errA_H1", "errPsi_L2", "errPsi_H1semi", "errPsi_H1")


def compute_errors(ctx, psi, A, exact: ExactSolution, t: float, dt: float = float("nan")) -> ErrorReport:
    """Quadrature errors of (Psi_h, A_h) against the exact fields at time t.

    Psi: H1 = sqrt(L2^2 + |grad|^2).  A: H1 = sqrt(L2^2 + div^2 + curl^2),
    the div/curl norm being equivalent to the full H1 norm on H1_t.
    """
    from .assembly import scalar_at_qp, vector_at_qp

    cv = ctx.coef_values
    pts = cv.points.reshape(-1, 3)
    nc, nq = cv.jxw.shape
    w = cv.jxw.reshape(-1)
    pv, pg = scalar_at_qp(ctx, psi, cv)
    ep = pv.reshape(-1) - exact.psi(pts, t)
    eg = pg.reshape(-1, 3) - exact.grad_psi(pts, t)
    av, aj = vector_at_qp(ctx, A, cv)
    ea = av.reshape(-1, 3) - exact.A(pts, t)
    aj = aj.reshape(-1, 3, 3)
    ediv = np.trace(aj, axis1=1, axis2=2) - exact.div_A(pts, t)
    curl_h = np.column_stack([aj[:, 2, 1] - aj[:, 1, 2], aj[:, 0, 2] - aj[:, 2, 0], aj[:, 1, 0] - aj[:, 0, 1]])
    ecurl = curl_h - exact.curl_A(pts, t)

    def norm(e):
        e = np.abs(e) ** 2
        return math.sqrt(float(np.sum(w * (e if e.ndim == 1 else e.sum(axis=1)))))

    aL2, adiv, acurl = norm(ea), norm(ediv), norm(ecurl)
    pL2, psemi = norm(ep), norm(eg)
    return ErrorReport(ctx.mesh.M, ctx.mesh.h, dt, t, aL2, adiv, acurl,
                       math.sqrt(aL2**2 + adiv**2 + acurl**2), pL2, psemi, math.sqrt(pL2**2 + psemi**2))


def interpolation_errors(ctx, exact: ExactSolution, t: float) -> ErrorReport:
    """Errors of the nodal interpolants alone (no time stepping)."""
    from .space import interpolate_scalar, interpolate_vector

    psi = interpolate_scalar(ctx.scalar, lambda x: exact.psi(x, t))
    A = interpolate_vector(ctx.vector, lambda x: exact.A(x, t))
    return compute_errors(ctx, psi, A, exact, t, 0.0)


def eoc(e_coarse: float, e_fine: float, h_coarse: float, h_fine: float) -> float:
    return math.log(e_coarse / e_fine) / math.log(h_coarse / h_fine)


def attach_eoc(rows: list[ErrorReport]) -> list[ErrorReport]:
    """Fill ``eoc`` of each row against the next coarser row at the same time."""
    by_time: dict[float, list[ErrorReport]] = {}
    for r in rows:
        by_time.setdefault(round(r.t, 12), []).append(r)
    for series in by_time.values():
        series.sort(key=lambda r: -r.h)
        for prev, cur in zip(series, series[1:]):
            cur.eoc = {n: eoc(getattr(prev, n), getattr(cur, n), prev.h, cur.h) for n in ErrorReport.NORMS}
    return rows


def report_row(r: ErrorReport) -> dict:
    row = {k: v for k, v in asdict(r).items() if k != "eoc"}
    for n in ErrorReport.NORMS:
        row[f"eoc_{n}"] = r.eoc.get(n, float("nan"))
    return row


def effective_dt(requested: float, span: float) -> float:
    """Largest step <= ``requested`` that divides ``span`` exactly."""
    ratio = span / requested
    n = round(ratio)
    if abs(ratio - n) > 1e-9 * max(1.0, ratio):
        n = math.ceil(ratio)
    return span / max(n, 1)


def dt_for_rule(rule: str, h: float) -> float:
    if rule == "h":
        return h
    if rule == "sqrt_h":
        return math.sqrt(h)
    raise ValueError(f"unknown time-step rule {rule!r}; use 'h' or 'sqrt_h'")


def convergence_study(grid, degree: int, dt_rule: str | None = None, T: float = 1.0,
                      report_times=None, base=None, exact: ExactSolution | None = None,
                      log=None) -> list[ErrorReport]:
    """Run the manufactured problem on each M in ``grid`` and tabulate errors + EOC.

    ``base`` (a SimulationConfig, default: the example52 preset) supplies the
    start procedure, physics constants and solver settings.  The step is
    rounded down so that it divides the spacing of the report times, which
    then all lie on the step grid.  Refuses to run if the manufactured
    sources fail the residual gate.
    """
    from .config import preset
    from .problems import manufactured_problem
    from .stepper import run

    if len(grid) < 2:
        raise ValueError("a convergence study needs at least two grid levels")
    base = base or preset("example52")
    exact = exact or build_example52(base.gamma, base.V0, T)
    check_sources(exact)
    dt_rule = dt_rule or ("sqrt_h" if degree == 1 else "h")
    report_times = sorted(report_times or [T])
    if report_times[-1] > T + 1e-12:
        raise ValueError("report times must not exceed T")
    spacing = report_times[0]
    rows = []
    for M in grid:
        dt = effective_dt(dt_for_rule(dt_rule, 1.0 / M), spacing)
        cfg = base.replace(M=M, degree=degree, dt=dt, T=T, problem="example52")
        result = run(cfg, manufactured_problem(exact), report_times=report_times)
        for rep in result.errors:
            rows.append(rep)
            if log:
                log(f"M={M} dt={dt:.6g} t={rep.t:g} errA_H1={rep.errA_H1:.4e} errPsi_H1={rep.errPsi_H1:.4e}")
    return attach_eoc(rows)
