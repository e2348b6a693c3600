"""Decoupled Crank-Nicolson time stepping for the coupled system.

Per step k (t_k = k dt), given Psi^{k-1}, A^{k-1}, A^{k-2}:

* Maxwell (real SPD system) for A^k, with the density mass W and current F
  frozen at Psi^{k-1}:
      [Mv/dt^2 + D/2 + W/4] A^k = G - F + Mv (2A^{k-1} - A^{k-2})/dt^2
                                  - D A^{k-2}/2 - W (2A^{k-1} + A^{k-2})/4
* Schroedinger (complex, non-Hermitian system) for Psi^k with the covariant
  form at the midpoint field (A^k + A^{k-1})/2:
      [-i Ms/dt + K/4 + V0 Ms/2] Psi^k = [-i Ms/dt - K/4 - V0 Ms/2] Psi^{k-1} + F_src

Unknown vectors hold free dofs only; constrained dofs are identically zero.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from typing import Callable, Optional

import numpy as np

from . import assembly as asm
from .config import SimulationConfig
from .linalg import SolveReport, solve_complex, solve_dense, solve_direct, solve_spd
from .mesh import build_unit_cube_mesh
from .problems import Problem, problem_for
from .space import interpolate_scalar, interpolate_vector

log = logging.getLogger(__name__)


@dataclass
class FieldState:
    """Fields at step k: Psi^k, A^k and A^{k-1} (free coefficients)."""

    k: int
    t: float
    psi: np.ndarray
    A: np.ndarray
    A_prev: np.ndarray


@dataclass
class Diagnostics:
    k: int
    t: float
    mass: float
    energy: float
    energy_imag: float
    psi_H1: float
    A_H1: float
    maxwell: Optional[SolveReport] = None
    schrodinger: Optional[SolveReport] = None

    def row(self) -> dict:
        return {
            "k": self.k, "t": self.t, "mass": self.mass, "energy": self.energy,
            "psi_H1": self.psi_H1, "A_H1": self.A_H1,
            "maxwell_iters": self.maxwell.iterations if self.maxwell else 0,
            "schrodinger_iters": self.schrodinger.iterations if self.schrodinger else 0,
        }


class ChargeIntegral:
    """Running approximation of S(x, t) = int_0^t rho(x, s) ds.

    Densities arrive once per step.  S at anchor times (every ``every``
    steps) is the trapezoid integral of the history; in between,
    S(t) = S_a + (t - t_a) rho_a + (t - t_a)^2 rho_t,a / 2.  The initial
    rate ``rho_t0`` is supplied by the caller; later rates are backward
    differences of the density.
    """

    def __init__(self, rho0: np.ndarray, rho_t0: np.ndarray | None, dt: float, every: int = 1):
        if every < 1:
            raise ValueError("anchor spacing must be at least one step")
        rho0 = np.asarray(rho0, dtype=float)
        self.dt = dt
        self.every = every
        self.k = 0
        self.running = np.zeros_like(rho0)
        self.rho_last = rho0
        rate = np.zeros_like(rho0) if rho_t0 is None else np.asarray(rho_t0, dtype=float)
        self.anchor = (0.0, self.running.copy(), rho0, rate)

    def value(self, t: float) -> np.ndarray:
        t_a, S_a, rho_a, rate_a = self.anchor
        tau = t - t_a
        return S_a + tau * rho_a + 0.5 * tau * tau * rate_a

    def push(self, rho: np.ndarray) -> None:
        rho = np.asarray(rho, dtype=float)
        self.k += 1
        self.running = self.running + 0.5 * self.dt * (self.rho_last + rho)
        if self.k % self.every == 0:
            self.anchor = (self.k * self.dt, self.running.copy(), rho, (rho - self.rho_last) / self.dt)
        self.rho_last = rho


def charge_integral(rho_history, dt: float, t: float, every: int = 1, rho_t0=None) -> np.ndarray:
    """S(t) from densities sampled at t_k = k dt (k = 0, 1, ...)."""
    if len(rho_history) == 0:
        raise ValueError("charge integral needs at least the initial density")
    tracker = ChargeIntegral(rho_history[0], rho_t0, dt, every)
    last = int(math.floor(t / dt + 1e-9))
    if last >= len(rho_history) + every - 1 or t < 0:
        raise ValueError(f"density history does not reach t={t}")
    for rho in rho_history[1:last + 1]:
        tracker.push(rho)
    return tracker.value(t)


class Simulation:
    """Operators and one-step maps for a configured problem."""

    def __init__(self, config: SimulationConfig, problem: Problem | None = None):
        self.config = config
        self.problem = problem if problem is not None else problem_for(config)
        self.mesh = build_unit_cube_mesh(config.M)
        ctx = self.ctx = asm.FormContext(self.mesh, config.degree, config.gamma, config.V0)
        self.dt = config.dt_effective
        self.n_steps = config.n_steps
        self.Ms = asm.assemble_scalar_mass(ctx, True)
        self.S = asm.assemble_stiffness(ctx, True)
        self.Mv = asm.assemble_vector_mass(ctx, True)
        self.Ddiv, self.Dcurl = asm.assemble_div_curl(ctx, True)
        vp = ctx.pattern("vector", True)
        self.D = vp.matrix(ctx.gamma * self.Ddiv.data + self.Dcurl.data)
        self.psi_norm_matrix = self.Ms + self.S
        self.A_norm_matrix = vp.matrix(self.Mv.data + self.Ddiv.data + self.Dcurl.data)
        self.charge: ChargeIntegral | None = None
        self._div_A0 = None

    # --- helpers ---------------------------------------------------------
    def _solve(self, A, b, x0, hermitian_real: bool):
        method = self.config.method
        if method == "dense":
            return solve_dense(A, b)
        if method == "direct":
            return solve_direct(A, b)
        maxiter = int(self.config.max_iter_factor * A.shape[0])
        solver = solve_spd if hermitian_real else solve_complex
        return solver(A, b, x0=x0, rtol=self.config.rtol, maxiter=maxiter)

    def density_at_qp(self, psi) -> np.ndarray:
        val, _ = asm.scalar_at_qp(self.ctx, psi)
        return np.abs(val) ** 2

    def maxwell_load(self, t: float) -> np.ndarray:
        """G(t): the pointwise source plus the charge-integral term."""
        ctx = self.ctx
        G = np.zeros(len(ctx.vector.free))
        if self.problem.g is not None:
            G += asm.assemble_load_vector(ctx, self.problem.g, t, "vector", True)
        if self.charge is not None:
            G += asm.assemble_div_load(ctx, ctx.gamma * (self._div_A0 - self.charge.value(t)), True)
        return G

    def schrodinger_load(self, t: float) -> np.ndarray:
        if self.problem.f is None:
            return np.zeros(len(self.ctx.scalar.free), dtype=complex)
        return asm.assemble_load_vector(self.ctx, self.problem.f, t, "scalar", True)

    # --- start -------------------------------------------------------------
    def initialize(self) -> FieldState:
        ctx, p, dt = self.ctx, self.problem, self.dt
        psi_full = interpolate_scalar(ctx.scalar, p.psi0).coeffs
        A0_full = interpolate_vector(ctx.vector, p.A0).coeffs
        psi0 = psi_full[ctx.scalar.free]
        A0 = A0_full[ctx.vector.free]
        A1 = interpolate_vector(ctx.vector, p.A1).coeffs[ctx.vector.free]

        if p.charge_source:
            _, jac = asm.vector_at_qp(ctx, A0_full)
            self._div_A0 = np.trace(jac, axis1=2, axis2=3)
            self.charge = ChargeIntegral(self.density_at_qp(psi0), self._initial_density_rate(psi0, A0),
                                         dt, self.config.charge_every)

        start = self.config.start
        A_prev = A0 - dt * A1
        if start == "taylor2":
            W = asm.assemble_density_mass(ctx, psi0, True)
            rhs = self.maxwell_load(0.0) - self.D @ A0 - asm.assemble_current(ctx, psi0, True) - W @ A0
            a0, _ = self._solve(self.Mv, rhs, None, True)
            A_prev = A_prev + 0.5 * dt * dt * a0
        elif start == "exact":
            if p.exact is None:
                raise ValueError("time.start=exact needs a problem with a known exact solution")
            A_prev = interpolate_vector(ctx.vector, lambda x: p.exact.A(x, -dt)).coeffs[ctx.vector.free]
        return FieldState(0, 0.0, psi0, A0, A_prev)

    def _initial_density_rate(self, psi0, A0) -> np.ndarray:
        """rho_t(0) = 2 Re(conj(Psi) Psi_t) with Psi_t = -i Ms^{-1}(K/2 + V0 Ms) Psi (+ source)."""
        K = asm.assemble_B(self.ctx, A0, True, self.S)
        Hpsi = 0.5 * (K @ psi0) + self.ctx.V0 * (self.Ms @ psi0) - self.schrodinger_load(0.0)
        re, _ = self._solve(self.Ms, Hpsi.real, None, True)
        im, _ = self._solve(self.Ms, Hpsi.imag, None, True)
        psi_t = -1j * (re + 1j * im)
        val, _ = asm.scalar_at_qp(self.ctx, psi0)
        vt, _ = asm.scalar_at_qp(self.ctx, psi_t)
        return 2.0 * np.real(np.conj(val) * vt)

    # --- one step -------------------------------------------------------------
    def maxwell_step(self, state: FieldState):
        """A^{k} from Psi^{k-1}, A^{k-1}, A^{k-2} (``state`` holds step k-1)."""
        ctx, dt = self.ctx, self.dt
        A1, A2, psi = state.A, state.A_prev, state.psi
        W = asm.assemble_density_mass(ctx, psi, True)
        F = asm.assemble_current(ctx, psi, True)
        p = ctx.pattern("vector", True)
        lhs = p.matrix(self.Mv.data / dt**2 + 0.5 * self.D.data + 0.25 * W.data)
        rhs = (self.maxwell_load(state.t) - F + self.Mv @ (2 * A1 - A2) / dt**2
               - 0.5 * (self.D @ A2) - 0.25 * (W @ (2 * A1 + A2)))
        return self._solve(lhs, rhs, 2 * A1 - A2, True)

    def schrodinger_step(self, state: FieldState, A_new: np.ndarray):
        """Psi^k given A^k; returns (Psi^k, report, K) with K = B((A^k + A^{k-1})/2)."""
        ctx, dt = self.ctx, self.dt
        K = asm.assemble_B(ctx, 0.5 * (A_new + state.A), True, self.S)
        p = ctx.pattern("scalar", True)
        m = (-1j / dt + 0.5 * ctx.V0) * self.Ms.data
        lhs = p.matrix(m + 0.25 * K.data)
        rhs_op = p.matrix((-1j / dt - 0.5 * ctx.V0) * self.Ms.data - 0.25 * K.data)
        rhs = rhs_op @ state.psi + self.schrodinger_load(state.t + 0.5 * dt)
        psi, report = self._solve(lhs, rhs, state.psi, False)
        return psi, report, K

    def step(self, state: FieldState):
        A_new, rep_a = self.maxwell_step(state)
        psi_new, rep_s, K = self.schrodinger_step(state, A_new)
        new = FieldState(state.k + 1, (state.k + 1) * self.dt, psi_new, A_new, state.A)
        if self.charge is not None:
            self.charge.push(self.density_at_qp(psi_new))
        return new, self.diagnostics(new, K, rep_a, rep_s)

    # --- monitoring -------------------------------------------------------------
    def mass(self, psi) -> float:
        return float(np.real(np.vdot(psi, self.Ms @ psi)))

    def energy(self, state: FieldState, K=None) -> tuple[float, float]:
        """Discrete energy; also returns the imaginary residue of Psi^H K Psi."""
        if K is None:
            K = asm.assemble_B(self.ctx, 0.5 * (state.A + state.A_prev), True, self.S)
        kin = np.vdot(state.psi, K @ state.psi)
        vel = (state.A - state.A_prev) / self.dt
        value = (0.5 * kin.real + 0.25 * state.A @ (self.D @ state.A)
                 + 0.25 * state.A_prev @ (self.D @ state.A_prev)
                 + self.ctx.V0 * self.mass(state.psi) + 0.5 * vel @ (self.Mv @ vel))
        return float(value), float(kin.imag)

    def diagnostics(self, state: FieldState, K=None, maxwell=None, schrodinger=None) -> Diagnostics:
        energy, residue = self.energy(state, K)
        psi_H1 = math.sqrt(max(np.real(np.vdot(state.psi, self.psi_norm_matrix @ state.psi)), 0.0))
        A_H1 = math.sqrt(max(state.A @ (self.A_norm_matrix @ state.A), 0.0))
        return Diagnostics(state.k, state.t, self.mass(state.psi), energy, residue, psi_H1, A_H1,
                           maxwell, schrodinger)

    def full_fields(self, state: FieldState):
        return self.ctx.expand_scalar(state.psi), self.ctx.expand_vector(state.A)


@dataclass
class RunResult:
    simulation: Simulation
    state: FieldState
    diagnostics: list = field(default_factory=list)
    errors: list = field(default_factory=list)


def run(config: SimulationConfig, problem: Problem | None = None, report_times=(),
        observers: tuple[Callable, ...] = (), n_steps: int | None = None) -> RunResult:
    """Integrate to T (or ``n_steps`` steps), calling ``observer(sim, state, diag)`` each step.

    When the problem carries an exact solution, errors are recorded at every
    step time that matches one of ``report_times``.
    """
    from .mms import compute_errors

    sim = Simulation(config, problem)
    state = sim.initialize()
    diag = sim.diagnostics(state)
    result = RunResult(sim, state, [diag])
    for obs in observers:
        obs(sim, state, diag)
    targets = {round(t / sim.dt): t for t in report_times}
    total = sim.n_steps if n_steps is None else n_steps
    exact = sim.problem.exact
    for _ in range(total):
        state, diag = sim.step(state)
        result.diagnostics.append(diag)
        for obs in observers:
            obs(sim, state, diag)
        if exact is not None and state.k in targets:
            psi, A = sim.full_fields(state)
            result.errors.append(compute_errors(sim.ctx, psi, A, exact, state.t, sim.dt))
        if state.k % 100 == 0:
            log.info("step %d t=%.4f mass=%.12f energy=%.12f", state.k, state.t, diag.mass, diag.energy)
    result.state = state
    return result
