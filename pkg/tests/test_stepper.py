import math

import numpy as np
import pytest

from msfem.config import SimulationConfig, preset
from msfem.problems import Problem, example51, manufactured_problem
from msfem.stepper import ChargeIntegral, Simulation, charge_integral, run
from oracles import oracle_step


@pytest.mark.parametrize("M,degree,name", [(1, 2, "example52"), (2, 1, "example52"), (2, 1, "example51"),
                                           (2, 2, "example51")])
def test_one_step_matches_dense_oracle(M, degree, name):
    if name == "example52":
        cfg = SimulationConfig(M=M, degree=degree, dt=0.05, T=0.05, V0=5.0, gamma=1.3, problem=name,
                               start="exact", rtol=1e-14)
        problem = manufactured_problem()
    else:
        cfg = preset(name, M=M, degree=degree, rtol=1e-14, T=0.0025)
        problem = example51(True)
    sim = Simulation(cfg, problem)
    state = sim.initialize()
    new, diag = sim.step(state)
    psi_ref, A_ref = oracle_step(sim, state)
    assert np.max(np.abs(new.A - A_ref)) <= 1e-9 * max(1.0, np.max(np.abs(A_ref)))
    assert np.max(np.abs(new.psi - psi_ref)) <= 1e-9 * max(1.0, np.max(np.abs(psi_ref)))
    assert diag.maxwell.converged and diag.schrodinger.converged


@pytest.mark.parametrize("method", ["direct", "dense"])
def test_solver_paths_agree(method):
    cfg = preset("example51", M=2, degree=2, T=0.0025 * 3)
    ref = run(cfg).state
    other = run(cfg.replace(method=method)).state
    assert np.allclose(ref.psi, other.psi, atol=1e-8)
    assert np.allclose(ref.A, other.A, atol=1e-8)


def _drift(values):
    v = np.array(values)
    return np.max(np.abs(v - v[0])) / abs(v[0])


@pytest.mark.parametrize("degree", [1, 2])
def test_mass_conserved_with_charge_source(degree):
    cfg = preset("example51", M=4, degree=degree, T=0.0025 * 20, charge_every=3)
    res = run(cfg)
    assert _drift([d.mass for d in res.diagnostics]) <= 1e-9


def test_initial_mass_converges_to_one():
    # the continuous initial state has unit mass; the interpolant is off by O(h^2)
    err = [abs(run(preset("example51", M=M), n_steps=0).diagnostics[0].mass - 1.0) for M in (4, 8)]
    assert 3.0 < err[0] / err[1] < 5.0


@pytest.mark.parametrize("degree", [1, 2])
def test_energy_conserved_without_sources(degree):
    cfg = preset("example51", M=4, degree=degree, charge_source=False, V0=2.0, T=0.0025 * 20)
    res = run(cfg)
    assert _drift([d.energy for d in res.diagnostics]) <= 1e-8
    assert max(abs(d.energy_imag) for d in res.diagnostics) < 1e-10


def test_ground_mode_without_field():
    zero = lambda x: np.zeros((len(x), 3))
    prob = Problem("ground", example51().psi0, zero, zero)
    cfg = SimulationConfig(M=4, degree=1, dt=0.01, T=0.1, problem="custom")
    res = run(cfg, prob)
    assert _drift([d.mass for d in res.diagnostics]) <= 1e-10
    # a real initial state carries no current, so the first field update is zero
    assert not run(cfg, prob, n_steps=1).state.A.any()


def test_zero_data_stays_zero():
    zero = lambda x: np.zeros((len(x), 3))
    prob = Problem("zero", lambda x: np.zeros(len(x)), zero, zero)
    res = run(SimulationConfig(M=2, degree=2, dt=0.1, T=0.3, problem="custom"), prob)
    assert not res.state.psi.any() and not res.state.A.any()


def test_start_modes():
    """The first-order start is off the exact A(-dt) by O(dt^2); taylor2 adds dt^2/2 times a fixed acceleration."""
    prob = manufactured_problem()
    gaps, accel = {}, {}
    for dt in (0.02, 0.01):
        cfg = SimulationConfig(M=4, degree=2, dt=dt, T=dt, V0=5.0, problem="example52", start="exact")
        exact = Simulation(cfg, prob).initialize().A_prev
        first = Simulation(cfg.replace(start="first_order"), prob).initialize().A_prev
        taylor = Simulation(cfg.replace(start="taylor2"), prob).initialize().A_prev
        gaps[dt] = np.max(np.abs(first - exact))
        accel[dt] = (taylor - first) / (0.5 * dt * dt)
    assert 3.5 < gaps[0.02] / gaps[0.01] < 4.5
    assert np.allclose(accel[0.02], accel[0.01], rtol=1e-8, atol=1e-8)


def test_exact_start_needs_exact_solution():
    cfg = preset("example51", M=2, start="exact")
    with pytest.raises(ValueError):
        Simulation(cfg).initialize()


# Charge integral

def test_charge_integral_exact_for_linear_density():
    dt = 0.1
    history = [np.full(4, k * dt) for k in range(40)]
    for every in (1, 3, 7):
        for t in (0.0, 0.3, 0.65, 1.234, 2.9):
            S = charge_integral(history, dt, t, every=every, rho_t0=np.ones(4))
            assert np.allclose(S, t * t / 2, rtol=1e-12, atol=1e-15)


def test_charge_integral_taylor_between_anchors():
    dt, every = 0.05, 4
    rho = lambda t: np.array([np.cos(t), 1 + t**2])
    rate0 = np.array([0.0, 0.0])
    history = [rho(k * dt) for k in range(30)]
    t = 9 * dt + 0.03  # anchor at 8 dt
    ta = 8 * dt
    trap = sum(0.5 * dt * (history[k] + history[k + 1]) for k in range(8))
    rate = (history[8] - history[7]) / dt
    expected = trap + (t - ta) * history[8] + 0.5 * (t - ta) ** 2 * rate
    assert np.allclose(charge_integral(history, dt, t, every, rate0), expected)
    exact = np.array([np.sin(t), t + t**3 / 3])
    assert np.allclose(expected, exact, atol=1e-3)


def test_charge_integral_rejects_empty_history():
    with pytest.raises(ValueError):
        charge_integral([], 0.1, 0.0)
    with pytest.raises(ValueError):
        ChargeIntegral(np.zeros(2), None, 0.1, every=0)


def test_tracker_follows_density_history():
    cfg = preset("example51", M=2, degree=2, T=0.0025 * 5, charge_every=2)
    sim = Simulation(cfg)
    state = sim.initialize()
    history = [sim.density_at_qp(state.psi)]
    rate0 = sim.charge.anchor[3].copy()
    for _ in range(5):
        state, _ = sim.step(state)
        history.append(sim.density_at_qp(state.psi))
    t = state.t
    assert np.allclose(sim.charge.value(t), charge_integral(history, sim.dt, t, 2, rate0))


def test_initial_density_rate_matches_difference_quotient():
    cfg = preset("example51", M=3, degree=2, dt=1e-7, T=1e-7, rtol=1e-14)
    sim = Simulation(cfg)
    s0 = sim.initialize()
    rate = sim.charge.anchor[3]
    s1, _ = sim.step(s0)
    fd = (sim.density_at_qp(s1.psi) - sim.density_at_qp(s0.psi)) / sim.dt
    assert np.max(np.abs(rate - fd)) <= 1e-3 * max(1.0, np.max(np.abs(rate)))


def test_diagnostics_row():
    res = run(preset("example51", M=2, T=0.005))
    row = res.diagnostics[-1].row()
    assert row["k"] == 2 and math.isclose(row["t"], 0.005)
    assert {"mass", "energy", "psi_H1", "A_H1", "maxwell_iters", "schrodinger_iters"} <= set(row)
