from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imexilw.discretization import global_alpha, spatial_divergence
from imexilw.driver import build_setup, scenario
from imexilw.errors import InadmissibleState, NewtonDivergence, SolverError
from imexilw.grid import NG, build_grid_1d
from imexilw.models import linear_relaxation, nonlinear_relaxation, reactive_euler, scalar_burgers_source
from imexilw.newton import newton
from imexilw.oracle import burgers
from imexilw.stepper import Solver, StageWorkspace, compute_dt, implicit_point_solve
from imexilw.tableau import ars_443, ssp_rk3


def periodic_solver(model, n=40, tab=None):
    grid = build_grid_1d(0.0, 1.0, n, periodic=True)
    return Solver(model, grid, tab or ars_443()), grid


# {{{ time step


def test_dt_examples():
    m = linear_relaxation(1.0)
    U = np.zeros((2, 5))
    assert compute_dt(U, m, 0.1) == pytest.approx(0.08)
    assert compute_dt(U, m, 0.1, t=0.95, t_end=1.0) == pytest.approx(0.05)
    assert compute_dt(U, m, 0.1, t=0.0, t_end=1.0) == pytest.approx(0.08)


@given(st.floats(1e-12, 1e10))
def test_dt_independent_of_eps(eps):
    U = np.random.default_rng(1).normal(size=(2, 7))
    assert compute_dt(U, linear_relaxation(eps), 0.025) == pytest.approx(0.02)


def test_dt_2d_sums_directional_speeds():
    m = reactive_euler()
    U = m.conserved(np.ones(3), np.array([1.0, 0.0, 0.0]), np.array([0.0, 0.0, 2.0]), np.ones(3), np.zeros(3))
    c = float(m.sound_speed(U)[0])
    assert compute_dt(U, m, 0.1, ndim=2) == pytest.approx(0.08 / (1.0 + 2.0 + 2 * c))


# }}}


# {{{ implicit point solve


def test_explicit_stage_passthrough(rng):
    rhs = rng.normal(size=(2, 6))
    np.testing.assert_array_equal(implicit_point_solve(rhs, 0.0, 0.1, linear_relaxation(1.0)), rhs)


@pytest.mark.parametrize("eps", [1.0, 1e-3, 1e-10])
def test_linear_relaxation_closed_form(eps, rng):
    rhs = rng.normal(size=(2, 9))
    c = 0.05 * 0.5
    got = implicit_point_solve(rhs, 0.5, 0.05, linear_relaxation(eps))
    Q = np.array([[0.0, 0.0], [-1 / eps, -1 / eps]])
    want = np.linalg.solve(np.eye(2) - c * Q, rhs)
    np.testing.assert_allclose(got, want, rtol=1e-12, atol=1e-14)


def test_linear_relaxation_newton_one_iteration(rng):
    m = linear_relaxation(1.0)
    rhs = rng.normal(size=(2, 4))
    c = 0.025
    x, its = newton(lambda U: U - c * m.source(U) - rhs, lambda U: np.eye(2)[..., None] - c * m.source_jacobian(U), rhs)
    assert its == 1
    np.testing.assert_allclose(x, implicit_point_solve(rhs, 0.5, 0.05, m), rtol=1e-14, atol=1e-15)


def test_nonlinear_relaxation_u_passes_through(rng):
    m = nonlinear_relaxation(1e-6)
    rhs = np.stack([rng.uniform(0, 1, 8), rng.uniform(-0.3, 0.3, 8)])
    U = implicit_point_solve(rhs, 0.5, 0.01, m)
    np.testing.assert_array_equal(U[0], rhs[0])
    np.testing.assert_allclose(U - 0.005 * m.source(U), rhs, atol=1e-10)


def test_euler_zero_reactant_passthrough():
    m = reactive_euler()
    rhs = m.conserved(np.array([1.0, 2.0]), np.array([0.1, -0.3]), np.array([0.0, 0.4]), np.array([2.0, 5.0]), np.zeros(2))
    np.testing.assert_array_equal(implicit_point_solve(rhs, 0.5, 0.1, m), rhs)


def test_euler_only_reactant_changes(rng):
    m = reactive_euler()
    rhs = m.conserved(rng.uniform(0.5, 2, 20), rng.normal(size=20), rng.normal(size=20), rng.uniform(20, 60, 20), rng.uniform(0, 1, 20))
    U = implicit_point_solve(rhs, 0.5, 0.01, m)
    np.testing.assert_array_equal(U[:4], rhs[:4])
    np.testing.assert_allclose(U - 0.005 * m.source(U), rhs, atol=1e-10)


def test_newton_divergence():
    with pytest.raises(NewtonDivergence):
        newton(lambda x: x * x + 1.0, lambda x: (2 * x)[None], np.array([0.5]), maxit=20)


# }}}


# {{{ steps


def direct_explicit_step(model, grid, U, dt, tab):
    # plain explicit RK on the periodic line, no boundary machinery
    n = grid.n
    core = U[:, NG : n + NG]
    stages, divs = [], []
    for i in range(tab.s):
        Ui = core.copy()
        for j in range(i):
            Ui = Ui - dt * tab.a_tilde[i, j] * divs[j]
        ext = np.concatenate([Ui[:, -NG:], Ui, Ui[:, :NG]], axis=1)
        divs.append(spatial_divergence(ext, model, grid.dx, 0, global_alpha(Ui, model)))
        stages.append(Ui)
    return stages[-1] if tab.stiffly_accurate else core - dt * sum(w * d for w, d in zip(tab.w_tilde, divs))


@pytest.mark.parametrize("tab", [ars_443(), ssp_rk3()], ids=["ars443", "ssprk3"])
def test_zero_source_matches_explicit_rk(tab):
    m = burgers()
    solver, grid = periodic_solver(m, 32, tab)
    x = grid.x_ext
    U = (1.5 + 0.5 * np.sin(2 * np.pi * x))[None]
    dt = solver.compute_dt(U)
    got = solver.interior(solver.step(U, 0.0, dt))
    want = direct_explicit_step(m, grid, U, dt, tab)
    np.testing.assert_allclose(got, want, rtol=1e-14, atol=1e-14)


def ode_step(u, dt, eps, tab):
    # U' = -A_x U + Q U with A_x U = 0 for uniform data: dense IMEX stages
    Q = np.array([[0.0, 0.0], [-1 / eps, -1 / eps]])
    ks = []
    for i in range(tab.s):
        rhs = u + dt * sum(tab.a[i, j] * ks[j] for j in range(i))
        Ui = np.linalg.solve(np.eye(2) - dt * tab.a[i, i] * Q, rhs)
        ks.append(Q @ Ui)
    return u + dt * sum(w * k for w, k in zip(tab.w, ks))


@pytest.mark.parametrize("eps", [1.0, 1e-2])
def test_uniform_relaxation_matches_dense_ode(eps):
    m = linear_relaxation(eps)
    solver, grid = periodic_solver(m, 10)
    u0 = np.array([0.8, -0.3])
    U = np.repeat(u0[:, None], grid.shape[0], axis=1)
    dt = 0.07
    got = solver.interior(solver.step(U, 0.0, dt))
    want = ode_step(u0, dt, eps, ars_443())
    np.testing.assert_allclose(got, np.repeat(want[:, None], grid.n, axis=1), rtol=1e-13, atol=1e-13)


def test_uniform_relaxation_temporal_order():
    m = linear_relaxation(1.0)
    u0 = np.array([0.8, -0.3])
    # exact: u constant, v + u decays like exp(-t)
    exact = np.array([0.8, -0.8 + 0.5 * np.exp(-1.0)])
    errs, dts = [], []
    for n in (10, 20, 40, 80):
        solver, grid = periodic_solver(m, 10)
        U = np.repeat(u0[:, None], grid.shape[0], axis=1)
        dt = 1.0 / n
        for k in range(n):
            U = solver.step(U, k * dt, dt)
        errs.append(np.abs(solver.interior(U)[:, 0] - exact).max())
        dts.append(dt)
    assert np.polyfit(np.log(dts), np.log(errs), 1)[0] >= 2.7


@pytest.mark.parametrize("name", ["burgers", "relax"])
def test_periodic_conservation(name, rng):
    if name == "burgers":
        m = burgers()
        make = lambda x: (1.2 + 0.6 * np.sin(2 * np.pi * x) + 0.1 * np.cos(6 * np.pi * x))[None]
    else:
        m = linear_relaxation(1.0)
        make = lambda x: np.stack([np.sin(2 * np.pi * x), np.cos(2 * np.pi * x)])
    solver, grid = periodic_solver(m, 50)
    U = make(grid.x_ext)
    mass = solver.interior(U)[0].sum() * grid.dx
    t = 0.0
    for _ in range(20):
        dt = solver.compute_dt(U, t)
        U = solver.step(U, t, dt)
        t += dt
        new = solver.interior(U)[0].sum() * grid.dx
        assert abs(new - mass) < 1e-12
        mass = new


def test_workspace_records_stages():
    m = linear_relaxation(1.0)
    solver, grid = periodic_solver(m, 12)
    U = np.stack([np.sin(2 * np.pi * grid.x_ext), 0 * grid.x_ext])
    ws = StageWorkspace(0.0, 0.0)
    out = solver.step(U, 0.0, 0.05, ws)
    assert len(ws.stages) == 5 and ws.dt == 0.05
    np.testing.assert_array_equal(ws.stages[-1], solver.interior(out))
    assert ws.divergences[-1] is None


def test_stiff_example2_bounded():
    cfg = scenario("example2", model_params={"eps": 1e-10})
    setup = build_setup(cfg, 1 / 40)
    U, t, n = setup.solver.integrate(setup.U0, 0.0, 1.0)
    assert t == 1.0
    exact = setup.exact(setup.grid.x, 1.0)
    assert np.abs(setup.solver.interior(U)).max() <= 1.1 * np.abs(exact).max()


def test_example1_one_step_local_error():
    # away from the boundary the one-step error is O(dx^4) with dt ~ dx
    hs, errs = [], []
    for h in (1 / 40, 1 / 80, 1 / 160):
        setup = build_setup(scenario("example1"), h)
        solver = setup.solver
        dt = solver.compute_dt(setup.U0)
        U = solver.step(setup.U0, 0.0, dt)
        x = setup.grid.x
        inner = (x > 0.25) & (x < 0.75)
        errs.append(np.abs(solver.interior(U)[0, inner] - np.exp(dt + x[inner])).max())
        hs.append(h)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 3.7


def test_inadmissible_state_reported():
    m = nonlinear_relaxation(1.0)
    solver, grid = periodic_solver(m, 20)
    U = np.stack([np.full(grid.shape, -0.5), np.full(grid.shape, -0.6)])
    with pytest.raises(InadmissibleState, match="step 1"):
        solver.integrate(U, 0.0, 0.1)


def test_non_finite_solution_reported():
    solver, grid = periodic_solver(scalar_burgers_source(), 20)
    U = np.ones((1, grid.shape[0]))
    U[0, 5] = np.inf
    with pytest.raises(SolverError):
        solver.integrate(U, 0.0, 0.1)


# }}}
