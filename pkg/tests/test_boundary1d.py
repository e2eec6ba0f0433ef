from __future__ import annotations

import numpy as np
import pytest
from hypothesis import given
from hypothesis import strategies as st

from imexilw.boundary1d import (
    LINEAR_WEIGHTS,
    WENO_WEIGHTS,
    BoundaryStageCache,
    ILWBoundary,
    StageRecord,
    boundary_first_derivative_ilw,
    boundary_second_derivative,
    boundary_state_n,
    characteristic_split,
    dirichlet_component,
    extrapolate_characteristics,
    fill_ghosts_time_n,
    free_outflow,
    prescribed_state,
    stage_boundary_derivative,
    stage_boundary_value,
    taylor_ghosts,
    wall,
)
from imexilw.driver import build_setup, scenario
from imexilw.errors import ZeroEigenvalue
from imexilw.grid import build_grid_1d
from imexilw.models import (
    linear_relaxation,
    matvec,
    nonlinear_relaxation,
    reactive_euler,
    scalar_burgers_source,
)
from imexilw.oracle import burgers, linear_advection
from imexilw.tableau import IMEXTableau, ars_443, ssp_rk3


def col(*v):
    return np.array(v, dtype=float)[:, None]


def proportional(a, b):
    a, b = np.asarray(a, float), np.asarray(b, float)
    return abs(abs(a @ b) - np.linalg.norm(a) * np.linalg.norm(b)) < 1e-12


# {{{ characteristic split


def test_split_linear_relaxation():
    sp = characteristic_split(col(0.3, -0.1), linear_relaxation(1.0))
    assert sp.p == 1
    np.testing.assert_allclose(sp.lam[:, 0], [1.0, -1.0])
    assert proportional(sp.L[0, :, 0], [1, 1])
    assert proportional(sp.L[1, :, 0], [1, -1])


def test_split_nonlinear_relaxation_origin():
    sp = characteristic_split(col(0.0, 0.0), nonlinear_relaxation(1.0))
    np.testing.assert_allclose(sp.lam[:, 0], [1.0, -1.0])
    assert proportional(sp.L[0, :, 0], [1, 1])
    assert proportional(sp.L[1, :, 0], [1, -1])


def test_split_burgers():
    m = scalar_burgers_source()
    assert characteristic_split(col(2.0), m).p == 1
    assert characteristic_split(col(2.0), m, -1.0).p == 0
    with pytest.raises(ZeroEigenvalue):
        characteristic_split(col(0.0), m)


def test_split_lr_identity(rng):
    m = reactive_euler()
    U = m.conserved(rng.uniform(0.5, 2, 8), rng.normal(size=8), rng.normal(size=8), rng.uniform(1, 3, 8), rng.uniform(0, 1, 8))
    sp = characteristic_split(U, m, -1.0, 1)
    eye = np.einsum("ij...,jk...->ik...", sp.L, sp.R)
    np.testing.assert_allclose(np.moveaxis(eye, -1, 0), np.broadcast_to(np.eye(5), (8, 5, 5)), atol=1e-9)
    assert np.all(np.diff(sp.lam, axis=0) <= 0.0)


# }}}


# {{{ time level n


def split_and_extrap(samples, model, dx, xi0=None, direction=1.0, count=None, weights=LINEAR_WEIGHTS):
    xi0 = 0.5 * dx if xi0 is None else xi0
    sp = characteristic_split(samples[0], model, direction, count)
    return sp, extrapolate_characteristics(samples, sp, dx, xi0, weights=weights)


def test_scalar_inflow_state():
    m = linear_advection()
    g = lambda t: np.sin(t) + 2.0
    dg = lambda t: np.cos(t)
    samples = np.array([3.0, 3.1, 3.3]).reshape(3, 1, 1)
    sp, vstar = split_and_extrap(samples, m, 0.1)
    rel = dirichlet_component(0, g, dg, 1)
    U0 = boundary_state_n(sp, vstar[0], rel, 0.4)
    assert U0[0, 0] == pytest.approx(g(0.4), abs=1e-14)
    U1 = boundary_first_derivative_ilw(U0, sp, vstar[1], m, rel, 0.4)
    assert U1[0, 0] == pytest.approx(-dg(0.4), abs=1e-14)


def test_burgers_ilw_derivative():
    m = burgers()
    g, dg = (lambda t: 1.5 + t), (lambda t: 1.0)
    samples = np.full((3, 1, 1), 1.6)
    sp, vstar = split_and_extrap(samples, m, 0.1)
    rel = dirichlet_component(0, g, dg, 1)
    U0 = boundary_state_n(sp, vstar[0], rel, 0.2)
    U1 = boundary_first_derivative_ilw(U0, sp, vstar[1], m, rel, 0.2)
    assert U1[0, 0] == pytest.approx(-1.0 / 1.7, rel=1e-13)


def test_example1_ilw_derivative_includes_source():
    # u = exp(t + x): u_x = (u^2 + u - u_t) / u = exp(t) at x = 0
    m = scalar_burgers_source()
    t = 0.3
    g, dg = (lambda s: np.exp(s)), (lambda s: np.exp(s))
    dx = 0.05
    x = (np.arange(3) + 0.5) * dx
    samples = np.exp(t + x).reshape(3, 1, 1)
    sp, vstar = split_and_extrap(samples, m, dx)
    rel = dirichlet_component(0, g, dg, 1)
    U0 = boundary_state_n(sp, vstar[0], rel, t)
    U1 = boundary_first_derivative_ilw(U0, sp, vstar[1], m, rel, t)
    assert U1[0, 0] == pytest.approx(np.exp(t), rel=1e-13)


def test_linear_relaxation_dirichlet_by_hand():
    m = linear_relaxation(1.0)
    dx = 0.1
    samples = np.array([[0.4, -0.2], [0.45, -0.25], [0.5, -0.28]])[:, :, None]
    sp, vstar = split_and_extrap(samples, m, dx)
    rel = dirichlet_component(0, lambda t: 0.7, lambda t: 0.0, 2)
    U0 = boundary_state_n(sp, vstar[0], rel, 0.0)
    l2 = sp.L[1, :, 0]
    # l2 . (0.7, v) = V*_2
    v = (vstar[0][1, 0] - l2[0] * 0.7) / l2[1]
    np.testing.assert_allclose(U0[:, 0], [0.7, v], rtol=1e-13)


def test_prescribed_state_exact():
    m = reactive_euler()
    U_in = m.from_rho_u_v_E_Y(11.0, 6.18, 0.0, 970.0, 1.0)
    samples = np.repeat(m.conserved(5.0, 0.0, 0.0, 400.0, 1.0)[None, :, None], 3, axis=0)
    sp, vstar = split_and_extrap(samples, m, 0.05, count=5)
    U0 = boundary_state_n(sp, vstar[0], prescribed_state(U_in), 0.0)
    np.testing.assert_allclose(U0[:, 0], U_in, rtol=1e-14)


@pytest.mark.parametrize("weights", [LINEAR_WEIGHTS, WENO_WEIGHTS])
def test_second_derivative_cases(weights):
    m = linear_relaxation(1.0)
    dx = 0.01
    x = (np.arange(3) + 0.5) * dx
    const = np.repeat(col(0.3, 0.2)[None], 3, axis=0)
    sp, vstar = split_and_extrap(const, m, dx, weights=weights)
    np.testing.assert_allclose(boundary_second_derivative(sp, vstar[2]), 0.0, atol=1e-12)
    quad = np.stack([np.array([1 + xx * xx, 2 - 3 * xx * xx]) for xx in x])[:, :, None]
    sp, vstar = split_and_extrap(quad, m, dx, weights=weights)
    got = boundary_second_derivative(sp, vstar[2])[:, 0]
    if weights == LINEAR_WEIGHTS:
        # only the quadratic candidate has curvature, carried with weight d_2
        np.testing.assert_allclose(got, (1 - dx - dx * dx) * np.array([2.0, -6.0]), rtol=1e-9)
    else:
        np.testing.assert_allclose(got, [2.0, -6.0], rtol=5e-2)


def test_linear_advection_second_derivative_first_order():
    m = linear_advection()
    g = lambda t: np.sin(3 * t)
    errs = []
    for dx in (0.02, 0.01, 0.005):
        x = (np.arange(3) + 0.5) * dx
        samples = g(0.2 - x).reshape(3, 1, 1)
        sp, vstar = split_and_extrap(samples, m, dx)
        errs.append(abs(boundary_second_derivative(sp, vstar[2])[0, 0] + 9 * np.sin(0.6)))
    assert errs[0] / errs[1] > 1.8 and errs[1] / errs[2] > 1.8


# }}}


# {{{ ghosts


def test_taylor_ghost_example():
    derivs = np.array([1.0, 2.0, 0.0]).reshape(3, 1, 1)
    got = taylor_ghosts(derivs, np.array([[-0.05]]))
    assert got[0, 0, 0] == pytest.approx(0.9)


@given(st.floats(-3, 3), st.floats(0.01, 2))
def test_zero_derivatives_constant(value, xi):
    derivs = np.array([value, 0.0, 0.0]).reshape(3, 1, 1)
    got = taylor_ghosts(derivs, np.array([[-xi], [-2 * xi]]))
    np.testing.assert_array_equal(got[:, 0, 0], value)


def test_example1_ghosts_third_order():
    errs = []
    hs = (1 / 20, 1 / 40, 1 / 80, 1 / 160)
    for dx in hs:
        setup = build_setup(scenario("example1"), dx)
        U = setup.solver.prepare(setup.U0, 0.0)
        x = setup.grid.x_ext
        ghost = np.r_[0:2, -2:0]
        errs.append(np.abs(U[0, ghost] - np.exp(x[ghost])).max())
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 2.7


# }}}


# {{{ stage solves


def linear_cache(Un, model, count=1):
    sp = characteristic_split(Un[0], model, 1.0, count)
    return BoundaryStageCache(sp, Un, 0.0)


def test_explicit_stage_values_linear_advection():
    m = linear_advection()
    g, g1, g2 = 0.8, 0.3, -0.4
    dt = 0.1
    Un = np.array([g, -g1, g2]).reshape(3, 1, 1)
    cache = linear_cache(Un, m)
    tab = ssp_rk3()
    v0 = stage_boundary_value(cache, tab, 0, m, dt)
    d0 = stage_boundary_derivative(cache, tab, 0, m, dt, v0)
    cache.stages.append(StageRecord(v0, d0, 0 * v0, 0 * v0, d0, flux_second=Un[2]))
    v1 = stage_boundary_value(cache, tab, 1, m, dt)
    d1 = stage_boundary_derivative(cache, tab, 1, m, dt, v1)
    assert v1[0, 0] == pytest.approx(g + dt * g1, abs=1e-14)
    assert d1[0, 0] == pytest.approx(-g1 - dt * g2, abs=1e-14)


def test_zero_source_zero_curvature_keeps_derivative():
    m = linear_advection()
    Un = np.array([1.0, 0.25, 0.0]).reshape(3, 1, 1)
    cache = linear_cache(Un, m)
    tab = ars_443()
    dt = 0.05
    for i in range(tab.s):
        v = stage_boundary_value(cache, tab, i, m, dt)
        d = stage_boundary_derivative(cache, tab, i, m, dt, v)
        np.testing.assert_allclose(d, Un[1], atol=1e-15)
        cache.stages.append(StageRecord(v, d, 0 * v, 0 * v, d, flux_second=0 * v))


def test_relaxation_stage_dense_oracle():
    eps = 1.0
    m = linear_relaxation(eps)
    tab = IMEXTableau.from_arrays([[0, 0], [1, 0]], [[0, 0], [0.5, 0.5]])
    dt = 0.2
    Un = np.array([[0.7, -0.1], [0.2, 0.3], [0.0, 0.0]])[:, :, None]
    cache = linear_cache(Un, m)
    v0 = stage_boundary_value(cache, tab, 0, m, dt)
    d0 = stage_boundary_derivative(cache, tab, 0, m, dt, v0)
    Qm = np.array([[0.0, 0.0], [-1 / eps, -1 / eps]])
    A = np.array([[0.0, 1.0], [1.0, 0.0]])
    cache.stages.append(
        StageRecord(v0, d0, (Qm @ v0[:, 0])[:, None], (Qm @ d0[:, 0])[:, None], (A @ d0[:, 0])[:, None], flux_second=0 * v0)
    )
    v1 = stage_boundary_value(cache, tab, 1, m, dt)
    rhs = Un[0, :, 0] - dt * A @ d0[:, 0] + dt * 0.5 * Qm @ v0[:, 0]
    dense = np.linalg.solve(np.eye(2) - dt * 0.5 * Qm, rhs)
    np.testing.assert_allclose(v1[:, 0], dense, rtol=1e-13, atol=1e-15)
    d1 = stage_boundary_derivative(cache, tab, 1, m, dt, v1)
    rhs1 = Un[1, :, 0] + dt * 0.5 * Qm @ d0[:, 0]
    np.testing.assert_allclose(d1[:, 0], np.linalg.solve(np.eye(2) - dt * 0.5 * Qm, rhs1), rtol=1e-13)


def test_recompute_flux_deriv(rng):
    m = linear_relaxation(1.0)
    Un = rng.normal(size=(3, 2, 4))
    cache = linear_cache(Un, m)
    v, d = rng.normal(size=(2, 4)), rng.normal(size=(2, 4))
    cache.stages.append(StageRecord(v, d, 0 * v, 0 * v, matvec(m.jacobian(v), d)))
    np.testing.assert_allclose(cache.recompute_flux_deriv(m, 0), cache.stages[0].flux_deriv, atol=1e-12)


# }}}


# {{{ full operator


def ghosts_of(U, side):
    return U[:, [1, 0]] if side == "left" else U[:, [-2, -1]]


def run_boundary(model, rel, U, grid, side, direction, tab, dt, weights=WENO_WEIGHTS):
    b = ILWBoundary(model, rel, grid.side_stations(side), grid.dx, direction, weights=weights)
    b.begin_step(U, 0.0)
    out = []
    for i in range(tab.s):
        b.fill_stage(i, U, tab, dt)
        out.append(ghosts_of(U, side).copy())
    return np.array(out)


@pytest.mark.parametrize("weights", [LINEAR_WEIGHTS, WENO_WEIGHTS])
def test_constant_field_constant_ghosts(weights):
    m = reactive_euler()
    grid = build_grid_1d(0.0, 1.0, 20, 0.3, 0.8)
    state = m.conserved(1.2, 0.0, 0.3, 2.0, 0.6)
    U = np.repeat(state[:, None], 24, axis=1)
    for side, n in (("left", (1.0,)), ("right", (-1.0,))):
        out = run_boundary(m, wall((n[0], 0.0)), U.copy(), grid, side, n[0], ars_443(), 0.01, weights)
        np.testing.assert_allclose(out, np.broadcast_to(state[None, :, None], out.shape), rtol=1e-11)


def test_right_boundary_mirror(rng):
    # the reflected Euler problem at the left wall equals the original at the right wall
    m = reactive_euler()
    grid = build_grid_1d(0.0, 1.0, 16, 0.35, 0.35)
    x = grid.x_ext
    U = m.conserved(1 + 0.2 * np.sin(3 * x), 0.3 * np.cos(2 * x), 0.1 + 0 * x, 2 + 0.3 * x, 0.5 + 0 * x)
    mirror = U[:, ::-1].copy()
    mirror[1] *= -1.0
    tab = ars_443()
    right = run_boundary(m, wall((-1.0, 0.0)), U.copy(), grid, "right", -1.0, tab, 0.02)
    left = run_boundary(m, wall((1.0, 0.0)), mirror, grid, "left", 1.0, tab, 0.02)
    left[:, 1] *= -1.0
    np.testing.assert_allclose(left, right, rtol=1e-14, atol=1e-14)


def test_outflow_extrapolation_third_order():
    m = scalar_burgers_source()
    errs, hs = [], []
    for n in (20, 40, 80, 160):
        grid = build_grid_1d(0.0, 1.0, n)
        x = grid.x_ext
        U = np.exp(x)[None].copy()
        b = ILWBoundary(m, free_outflow(), grid.side_stations("right"), grid.dx, -1.0, weights=LINEAR_WEIGHTS)
        b.begin_step(U, 0.0)
        assert b.cache.split.p == 0
        errs.append(np.abs(fill_ghosts_time_n(b.cache, b.xi_ghost)[:, 0, 0] - np.exp(x[-2:])).max())
        hs.append(grid.dx)
    assert np.polyfit(np.log(hs), np.log(errs), 1)[0] >= 2.7


# }}}
