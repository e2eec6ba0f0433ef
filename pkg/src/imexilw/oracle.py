"""Closed-form intermediate-stage boundary values for scalar laws under SSP-RK3.

For ``u_t + f(u)_x = 0`` on ``x > 0`` with inflow data ``u(t, 0) = g(t)`` the
boundary treatment reproduces the stage conditions

    u_b^n     = g
    u_b^(1)   = g + dt g'
    u_b^(2)   = g + dt g'/2 + dt^2 g''/4          (f linear)

with a nonlinear correction through ``f'(g + dt g')`` otherwise. These serve as
independent oracles for the stage solves in :mod:`imexilw.boundary1d`.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Sequence

import numpy as np

from .boundary1d import (
    LINEAR_WEIGHTS,
    StageRecord,
    BoundaryStageCache,
    boundary_first_derivative_ilw,
    boundary_second_derivative,
    boundary_state_n,
    characteristic_split,
    dirichlet_component,
    extrapolate,
    extrapolate_characteristics,
    stage_boundary_derivative,
    stage_boundary_value,
)
from .errors import NonInflowBoundary, SolverError
from .models import Model, matvec
from .tableau import IMEXTableau, ssp_rk3

Fn = Callable[[float], float]


@dataclass(frozen=True)
class BoundarySignal:
    """Boundary data ``g`` with exact time derivatives, and the flux derivatives."""

    g: Fn
    dg: Fn
    d2g: Fn
    fp: Callable = lambda u: 1.0
    fpp: Callable = lambda u: 0.0


def carpenter_linear(signal: BoundarySignal, t_n: float, dt: float) -> tuple[float, float, float]:
    """Stage boundary values for ``u_t + u_x = 0``."""
    g, g1, g2 = signal.g(t_n), signal.dg(t_n), signal.d2g(t_n)
    return g, g + dt * g1, g + 0.5 * dt * g1 + 0.25 * dt * dt * g2


def carpenter_nonlinear(signal: BoundarySignal, t_n: float, dt: float) -> tuple[float, float, float]:
    """Stage boundary values for ``u_t + f(u)_x = 0`` with ``f'(g) > 0``."""
    g, g1, g2 = signal.g(t_n), signal.dg(t_n), signal.d2g(t_n)
    a = signal.fp(g)
    if not a > 0.0:
        raise NonInflowBoundary(f"f'(g) = {a} is not positive at t = {t_n}")
    b = signal.fpp(g)
    u1 = g + dt * g1
    a1 = signal.fp(u1)
    u2 = g + 0.25 * dt * (1.0 + a1 / a) * g1 + 0.25 * dt * dt * a1 * (a * g2 - b * g1 * g1) / (a * a)
    return g, u1, u2


def ilw_derivatives(signal: BoundarySignal, t: float) -> tuple[float, float]:
    """Exact ``(u_x, u_xx)`` at the inflow boundary from the PDE."""
    g, g1, g2 = signal.g(t), signal.dg(t), signal.d2g(t)
    a, b = signal.fp(g), signal.fpp(g)
    return -g1 / a, (a * g2 - 2.0 * b * g1 * g1) / a**3


class ScalarLaw(Model):
    """Source-free scalar law ``u_t + f(u)_x = 0``."""

    name = "scalar_law"
    m = 1
    components = ("u",)

    def __init__(self, f: Callable, fp: Callable, fpp: Callable):
        self.f, self.fp, self.fpp = f, fp, fpp

    def flux(self, U, axis=0):
        self._check_axis(axis)
        return self.f(U)

    def jacobian(self, U, axis=0):
        self._check_axis(axis)
        return np.asarray(self.fp(U), float).reshape(U.shape)[np.newaxis] + 0.0

    def eigensystem(self, U, axis=0):
        lam = self.jacobian(U, axis)[0]
        one = np.ones((1, 1) + U.shape[1:])
        return lam, one, one.copy()

    def source(self, U):
        return np.zeros_like(U)

    def source_jacobian(self, U):
        return np.zeros((1,) + U.shape)

    @property
    def has_source(self) -> bool:
        return False


def linear_advection() -> ScalarLaw:
    return ScalarLaw(lambda u: u * 1.0, lambda u: np.ones_like(u), lambda u: np.zeros_like(u))


def burgers() -> ScalarLaw:
    return ScalarLaw(lambda u: 0.5 * u * u, lambda u: u * 1.0, lambda u: np.ones_like(u))


def signal_for(model: ScalarLaw, g: Fn, dg: Fn, d2g: Fn) -> BoundarySignal:
    return BoundarySignal(g, dg, d2g, lambda u: float(model.fp(np.float64(u))), lambda u: float(model.fpp(np.float64(u))))


def solver_stage_values(
    model: Model,
    signal: BoundarySignal,
    samples: np.ndarray,
    dx: float,
    t_n: float,
    dt: float,
    tableau: IMEXTableau | None = None,
    exact_second: bool = True,
    weights: str = LINEAR_WEIGHTS,
) -> list[float]:
    """Left-boundary stage values from the library's stage solves.

    ``samples`` holds ``u`` at the first three interior nodes ``x = dx, 2dx, 3dx``.
    With ``exact_second`` the second normal derivatives come from the PDE;
    otherwise they are extrapolated from ``samples`` as in a simulation.
    """
    tab = tableau or ssp_rk3()
    s = tab.s
    samples = np.asarray(samples, float).reshape(3, 1, 1)
    rel = dirichlet_component(0, signal.g, signal.dg, 1)
    split = characteristic_split(samples[0], model, 1.0, rel.count)
    vstar = extrapolate_characteristics(samples, split, dx, dx, weights=weights)
    U0 = boundary_state_n(split, vstar[0], rel, t_n)
    U1 = boundary_first_derivative_ilw(U0, split, vstar[1], model, rel, t_n)
    ux, uxx = ilw_derivatives(signal, t_n)
    if exact_second:
        U2 = np.full_like(U0, uxx)
        F2 = signal.fpp(float(U0[0, 0])) * ux * ux + signal.fp(float(U0[0, 0])) * uxx
        flux_second = np.full_like(U0, F2)
    else:
        U2 = boundary_second_derivative(split, vstar[2])
        flux_second = extrapolate(model.flux(samples), dx, dx, weights=weights)[2]
    cache = BoundaryStageCache(split, np.stack([U0, U1, U2]), t_n)
    seconds: list[np.ndarray | None] = [flux_second] + [None] * (s - 1)
    out = []
    for i in range(s):
        value = stage_boundary_value(cache, tab, i, model, dt)
        out.append(float(value[0, 0]))
        if i == s - 1:
            break
        deriv = stage_boundary_derivative(cache, tab, i, model, dt, value, _known(seconds, i, tab))
        cache.stages.append(
            StageRecord(
                value=value,
                deriv=deriv,
                source=model.source(value),
                source_deriv=matvec(model.source_jacobian(value), deriv),
                flux_deriv=matvec(model.jacobian(value), deriv),
                flux_second=seconds[i],
            )
        )
    return out


def _known(seconds: Sequence, i: int, tab: IMEXTableau) -> list:
    for j in range(i):
        if seconds[j] is None and tab.a_tilde[i, j] != 0.0:
            raise SolverError(f"second flux derivative of stage {j} is not available")
    return list(seconds[:i])


def comparison_table(dts: Sequence[float] = (1e-1, 5e-2, 2.5e-2, 1.25e-2)) -> list[dict]:
    """Rows comparing solver stage values with the closed forms.

    Linear advection and Burgers with ``g(t) = 1 + sin(t)/2`` at ``t_n = 0.3``,
    interior samples from the exact solution ``u(t, x) = g(t - x)`` (linear case)
    and ``dx = dt``.
    """
    t_n = 0.3
    rows = []
    g, dg, d2g = (lambda t: 1.0 + 0.5 * np.sin(t)), (lambda t: 0.5 * np.cos(t)), (lambda t: -0.5 * np.sin(t))
    for label, model, exact in (("linear", linear_advection(), carpenter_linear), ("burgers", burgers(), carpenter_nonlinear)):
        sig = signal_for(model, g, dg, d2g)
        for dt in dts:
            dx = dt
            xs = dx * np.arange(1, 4)
            samples = _trace_samples(model, sig, t_n, xs)
            ref = exact(sig, t_n, dt)
            ilw = solver_stage_values(model, sig, samples, dx, t_n, dt, exact_second=True)
            ext = solver_stage_values(model, sig, samples, dx, t_n, dt, exact_second=False)
            rows.append(
                {
                    "law": label,
                    "dt": dt,
                    "stage1_diff": float(abs(ilw[1] - ref[1])),
                    "stage2_diff_ilw": float(abs(ilw[2] - ref[2])),
                    "stage2_diff_extrap": float(abs(ext[2] - ref[2])),
                }
            )
    return rows


def _trace_samples(model: ScalarLaw, sig: BoundarySignal, t: float, xs: np.ndarray) -> np.ndarray:
    # exact solution for linear advection; for a nonlinear flux, a cubic in x
    # with the exact boundary value and ILW derivatives
    if float(model.fpp(np.float64(1.0))) == 0.0:
        speed = float(model.fp(np.float64(1.0)))
        return np.array([sig.g(t - x / speed) for x in xs])
    ux, uxx = ilw_derivatives(sig, t)
    return sig.g(t) + ux * xs + 0.5 * uxx * xs**2 + xs**3 / 6.0
