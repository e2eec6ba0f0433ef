"""Ghost-point boundary treatment along a boundary normal.

Everything here works in the inward normal coordinate ``xi`` (``xi = 0`` on the
boundary, ``xi > 0`` inside). Along ``xi`` the system reads

    U_t + d_xi F_xi(U) + T = Q(U)

where ``F_xi`` is the flux along the inward normal (``sigma * F`` in 1D with
``sigma = +1`` on the left and ``-1`` on the right) and ``T`` is the tangential
flux derivative (zero in 1D). Arrays may carry trailing batch dimensions so a
whole row of boundary points is processed at once.

Per RK step:

1. time level n: characteristic split at the first interior node (frozen for
   the step), WENO-type extrapolation of the characteristic variables,
   ``U^{n,(0)}`` from outgoing values plus the boundary relation, ``U^{n,(1)}`` by
   inverse Lax-Wendroff, ``U^{n,(2)}`` from extrapolation;
2. each stage i: ``U^{(i),(0)}`` and ``U^{(i),(1)}`` from the RK stage equation
   written at the boundary point, ``U^{(i),(2)}`` extrapolated from the stage
   field;
3. ghost values from the Taylor expansion ``sum_k xi^k / k! U^{(k)}``.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .errors import (
    ModelError,
    SingularBoundaryJacobian,
    SingularILWSystem,
    SingularStageMatrix,
    SolverError,
    ZeroEigenvalue,
)
from .extrapolation import DEFAULT_EPSILON, linear_extrapolate, weno_extrapolate
from .grid import StationSet
from .models import Model, matmul, matvec
from .newton import batched_solve, implicit_point_solve, newton
from .tableau import IMEXTableau

ZERO_SPEED = 1e-10

CHARACTERISTIC = "characteristic"
PERIODIC = "periodic"
OUTFLOW_COPY = "outflow_copy"
PRESCRIBED_STATE = "prescribed_state"


# {{{ boundary relations


@dataclass
class BoundaryRelation:
    """``p`` relations ``B(U, t) = 0`` with Jacobian ``B_U`` and ``g = -B_t``.

    Callbacks take component-first states ``(m, *batch)`` and return ``(p, *batch)``
    (``B``, ``g``) or ``(p, m, *batch)`` (``B_U``).
    """

    kind: str
    count: int = 0
    B: Callable | None = None
    B_U: Callable | None = None
    g: Callable | None = None
    state: np.ndarray | None = None
    label: str = ""

    def residual(self, U, t):
        return self.B(U, t)

    def jacobian(self, U, t):
        return self.B_U(U, t)

    def time_term(self, U, t):
        return self.g(U, t)


def _broadcast_rows(rows: np.ndarray, U: np.ndarray) -> np.ndarray:
    """Broadcast a ``(p, m)`` matrix to ``(p, m, *batch)``."""
    b = U.shape[1:]
    return np.broadcast_to(rows.reshape(rows.shape + (1,) * len(b)), rows.shape + b).copy()


def dirichlet_component(
    k: int, value: Callable[[float], float], dvalue: Callable[[float], float], m: int
) -> BoundaryRelation:
    """``U_k(t) = value(t)``; ``dvalue`` is its time derivative."""
    e = np.zeros((1, m))
    e[0, k] = 1.0

    def B(U, t):
        return (U[k] - value(t))[None]

    def B_U(U, t):
        return _broadcast_rows(e, U)

    def g(U, t):
        return np.broadcast_to(np.asarray(dvalue(t), float), U.shape[1:])[None].copy()

    return BoundaryRelation(CHARACTERISTIC, 1, B, B_U, g, label=f"dirichlet[{k}]")


def free_outflow() -> BoundaryRelation:
    """No relations: every characteristic leaves the domain."""
    return BoundaryRelation(CHARACTERISTIC, 0, label="outflow")


def prescribed_state(U_in, m: int | None = None) -> BoundaryRelation:
    """``U = U_in`` (all characteristics incoming, time independent)."""
    U_in = np.asarray(U_in, dtype=float)
    m = U_in.shape[0] if m is None else m
    eye = np.eye(m)

    def B(U, t):
        return U - U_in.reshape((m,) + (1,) * (U.ndim - 1))

    def B_U(U, t):
        return _broadcast_rows(eye, U)

    def g(U, t):
        return np.zeros_like(U)

    return BoundaryRelation(PRESCRIBED_STATE, m, B, B_U, g, state=U_in, label="inflow_state")


def wall(normal: Sequence[float], m: int = 5) -> BoundaryRelation:
    """Impermeable static wall: momentum along ``normal`` vanishes (components 1, 2)."""
    row = np.zeros((1, m))
    row[0, 1], row[0, 2] = normal[0], normal[1]

    def B(U, t):
        return (normal[0] * U[1] + normal[1] * U[2])[None]

    def B_U(U, t):
        return _broadcast_rows(row, U)

    def g(U, t):
        return np.zeros((1,) + U.shape[1:])

    return BoundaryRelation(CHARACTERISTIC, 1, B, B_U, g, label="wall")


def periodic() -> BoundaryRelation:
    return BoundaryRelation(PERIODIC, label="periodic")


def outflow_copy() -> BoundaryRelation:
    return BoundaryRelation(OUTFLOW_COPY, label="outflow_copy")


# }}}


# {{{ characteristic split and time-level-n quantities


@dataclass(frozen=True)
class CharacteristicSplit:
    """Eigen-data sorted by decreasing inward speed; the first ``p`` are incoming."""

    lam: np.ndarray
    L: np.ndarray
    R: np.ndarray
    p: int

    @property
    def outgoing(self) -> np.ndarray:
        return self.L[self.p :]


def characteristic_split(
    U0: np.ndarray, model: Model, direction=1.0, count: int | None = None
) -> CharacteristicSplit:
    """Split at the state ``U0`` of the first interior node.

    With ``count=None`` the number of incoming modes is the number of positive
    inward speeds and near-zero speeds raise :class:`ZeroEigenvalue`. Passing
    ``count`` (the number of boundary relations) selects that many fastest
    inward modes, which handles walls where some speeds vanish.
    """
    U0 = np.asarray(U0, dtype=float)
    lam, L, R = model.eigensystem_dir(U0, direction)
    order = np.argsort(-lam, axis=0, kind="stable")
    lam = np.take_along_axis(lam, order, axis=0)
    L = np.take_along_axis(L, order[:, None], axis=0)
    R = np.take_along_axis(R, order[None, :], axis=1)
    if count is None:
        if np.any(np.abs(lam) < ZERO_SPEED):
            raise ZeroEigenvalue("a characteristic speed vanishes at the boundary")
        counts = np.sum(lam > 0.0, axis=0)
        p = int(np.min(counts))
        if np.any(counts != p):
            raise SolverError("incoming characteristic count varies along the boundary")
    else:
        p = int(count)
        if not 0 <= p <= model.m:
            raise ModelError(f"relation count {p} outside [0, {model.m}]")
    return CharacteristicSplit(lam, L, R, p)


WENO_WEIGHTS = "weno"
LINEAR_WEIGHTS = "linear"


def extrapolate(values, dx: float, xi0, eps: float = DEFAULT_EPSILON, weights: str = WENO_WEIGHTS):
    """Derivatives 0..2 at ``xi = 0`` from samples at ``xi0 + k dx``, shape ``(3, *batch)``.

    ``weights="linear"`` uses the linear weights ``d_r`` (smooth data);
    ``"weno"`` the nonlinear ones.
    """
    if weights == LINEAR_WEIGHTS:
        return linear_extrapolate(values, dx, xi0, 0.0)
    if weights == WENO_WEIGHTS:
        return weno_extrapolate(values, dx, xi0, 0.0, eps).values
    raise ValueError(f"unknown extrapolation weights {weights!r}")


def extrapolate_characteristics(
    samples: np.ndarray,
    split: CharacteristicSplit,
    dx: float,
    xi0,
    eps: float = DEFAULT_EPSILON,
    weights: str = WENO_WEIGHTS,
) -> np.ndarray:
    """``V*^{(k)}`` at ``xi = 0`` for all characteristic fields, shape ``(3, m, *batch)``.

    ``samples[k]`` is the state at ``xi0 + k dx``.
    """
    V = np.stack([matvec(split.L, samples[k]) for k in range(3)])
    return extrapolate(V, dx, xi0, eps, weights)


def boundary_state_n(
    split: CharacteristicSplit,
    vstar0: np.ndarray,
    relation: BoundaryRelation,
    t: float,
    guess: np.ndarray | None = None,
) -> np.ndarray:
    """Solve ``{l_m U = V*_m for outgoing m; B(U, t) = 0}`` by Newton."""
    p = split.p
    if p == 0:
        return matvec(split.R, vstar0)
    Lout = split.outgoing
    vout = vstar0[p:]
    if guess is None:
        guess = matvec(split.R, vstar0)

    def res(U):
        return np.concatenate([matvec(Lout, U) - vout, relation.residual(U, t)])

    def jac(U):
        return np.concatenate([Lout, relation.jacobian(U, t)])

    U, _ = newton(res, jac, guess, singular=SingularBoundaryJacobian)
    return U


def boundary_first_derivative_ilw(
    U0: np.ndarray,
    split: CharacteristicSplit,
    vstar1: np.ndarray,
    model: Model,
    relation: BoundaryRelation,
    t: float,
    direction=1.0,
    tangential: np.ndarray | None = None,
) -> np.ndarray:
    """Normal derivative from ``{l_m U' = V*'_m (outgoing); B_U A U' = B_U (Q - T) - g}``."""
    p = split.p
    if p == 0:
        return matvec(split.R, vstar1)
    A = model.jacobian_dir(U0, direction)
    BU = relation.jacobian(U0, t)
    rhs_src = model.source(U0)
    if tangential is not None:
        rhs_src = rhs_src - tangential
    M = np.concatenate([split.outgoing, matmul(BU, A)])
    rhs = np.concatenate([vstar1[p:], matvec(BU, rhs_src) - relation.time_term(U0, t)])
    return batched_solve(M, rhs, SingularILWSystem)


def boundary_second_derivative(split: CharacteristicSplit, vstar2: np.ndarray) -> np.ndarray:
    """``U^{(2)} = L^{-1} V*^{(2)}`` using all extrapolated characteristic fields."""
    return matvec(split.R, vstar2)


def taylor_ghosts(derivs: np.ndarray, xi: np.ndarray) -> np.ndarray:
    """``sum_k xi^k / k! U^{(k)}``; ``derivs`` is ``(3, m, *b)``, ``xi`` is ``(ng, *b)``."""
    xi = np.asarray(xi, dtype=float)[:, None]
    return derivs[0][None] + xi * derivs[1][None] + 0.5 * xi * xi * derivs[2][None]


# }}}


# {{{ stage cache and stage solves


@dataclass
class StageRecord:
    """Boundary-point data of a completed stage ``j``."""

    value: np.ndarray  # U^{(j),(0)}
    deriv: np.ndarray  # U^{(j),(1)}
    source: np.ndarray  # Q(U^{(j),(0)})
    source_deriv: np.ndarray  # Q_U(U^{(j),(0)}) U^{(j),(1)}
    flux_deriv: np.ndarray  # D_j = A_xi(U^{(j),(0)}) U^{(j),(1)}
    flux_second: np.ndarray | None = None  # d_xi_xi F_xi at the boundary
    tangential: np.ndarray | float = 0.0  # d_t F_t(U^{(j),(0)})
    mixed: np.ndarray | float = 0.0  # d_t (A_t U^{(j),(1)})


@dataclass
class BoundaryStageCache:
    split: CharacteristicSplit
    Un: np.ndarray  # (3, m, *b): U^{n,(0)}, U^{n,(1)}, U^{n,(2)}
    t_n: float
    stages: list[StageRecord] = field(default_factory=list)

    def recompute_flux_deriv(self, model: Model, j: int, direction=1.0) -> np.ndarray:
        st = self.stages[j]
        return matvec(model.jacobian_dir(st.value, direction), st.deriv)


def _value_rhs(cache: BoundaryStageCache, tab: IMEXTableau, i: int, dt: float) -> np.ndarray:
    rhs = cache.Un[0].copy()
    for j in range(i):
        st = cache.stages[j]
        if tab.a_tilde[i, j] != 0.0:
            rhs = rhs - dt * tab.a_tilde[i, j] * (st.flux_deriv + st.tangential)
        if tab.a[i, j] != 0.0:
            rhs = rhs + dt * tab.a[i, j] * st.source
    return rhs


def stage_boundary_value(
    cache: BoundaryStageCache, tableau: IMEXTableau, i: int, model: Model, dt: float
) -> np.ndarray:
    """``U = U^{n,(0)} - dt sum ã_ij (D_j + T_j) + dt sum a_ij Q_j + dt a_ii Q(U)``."""
    rhs = _value_rhs(cache, tableau, i, dt)
    return implicit_point_solve(rhs, tableau.a[i, i], dt, model)


def _deriv_rhs(cache, tab, i, dt, second):
    rhs = cache.Un[1].copy()
    for j in range(i):
        st = cache.stages[j]
        if tab.a_tilde[i, j] != 0.0:
            ff = second[j] if second is not None else st.flux_second
            if ff is None:
                raise SolverError(f"second flux derivative of stage {j} not available")
            rhs = rhs - dt * tab.a_tilde[i, j] * (ff + st.mixed)
        if tab.a[i, j] != 0.0:
            rhs = rhs + dt * tab.a[i, j] * st.source_deriv
    return rhs


def stage_boundary_derivative(
    cache: BoundaryStageCache,
    tableau: IMEXTableau,
    i: int,
    model: Model,
    dt: float,
    value: np.ndarray,
    second: Sequence[np.ndarray] | None = None,
) -> np.ndarray:
    """Solve ``(I - dt a_ii Q_U) U' = U^{n,(1)} - dt sum ã_ij (F''_j + M_j) + dt sum a_ij Q_U U'_j``.

    ``second[j]`` overrides the stored second normal flux derivative of stage j,
    which lets callers supply exact data.
    """
    rhs = _deriv_rhs(cache, tableau, i, dt, second)
    coef = dt * tableau.a[i, i]
    if coef == 0.0:
        return rhs
    J = model.source_jacobian(value)
    m = rhs.shape[0]
    M = np.eye(m).reshape((m, m) + (1,) * (rhs.ndim - 1)) - coef * J
    return batched_solve(M, rhs, SingularStageMatrix)


def stage_fill_ghosts(
    value: np.ndarray, deriv: np.ndarray, second: np.ndarray, xi_ghost: np.ndarray
) -> np.ndarray:
    return taylor_ghosts(np.stack([value, deriv, second]), xi_ghost)


def fill_ghosts_time_n(cache: BoundaryStageCache, xi_ghost: np.ndarray) -> np.ndarray:
    return taylor_ghosts(cache.Un, xi_ghost)


# }}}


# {{{ orchestration over a station set


class ILWBoundary:
    """Boundary treatment for a set of stations sharing the inward direction.

    ``direction`` is the 1D sign ``sigma`` or the 2D inward unit normal.
    ``tangent_axis`` enables the tangential terms (2D only).
    """

    def __init__(
        self,
        model: Model,
        relation: BoundaryRelation,
        stations: StationSet,
        dx: float,
        direction,
        tangent_axis: int | None = None,
        eps: float = DEFAULT_EPSILON,
        weights: str = WENO_WEIGHTS,
    ):
        if relation.kind not in (CHARACTERISTIC, PRESCRIBED_STATE):
            raise ValueError(f"ILWBoundary cannot handle {relation.kind!r} relations")
        self.model = model
        self.relation = relation
        self.stations = stations
        self.dx = dx
        self.direction = direction
        self.tangent_axis = tangent_axis
        self.eps = eps
        self.weights = weights
        self.xi0 = stations.xi0
        self.xi_ghost = stations.ghost_xi(dx)
        self.cache: BoundaryStageCache | None = None

    def _extrap(self, values):
        return extrapolate(values, self.dx, self.xi0, self.eps, self.weights)

    def _samples(self, U: np.ndarray) -> np.ndarray:
        flat = U.reshape(U.shape[0], -1)
        return np.moveaxis(flat[:, self.stations.line], 1, 0)

    def _tangential(self, values: np.ndarray) -> np.ndarray | float:
        if self.tangent_axis is None or self.stations.tangential is None:
            return 0.0
        return self.stations.tangential.apply(values, self.dx)

    def begin_step(self, U: np.ndarray, t_n: float) -> None:
        samples = self._samples(U)
        split = characteristic_split(samples[0], self.model, self.direction, self.relation.count)
        vstar = extrapolate_characteristics(
            samples, split, self.dx, self.xi0, self.eps, self.weights
        )
        U0 = boundary_state_n(split, vstar[0], self.relation, t_n)
        T = 0.0
        if self.tangent_axis is not None:
            T = self._tangential(self.model.flux(U0, self.tangent_axis))
        U1 = boundary_first_derivative_ilw(
            U0,
            split,
            vstar[1],
            self.model,
            self.relation,
            t_n,
            self.direction,
            None if np.ndim(T) == 0 else T,
        )
        U2 = boundary_second_derivative(split, vstar[2])
        self.cache = BoundaryStageCache(split, np.stack([U0, U1, U2]), t_n)

    def fill_stage(
        self, i: int, U: np.ndarray, tableau: IMEXTableau, dt: float, record: bool = True
    ) -> None:
        """Compute the stage-i boundary data and write the ghost values into ``U``."""
        cache = self.cache
        model = self.model
        a_ii = tableau.a[i, i]
        rhs0 = _value_rhs(cache, tableau, i, dt)
        value = implicit_point_solve(rhs0, a_ii, dt, model)
        rhs1 = _deriv_rhs(cache, tableau, i, dt, None)
        coef = dt * a_ii
        if coef == 0.0:
            deriv = rhs1
        else:
            m = rhs1.shape[0]
            M = np.eye(m).reshape((m, m) + (1,) * (rhs1.ndim - 1))
            M = M - coef * model.source_jacobian(value)
            deriv = batched_solve(M, rhs1, SingularStageMatrix)

        samples = self._samples(U)
        V = np.stack([matvec(cache.split.L, samples[k]) for k in range(3)])
        second = matvec(cache.split.R, self._extrap(V)[2])
        ghosts = stage_fill_ghosts(value, deriv, second, self.xi_ghost)
        self._write(U, ghosts)

        if not record:
            return
        if coef > 0.0:
            source = (value - rhs0) / coef
            source_deriv = (deriv - rhs1) / coef
        else:
            source = model.source(value)
            source_deriv = matvec(model.source_jacobian(value), deriv)
        Fs = np.stack([model.flux_dir(samples[k], self.direction) for k in range(3)])
        flux_second = self._extrap(Fs)[2]
        rec = StageRecord(
            value=value,
            deriv=deriv,
            source=source,
            source_deriv=source_deriv,
            flux_deriv=matvec(model.jacobian_dir(value, self.direction), deriv),
            flux_second=flux_second,
        )
        if self.tangent_axis is not None:
            ax = self.tangent_axis
            rec.tangential = self._tangential(model.flux(value, ax))
            rec.mixed = self._tangential(matvec(model.jacobian(value, ax), deriv))
        cache.stages.append(rec)

    def _write(self, U: np.ndarray, ghosts: np.ndarray) -> None:
        flat = U.reshape(U.shape[0], -1)
        st = self.stations
        for layer in (0, 1):
            w = st.writes[layer]
            flat[:, st.ghosts[layer, w]] = ghosts[layer][:, w]


class CopyBoundary:
    """Zeroth-order outflow: ghost layer k copies fluid layer k along the normal."""

    def __init__(self, stations: StationSet):
        self.stations = stations

    def begin_step(self, U, t_n) -> None:
        pass

    def fill_stage(self, i, U, tableau, dt, record=True) -> None:
        flat = U.reshape(U.shape[0], -1)
        st = self.stations
        for layer in (0, 1):
            w = st.writes[layer]
            flat[:, st.ghosts[layer, w]] = flat[:, st.line[layer, w]]


class StateBoundary:
    """Ghosts hold a fixed state (supersonic inflow)."""

    def __init__(self, stations: StationSet, state):
        self.stations = stations
        self.state = np.asarray(state, dtype=float)

    def begin_step(self, U, t_n) -> None:
        pass

    def fill_stage(self, i, U, tableau, dt, record=True) -> None:
        flat = U.reshape(U.shape[0], -1)
        st = self.stations
        for layer in (0, 1):
            w = st.writes[layer]
            flat[:, st.ghosts[layer, w]] = self.state[:, None]


def make_boundary(
    model: Model,
    relation: BoundaryRelation,
    stations: StationSet,
    dx: float,
    direction,
    tangent_axis: int | None = None,
    eps: float = DEFAULT_EPSILON,
    weights: str = WENO_WEIGHTS,
):
    """Pick the boundary operator for a relation kind (periodic is handled by the grid)."""
    if relation.kind == OUTFLOW_COPY:
        return CopyBoundary(stations)
    if relation.kind == PRESCRIBED_STATE and np.ndim(direction) != 0:
        return StateBoundary(stations, relation.state)
    if relation.kind == PERIODIC:
        return None
    return ILWBoundary(model, relation, stations, dx, direction, tangent_axis, eps, weights)


# }}}
