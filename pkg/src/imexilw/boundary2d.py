"""Boundary treatment on axis-aligned faces of 2D Cartesian meshes.

At a foot point ``P0`` on a face the local frame has its ``x̂`` axis along the
outward normal (angle ``theta`` to the x axis) and ``ŷ`` along the face. For an
axis-aligned face the rotation only permutes and negates the momentum
components, so working in the original variables with the flux along the
inward normal,

    F_xi(U) = n_x F(U) + n_y G(U),   n = inward unit normal,

is the same computation as the rotated one followed by rotating back. The
normal line through each ghost is a grid line, so the 1D machinery of
:mod:`boundary1d` applies per foot point with one extra term: the derivative
along the face of the tangential flux, obtained by differencing the per-line
boundary values along the face.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

import numpy as np

from .boundary1d import (
    CopyBoundary,
    ILWBoundary,
    StateBoundary,
    WENO_WEIGHTS,
    prescribed_state,
    wall,
)
from .errors import ConfigError, GeometryError, MissingStencil
from .extrapolation import DEFAULT_EPSILON
from .grid import Grid2D, StationSet
from .models import Model

WALL = "wall"
OUTFLOW = "outflow_copy"
INFLOW = "inflow_state"
PERIODIC = "periodic"
FACE_KINDS = (WALL, OUTFLOW, INFLOW, PERIODIC)

_THETA = {(0, 1): 0.0, (0, -1): math.pi, (1, 1): math.pi / 2, (1, -1): -math.pi / 2}


@dataclass(frozen=True)
class LocalFrame:
    """Foot point ``P0`` and angle ``theta`` of the outward normal to the x axis."""

    P0: tuple[float, float]
    theta: float

    @property
    def T(self) -> np.ndarray:
        c, s = math.cos(self.theta), math.sin(self.theta)
        return np.array([[c, s], [-s, c]])

    @classmethod
    def for_stations(cls, stations: StationSet, P0=(0.0, 0.0)) -> "LocalFrame":
        return cls(tuple(P0), _THETA[(stations.axis, stations.sign)])


def rotate_state(U: np.ndarray, theta: float, model: Model) -> np.ndarray:
    """Rotate the momentum components of ``U`` into the frame at angle ``theta``."""
    U = np.array(U, dtype=float, copy=True)
    if model.velocity is None:
        return U
    i, j = model.velocity
    c, s = math.cos(theta), math.sin(theta)
    mu, mv = U[i].copy(), U[j].copy()
    U[i] = c * mu + s * mv
    U[j] = -s * mu + c * mv
    return U


def normal_line_samples(stations: StationSet, U: np.ndarray, which=None) -> np.ndarray:
    """Values at the three fluid nodes behind each station, shape ``(3, m, ns)``.

    ``which`` selects stations (default all).
    """
    flat = U.reshape(U.shape[0], -1)
    line = stations.line if which is None else stations.line[:, which]
    vals = np.moveaxis(flat[:, line], 1, 0)
    if not np.all(np.isfinite(vals)):
        raise MissingStencil("normal line samples touch unset nodes")
    return vals


def tangential_derivative(stations: StationSet, values: np.ndarray, dx: float) -> np.ndarray:
    """Derivative along the face (towards +tangent axis) of per-station values ``(m, ns)``."""
    if stations.tangential is None:
        raise MissingStencil("station set has no tangential stencil")
    return stations.tangential.apply(values, dx)


def outflow_copy(stations: StationSet, U: np.ndarray) -> None:
    """Ghost layer k takes the value of fluid layer k along the normal."""
    CopyBoundary(stations).fill_stage(0, U, None, 0.0)


def face_boundary_update(
    boundary: ILWBoundary, i: int, U: np.ndarray, tableau, dt: float, record: bool = True
) -> None:
    """Stage ``i`` solves at all foot points of ``boundary`` and the ghost fill."""
    boundary.fill_stage(i, U, tableau, dt, record)


def _parse_kind(spec) -> tuple[str, np.ndarray | None]:
    if isinstance(spec, str):
        kind, state = spec, None
    elif isinstance(spec, Mapping):
        if len(spec) != 1:
            raise ConfigError(f"face kind mapping needs exactly one key, got {dict(spec)}")
        (kind, state), = spec.items()
    else:
        kind, state = spec[0], (spec[1] if len(spec) > 1 else None)
    if kind not in FACE_KINDS:
        raise ConfigError(f"unknown face kind {kind!r}; expected one of {FACE_KINDS}")
    if kind == INFLOW:
        if state is None:
            raise ConfigError("inflow_state needs a state vector")
        state = np.asarray(state, dtype=float)
    return kind, state


def face_kind(kinds: Mapping, face: str, default=WALL):
    """Kind for ``face``: exact name, then ``obstacle{k}`` / ``obstacles``, then default."""
    if face in kinds:
        return kinds[face]
    if face.startswith("obstacle"):
        head = face.split(":")[0]
        if head in kinds:
            return kinds[head]
        if "obstacles" in kinds:
            return kinds["obstacles"]
    return kinds.get("default", default)


def build_boundaries_2d(
    grid: Grid2D,
    model: Model,
    kinds: Mapping,
    eps: float = DEFAULT_EPSILON,
    weights: str = WENO_WEIGHTS,
    inflow_conserved=None,
) -> list:
    """Boundary operators for every station set of ``grid``.

    ``kinds`` maps face names (``left``, ``right``, ``bottom``, ``top``,
    ``obstacle{k}:{side}``, ``obstacle{k}``, ``obstacles``, ``default``) to
    ``"wall"``, ``"outflow_copy"``, ``"periodic"`` or ``{"inflow_state": U}``
    with ``U`` conserved. ``inflow_conserved`` optionally converts a given state
    vector to conserved variables.
    """
    out = []
    for st in grid.stations:
        if st.size == 0:
            continue
        resolved = [_parse_kind(face_kind(kinds, f)) for f in st.faces]
        groups: dict[tuple, list[int]] = {}
        for s, (kind, state) in enumerate(resolved):
            key = (kind, None if state is None else tuple(state))
            groups.setdefault(key, []).append(s)
        for (kind, state), members in groups.items():
            sub = st.subset(np.asarray(members))
            if kind == PERIODIC:
                if not grid.periodic[st.axis]:
                    raise ConfigError(
                        f"face {sub.faces[0]} is marked periodic but axis {st.axis} is not"
                    )
                continue
            if kind == OUTFLOW:
                out.append(CopyBoundary(sub))
            elif kind == INFLOW:
                U_in = np.asarray(state, dtype=float)
                if inflow_conserved is not None:
                    U_in = inflow_conserved(U_in)
                out.append(StateBoundary(sub, U_in))
            else:
                n = sub.inward
                rel = wall(n, model.m)
                out.append(
                    ILWBoundary(model, rel, sub, grid.dx, n, 1 - st.axis, eps, weights)
                )
    return out


def check_periodic_faces(grid: Grid2D, kinds: Mapping) -> None:
    """Periodic axes must be declared on both domain faces and nowhere else."""
    for axis, (lo, hi) in enumerate((("left", "right"), ("bottom", "top"))):
        k_lo = _parse_kind(face_kind(kinds, lo))[0]
        k_hi = _parse_kind(face_kind(kinds, hi))[0]
        if grid.periodic[axis] != (k_lo == PERIODIC) or (k_lo == PERIODIC) != (k_hi == PERIODIC):
            raise GeometryError(f"faces {lo}/{hi} and the grid disagree on periodicity")
