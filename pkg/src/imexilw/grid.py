"""Uniform 1D lines and 2D Cartesian meshes with two ghost layers per boundary.

Fields are stored on an extended index box that includes two ghost layers on
each side: 1D arrays have shape ``(m, n + 4)`` and 2D arrays ``(m, nx + 4, ny + 4)``.
Interior node ``i`` sits at extended index ``i + 2``.

Boundary handling is organised around *stations*: a station is a fluid node
adjacent to a boundary face, together with the two fluid nodes behind it along
the inward normal and the two ghost nodes in front of it. Stations sharing a
face orientation are grouped in a :class:`StationSet` so boundary work can be
vectorised.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np

from .errors import (
    GeometryError,
    GeometryOverlap,
    InvalidEta,
    MissingStencil,
    ObstacleOutsideDomain,
    TooFewNodes,
)

NG = 2  # ghost layers, the WENO3 stencil half-width

UNUSED, INTERIOR, GHOST, PERIODIC = 0, 1, 2, 3

SIDES = ("left", "right", "bottom", "top")
_SIDE_DIR = {"left": (0, -1), "right": (0, 1), "bottom": (1, -1), "top": (1, 1)}
_DIR_SIDE = {v: k for k, v in _SIDE_DIR.items()}


def _check_eta(eta: float) -> float:
    eta = float(eta)
    if not 0.0 < eta < 1.0:
        raise InvalidEta(f"boundary offset eta must lie in (0, 1), got {eta}")
    return eta


@dataclass(frozen=True)
class TangentialStencil:
    """Three-point differences along a face: ``d/dt v = sum_k w[k] v[idx[k]] / dx``."""

    idx: np.ndarray  # (3, ns) station indices
    w: np.ndarray  # (3, ns)

    def apply(self, values: np.ndarray, dx: float) -> np.ndarray:
        return np.einsum("kn,mkn->mn", self.w, values[:, self.idx]) / dx


@dataclass(frozen=True)
class StationSet:
    """Boundary stations sharing one outward face normal.

    ``line[k]`` are flat spatial indices of the k-th fluid node behind the face
    (k = 0 nearest); ``ghosts[k]`` those of ghost layer k + 1. ``xi0`` is the
    distance from the face to ``line[0]``; ghost layer k + 1 lies at inward
    coordinate ``xi0 - (k + 1) dx``.
    """

    axis: int
    sign: int  # +1 if the outward normal points along +axis
    line: np.ndarray
    ghosts: np.ndarray
    writes: np.ndarray
    xi0: np.ndarray
    faces: tuple[str, ...] = ()
    tangential: TangentialStencil | None = None

    @property
    def size(self) -> int:
        return self.line.shape[1]

    @property
    def inward(self) -> tuple[float, float]:
        n = [0.0, 0.0]
        n[self.axis] = -float(self.sign)
        return n[0], n[1]

    def ghost_xi(self, dx: float) -> np.ndarray:
        return np.stack([self.xi0 - dx, self.xi0 - 2.0 * dx])

    def subset(self, keep: np.ndarray) -> "StationSet":
        """Stations selected by ``keep`` (indices or mask), tangential stencil remapped.

        Every station referenced by a kept station's stencil must be kept too,
        which holds when whole faces are selected.
        """
        keep = np.asarray(keep)
        if keep.dtype == bool:
            keep = np.nonzero(keep)[0]
        tang = None
        if self.tangential is not None:
            remap = np.full(self.size, -1)
            remap[keep] = np.arange(keep.size)
            idx = remap[self.tangential.idx[:, keep]]
            if np.any(idx < 0):
                raise GeometryError("station subset cuts through a tangential stencil")
            tang = TangentialStencil(idx, self.tangential.w[:, keep])
        return StationSet(
            self.axis,
            self.sign,
            self.line[:, keep],
            self.ghosts[:, keep],
            self.writes[:, keep],
            self.xi0[keep],
            tuple(np.asarray(self.faces, dtype=object)[keep]) if self.faces else (),
            tang,
        )


# {{{ 1D


@dataclass(frozen=True)
class Grid1D:
    a: float
    b: float
    n: int
    dx: float
    eta_left: float
    eta_right: float
    periodic: bool = False

    @property
    def ndim(self) -> int:
        return 1

    @property
    def shape(self) -> tuple[int]:
        return (self.n + 2 * NG,)

    @property
    def x_ext(self) -> np.ndarray:
        return self.a + (np.arange(-NG, self.n + NG) + self.eta_left) * self.dx

    @property
    def x(self) -> np.ndarray:
        return self.x_ext[NG:-NG]

    @property
    def interior(self) -> slice:
        return slice(NG, self.n + NG)

    @property
    def mask(self) -> np.ndarray:
        m = np.full(self.shape, PERIODIC if self.periodic else GHOST, dtype=np.int8)
        m[self.interior] = INTERIOR
        return m

    def side_stations(self, side: str) -> StationSet:
        """Station for the ``left`` or ``right`` end of the line."""
        n = self.n
        if side == "left":
            line = np.array([[NG], [NG + 1], [NG + 2]])
            ghosts = np.array([[NG - 1], [NG - 2]])
            xi0, sign = self.eta_left * self.dx, -1
        elif side == "right":
            line = np.array([[n + 1], [n], [n - 1]])
            ghosts = np.array([[n + 2], [n + 3]])
            xi0, sign = self.eta_right * self.dx, 1
        else:
            raise GeometryError(f"unknown 1D side {side!r}")
        return StationSet(
            0, sign, line, ghosts, np.ones((2, 1), bool), np.array([xi0]), (side,)
        )

    def wrap_periodic(self, U: np.ndarray) -> None:
        n = self.n
        U[..., :NG] = U[..., n : n + NG]
        U[..., n + NG :] = U[..., NG : 2 * NG]


def build_grid_1d(
    a: float,
    b: float,
    N: int,
    eta_left: float = 0.5,
    eta_right: float = 0.5,
    periodic: bool = False,
) -> Grid1D:
    """``N`` interior nodes from ``a + eta_left dx`` to ``b - eta_right dx``.

    A periodic line uses ``dx = (b - a)/N`` and ignores ``eta_right``.
    """
    if not b > a:
        raise GeometryError(f"need b > a, got [{a}, {b}]")
    if int(N) != N or N < 6:
        raise TooFewNodes(f"need at least 6 interior nodes, got {N}")
    N = int(N)
    el = _check_eta(eta_left)
    if periodic:
        dx = (b - a) / N
        er = 1.0 - el
    else:
        er = _check_eta(eta_right)
        dx = (b - a) / (N - 1 + el + er)
    return Grid1D(float(a), float(b), N, dx, el, er, periodic)


# }}}


# {{{ 2D


@dataclass(frozen=True)
class Rect:
    x0: float
    x1: float
    y0: float
    y1: float

    @classmethod
    def from_seq(cls, r: Sequence[float] | "Rect") -> "Rect":
        if isinstance(r, Rect):
            return r
        if len(r) != 4:
            raise GeometryError(f"rectangle needs 4 numbers (x0, x1, y0, y1), got {r}")
        x0, x1, y0, y1 = (float(v) for v in r)
        if not (x1 > x0 and y1 > y0):
            raise GeometryError(f"degenerate rectangle {r}")
        return cls(x0, x1, y0, y1)

    def contains_closed(self, x, y):
        return (x >= self.x0) & (x <= self.x1) & (y >= self.y0) & (y <= self.y1)

    def lo(self, axis: int) -> float:
        return self.x0 if axis == 0 else self.y0

    def hi(self, axis: int) -> float:
        return self.x1 if axis == 0 else self.y1


@dataclass(frozen=True)
class GhostInfo:
    """A ghost node ``P`` with foot point ``P0`` on its face, outward angle and distance."""

    index: tuple[int, int]
    P: tuple[float, float]
    P0: tuple[float, float]
    theta: float
    delta: float


@dataclass(frozen=True)
class Grid2D:
    domain: Rect
    obstacles: tuple[Rect, ...]
    dx: float
    eta: float
    nx: int
    ny: int
    periodic: tuple[bool, bool]
    mask: np.ndarray = field(repr=False)
    stations: tuple[StationSet, ...] = field(repr=False)

    @property
    def ndim(self) -> int:
        return 2

    @property
    def shape(self) -> tuple[int, int]:
        return (self.nx + 2 * NG, self.ny + 2 * NG)

    @property
    def x_ext(self) -> np.ndarray:
        return self.domain.x0 + (np.arange(-NG, self.nx + NG) + self.eta) * self.dx

    @property
    def y_ext(self) -> np.ndarray:
        return self.domain.y0 + (np.arange(-NG, self.ny + NG) + self.eta) * self.dx

    @property
    def coords(self) -> tuple[np.ndarray, np.ndarray]:
        return np.meshgrid(self.x_ext, self.y_ext, indexing="ij")

    @property
    def interior(self) -> np.ndarray:
        return self.mask == INTERIOR

    @property
    def box(self) -> tuple[slice, slice]:
        """Slices of the extended box covering the index range of interior nodes."""
        return slice(NG, self.nx + NG), slice(NG, self.ny + NG)

    def faces(self) -> list[str]:
        seen: list[str] = []
        for st in self.stations:
            for f in st.faces:
                if f not in seen:
                    seen.append(f)
        return seen

    def wrap_periodic(self, U: np.ndarray) -> None:
        if self.periodic[0]:
            n = self.nx
            U[:, :NG] = U[:, n : n + NG]
            U[:, n + NG :] = U[:, NG : 2 * NG]
        if self.periodic[1]:
            n = self.ny
            U[:, :, :NG] = U[:, :, n : n + NG]
            U[:, :, n + NG :] = U[:, :, NG : 2 * NG]


def _fluid(domain: Rect, obstacles: Sequence[Rect], X, Y, periodic) -> np.ndarray:
    inside_x = (X > domain.x0) & (X < domain.x1)
    inside_y = (Y > domain.y0) & (Y < domain.y1)
    if periodic[0]:
        inside_x = np.ones_like(inside_x)
    if periodic[1]:
        inside_y = np.ones_like(inside_y)
    fluid = inside_x & inside_y
    for ob in obstacles:
        fluid &= ~ob.contains_closed(X, Y)
    return fluid


def _count(length: float, dx: float, what: str) -> int:
    n = length / dx
    k = int(round(n))
    if k < 1 or abs(n - k) > 1e-8 * max(1.0, n):
        raise GeometryError(f"{what} length {length} is not a multiple of dx = {dx}")
    return k


def build_grid_2d(
    domain_rect: Sequence[float] | Rect,
    obstacles: Sequence[Sequence[float] | Rect] = (),
    dx: float = 0.05,
    eta: float = 0.5,
    periodic: tuple[bool, bool] = (False, False),
) -> Grid2D:
    """Mesh ``x_i = x0 + (i + eta) dx`` (same in y) over a rectangle minus obstacles.

    Obstacles are closed rectangles; nodes on their edges are not fluid.
    """
    dom = Rect.from_seq(domain_rect)
    obs = tuple(Rect.from_seq(o) for o in obstacles)
    eta = _check_eta(eta)
    if not dx > 0.0:
        raise GeometryError("dx must be positive")
    periodic = (bool(periodic[0]), bool(periodic[1]))
    tol = 1e-12 * max(abs(dom.x1 - dom.x0), abs(dom.y1 - dom.y0))
    for k, o in enumerate(obs):
        if (
            o.x0 < dom.x0 - tol
            or o.x1 > dom.x1 + tol
            or o.y0 < dom.y0 - tol
            or o.y1 > dom.y1 + tol
        ):
            raise ObstacleOutsideDomain(f"obstacle {k} {o} leaves the domain {dom}")
        for j in range(k):
            p = obs[j]
            if o.x0 < p.x1 and p.x0 < o.x1 and o.y0 < p.y1 and p.y0 < o.y1:
                raise GeometryOverlap(f"obstacles {j} and {k} overlap")
    nx = _count(dom.x1 - dom.x0, dx, "domain x")
    ny = _count(dom.y1 - dom.y0, dx, "domain y")

    x = dom.x0 + (np.arange(-NG, nx + NG) + eta) * dx
    y = dom.y0 + (np.arange(-NG, ny + NG) + eta) * dx
    X, Y = np.meshgrid(x, y, indexing="ij")
    fluid = _fluid(dom, obs, X, Y, periodic)
    # periodic ghost columns/rows are copies, not fluid unknowns
    core = np.zeros_like(fluid)
    core[NG : nx + NG, NG : ny + NG] = True
    interior = fluid & core
    if not interior.any():
        raise GeometryError("geometry has no interior nodes")

    mask = np.zeros(X.shape, dtype=np.int8)
    mask[interior] = INTERIOR
    mask[fluid & ~core] = PERIODIC
    stations = _find_stations(dom, obs, dx, X, Y, interior, fluid, mask, periodic)
    return Grid2D(dom, obs, float(dx), eta, nx, ny, periodic, mask, stations)


def _face_of(dom: Rect, obs: Sequence[Rect], axis: int, sign: int, xg: float, yg: float):
    """Face crossed when stepping from a fluid node to the non-fluid node (xg, yg)."""
    for k, o in enumerate(obs):
        if o.contains_closed(xg, yg):
            side = {(0, 1): "left", (0, -1): "right", (1, 1): "bottom", (1, -1): "top"}[
                (axis, sign)
            ]
            pos = o.lo(axis) if sign > 0 else o.hi(axis)
            return f"obstacle{k}:{side}", pos
    side = _DIR_SIDE[(axis, sign)]
    pos = dom.hi(axis) if sign > 0 else dom.lo(axis)
    return side, pos


def _find_stations(dom, obs, dx, X, Y, interior, fluid, mask, periodic):
    shape = X.shape
    flat = np.arange(X.size).reshape(shape)
    cand = []  # per direction: dict of arrays
    for axis in (0, 1):
        for sign in (-1, 1):
            if periodic[axis]:
                # only obstacle faces can be normal to a periodic axis
                pass
            sh = [0, 0]
            sh[axis] = sign
            ii, jj = np.nonzero(interior)
            i1, j1 = ii + sh[0], jj + sh[1]
            nonfluid = ~fluid[i1, j1]
            ii, jj, i1, j1 = ii[nonfluid], jj[nonfluid], i1[nonfluid], j1[nonfluid]
            if ii.size == 0:
                continue
            i2, j2 = ii + 2 * sh[0], jj + 2 * sh[1]
            if np.any(fluid[i2, j2]):
                raise GeometryError(
                    "an obstacle is thinner than two cells; ghost layers would overlap fluid"
                )
            ib1, jb1 = ii - sh[0], jj - sh[1]
            ib2, jb2 = ii - 2 * sh[0], jj - 2 * sh[1]
            ok = (
                (ib2 >= 0)
                & (jb2 >= 0)
                & (ib2 < shape[0])
                & (jb2 < shape[1])
            )
            ok &= interior[np.clip(ib1, 0, shape[0] - 1), np.clip(jb1, 0, shape[1] - 1)]
            ok &= interior[np.clip(ib2, 0, shape[0] - 1), np.clip(jb2, 0, shape[1] - 1)]
            if not np.all(ok):
                k = int(np.argmin(ok))
                raise MissingStencil(
                    f"fewer than 3 fluid nodes along the normal at ({X[ii[k], jj[k]]:.6g}, "
                    f"{Y[ii[k], jj[k]]:.6g})"
                )
            faces, xi0 = [], np.empty(ii.size)
            coord = X if axis == 0 else Y
            for k in range(ii.size):
                name, pos = _face_of(dom, obs, axis, sign, X[i1[k], j1[k]], Y[i1[k], j1[k]])
                faces.append(name)
                xi0[k] = abs(pos - coord[ii[k], jj[k]])
            cand.append(
                dict(
                    axis=axis,
                    sign=sign,
                    line=np.stack([flat[ii, jj], flat[ib1, jb1], flat[ib2, jb2]]),
                    ghosts=np.stack([flat[i1, j1], flat[i2, j2]]),
                    xi0=xi0,
                    faces=tuple(faces),
                    tang=(jj if axis == 0 else ii),
                )
            )

    # assign each ghost to its nearest foot point; ties go to the x-normal face
    rows = []
    for g, c in enumerate(cand):
        ns = c["xi0"].size
        for layer in (0, 1):
            dist = (layer + 1) * dx - c["xi0"]
            rows.append(
                np.stack(
                    [
                        c["ghosts"][layer].astype(float),
                        np.round(dist / dx, 9),
                        np.full(ns, c["axis"], float),
                        np.full(ns, g, float),
                        np.full(ns, layer, float),
                        np.arange(ns, dtype=float),
                    ]
                )
            )
    writes = [np.zeros((2, c["xi0"].size), bool) for c in cand]
    if rows:
        table = np.concatenate(rows, axis=1)
        order = np.lexsort((table[2], table[1], table[0]))
        table = table[:, order]
        first = np.ones(table.shape[1], bool)
        first[1:] = table[0, 1:] != table[0, :-1]
        for col in np.nonzero(first)[0]:
            g, layer, s = int(table[3, col]), int(table[4, col]), int(table[5, col])
            writes[g][layer, s] = True
        ghost_nodes = table[0, first].astype(int)
        mask.reshape(-1)[ghost_nodes] = GHOST

    out = []
    for c, w in zip(cand, writes):
        st = StationSet(
            c["axis"], c["sign"], c["line"], c["ghosts"], w, c["xi0"], c["faces"]
        )
        tang_axis = 1 - c["axis"]
        n_t = shape[tang_axis] - 2 * NG
        stencil = _tangential_stencil(c["faces"], c["tang"], periodic[tang_axis], n_t)
        out.append(
            StationSet(st.axis, st.sign, st.line, st.ghosts, st.writes, st.xi0, st.faces, stencil)
        )
    return tuple(out)


def _tangential_stencil(faces, tang, periodic: bool, n_t: int) -> TangentialStencil:
    """Central differences inside each contiguous face segment, one-sided at its ends."""
    ns = len(faces)
    idx = np.tile(np.arange(ns), (3, 1))
    w = np.zeros((3, ns))
    faces_arr = np.asarray(faces, dtype=object)
    for name in dict.fromkeys(faces):
        members = np.nonzero(faces_arr == name)[0]
        members = members[np.argsort(tang[members])]
        t = tang[members]
        cyclic = periodic and members.size == n_t
        # split into runs of consecutive tangential indices
        breaks = np.nonzero(np.diff(t) != 1)[0] + 1
        for run in np.split(members, breaks):
            r = run.size
            if cyclic:
                for k in range(r):
                    idx[:, run[k]] = run[(k - 1) % r], run[k], run[(k + 1) % r]
                    w[:, run[k]] = -0.5, 0.0, 0.5
                continue
            if r == 1:
                continue
            if r == 2:
                idx[:, run[0]] = run[0], run[1], run[1]
                w[:, run[0]] = -1.0, 1.0, 0.0
                idx[:, run[1]] = run[0], run[1], run[1]
                w[:, run[1]] = -1.0, 1.0, 0.0
                continue
            for k in range(1, r - 1):
                idx[:, run[k]] = run[k - 1], run[k], run[k + 1]
                w[:, run[k]] = -0.5, 0.0, 0.5
            idx[:, run[0]] = run[0], run[1], run[2]
            w[:, run[0]] = -1.5, 2.0, -0.5
            idx[:, run[-1]] = run[-3], run[-2], run[-1]
            w[:, run[-1]] = 0.5, -2.0, 1.5
    return TangentialStencil(idx, w)


def ghosts_for_face(grid: Grid2D, face: str) -> list[GhostInfo]:
    """Ghost nodes written by the stations of ``face`` with their local geometry."""
    X, Y = grid.coords
    xs, ys = X.reshape(-1), Y.reshape(-1)
    out = []
    for st in grid.stations:
        theta = {(0, 1): 0.0, (0, -1): math.pi, (1, 1): math.pi / 2, (1, -1): -math.pi / 2}[
            (st.axis, st.sign)
        ]
        for s, name in enumerate(st.faces):
            if name != face:
                continue
            for layer in (0, 1):
                if not st.writes[layer, s]:
                    continue
                g = int(st.ghosts[layer, s])
                P = (float(xs[g]), float(ys[g]))
                delta = (layer + 1) * grid.dx - float(st.xi0[s])
                P0 = list(P)
                P0[st.axis] -= st.sign * delta
                out.append(
                    GhostInfo(
                        tuple(int(v) for v in np.unravel_index(g, grid.shape)),
                        P,
                        (P0[0], P0[1]),
                        theta,
                        delta,
                    )
                )
    return out


# }}}


class GridField:
    """Conserved variables on the extended node box of a grid.

    With ``debug=True`` unused nodes hold NaN and :meth:`check_ghosts` verifies
    that every ghost node has been written.
    """

    def __init__(self, grid: Grid1D | Grid2D, m: int, data=None, debug: bool = False):
        self.grid = grid
        self.m = m
        self.debug = debug
        if data is None:
            data = np.zeros((m,) + grid.shape)
        self.data = np.asarray(data, dtype=float)
        if self.data.shape != (m,) + grid.shape:
            raise GeometryError(f"field shape {self.data.shape} != {(m,) + grid.shape}")
        if debug:
            self.data[:, grid.mask == UNUSED] = np.nan

    @property
    def interior(self) -> np.ndarray:
        """Interior values, shape ``(m, n_interior)``."""
        return self.data[:, self.grid.mask == INTERIOR]

    def invalidate_ghosts(self) -> None:
        self.data[:, self.grid.mask == GHOST] = np.nan

    def check_ghosts(self) -> None:
        from .errors import MissingGhostData

        g = self.data[:, self.grid.mask == GHOST]
        if not np.all(np.isfinite(g)):
            raise MissingGhostData(f"{int(np.sum(~np.isfinite(g[0])))} ghost nodes unset")
