"""IMEX Runge-Kutta time integration on 1D and 2D grids.

Stage ``i`` of a step from ``U^n``:

    U^(i) = U^n - dt sum_{j<i} ã_ij div(U^(j)) + dt sum_{j<=i} a_ij Q(U^(j))

solved node by node for the diagonal implicit term. Ghost values of each stage
are produced by the boundary operators before its divergence is evaluated.
"""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field
from typing import Callable, Sequence

import numpy as np

from .discretization import default_mode, global_alpha, spatial_divergence
from .errors import InadmissibleState, SolverError
from .grid import GHOST, INTERIOR, NG, Grid1D, Grid2D, UNUSED
from .models import Model
from .newton import implicit_point_solve
from .tableau import IMEXTableau

log = logging.getLogger(__name__)

# Factor applied to the splitting speed. Above 1 it moves the critical point of
# F^- = (F - alpha U)/2 off the grid for solution-dependent speeds; at 1 the split
# of a relaxation system with unit speeds keeps its equilibrium decoupling.
DEFAULT_ALPHA_MARGIN = 1.0

__all__ = ["Solver", "compute_dt", "implicit_point_solve", "StageWorkspace"]


@dataclass
class StageWorkspace:
    """Per-stage interior data of the current step."""

    dt: float
    t_n: float
    stages: list[np.ndarray] = field(default_factory=list)
    divergences: list[np.ndarray | None] = field(default_factory=list)
    sources: list[np.ndarray | None] = field(default_factory=list)


def _interior_speed(model: Model, U: np.ndarray, ndim: int) -> float:
    """Sum over directions of the largest directional speed."""
    return sum(float(np.max(model.max_speed(U, axis))) for axis in range(ndim))


def compute_dt(
    U: np.ndarray,
    model: Model,
    dx: float,
    cfl: float = 0.8,
    t: float = 0.0,
    t_end: float | None = None,
    ndim: int | None = None,
) -> float:
    """``cfl * dx / alpha`` over the interior states ``U`` of shape ``(m, n)``.

    ``alpha`` is the largest speed in 1D and ``alpha_x + alpha_y`` in 2D, each
    the maximum over the nodes. The step is shortened to land on ``t_end``.
    """
    ndim = model.ndim if ndim is None else ndim
    alpha = _interior_speed(model, U, ndim)
    if not alpha > 0.0:
        alpha = 1e-12
    dt = cfl * dx / alpha
    if t_end is not None:
        remaining = t_end - t
        if dt >= remaining * (1.0 - 1e-12):
            dt = remaining
    return dt


class Solver:
    """Method-of-lines solver binding a model, a grid, a tableau and boundary operators.

    ``boundaries`` are objects with ``begin_step(U, t)`` and
    ``fill_stage(i, U, tableau, dt, record)`` methods acting on the extended
    array in place.
    """

    def __init__(
        self,
        model: Model,
        grid: Grid1D | Grid2D,
        tableau: IMEXTableau,
        boundaries: Sequence = (),
        mode: str | None = None,
        cfl: float = 0.8,
        debug: bool = False,
        alpha_margin: float = DEFAULT_ALPHA_MARGIN,
    ):
        self.model = model
        self.grid = grid
        self.tableau = tableau
        self.boundaries = [b for b in boundaries if b is not None]
        self.mode = mode or default_mode(model)
        self.cfl = cfl
        self.debug = debug
        self.alpha_margin = float(alpha_margin)
        mask = grid.mask
        self.interior_idx = np.flatnonzero(mask == INTERIOR)
        self.active = mask != UNUSED
        self.ghost_mask = mask == GHOST
        if grid.ndim == 2:
            box = mask[grid.box]
            self.box_interior = np.flatnonzero(box.reshape(-1) == INTERIOR)
        tab = tableau
        s = tab.s
        self._need_div = [
            tab.explicit_stage_used(i) or (not tab.stiffly_accurate and tab.w_tilde[i] != 0.0)
            for i in range(s)
        ]
        self._need_src = [
            bool(np.any(tab.a[i + 1 :, i] != 0.0))
            or (not tab.stiffly_accurate and tab.w[i] != 0.0)
            for i in range(s)
        ]
        self.steps = 0

    # {{{ field plumbing

    def interior(self, U: np.ndarray) -> np.ndarray:
        return U.reshape(U.shape[0], -1)[:, self.interior_idx]

    def scatter(self, U: np.ndarray, values: np.ndarray) -> None:
        U.reshape(U.shape[0], -1)[:, self.interior_idx] = values

    def fill_ghosts(self, i: int, U: np.ndarray, dt: float, record: bool) -> None:
        if self.debug:
            U[:, self.ghost_mask] = np.nan
        for b in self.boundaries:
            b.fill_stage(i, U, self.tableau, dt, record)
        if getattr(self.grid, "periodic", False) is True or (
            self.grid.ndim == 2 and any(self.grid.periodic)
        ):
            self.grid.wrap_periodic(U)
        if self.debug:
            from .errors import MissingGhostData

            if not np.all(np.isfinite(U[:, self.ghost_mask])):
                raise MissingGhostData("ghost nodes left unset after boundary fill")

    def alphas(self, U: np.ndarray) -> list[float]:
        """Splitting speeds per direction over interior nodes, times the margin."""
        states = self.interior(U)
        return [
            self.alpha_margin * global_alpha(states, self.model, axis)
            for axis in range(self.grid.ndim)
        ]

    def divergence(self, U: np.ndarray, alphas: Sequence[float] | None = None) -> np.ndarray:
        """Interior values of ``dF/dx (+ dG/dy)`` for a field with ghosts filled."""
        g = self.grid
        if alphas is None:
            alphas = self.alphas(U)
        if g.ndim == 1:
            return spatial_divergence(U, self.model, g.dx, 0, alphas[0], self.mode)
        bx, by = g.box
        dx = spatial_divergence(U[:, :, by], self.model, g.dx, 0, alphas[0], self.mode)
        dy = spatial_divergence(U[:, bx, :], self.model, g.dx, 1, alphas[1], self.mode)
        tot = (dx + dy).reshape(U.shape[0], -1)
        return tot[:, self.box_interior]

    # }}}

    def compute_dt(self, U: np.ndarray, t: float = 0.0, t_end: float | None = None) -> float:
        return compute_dt(self.interior(U), self.model, self.grid.dx, self.cfl, t, t_end, self.grid.ndim)

    def prepare(self, U: np.ndarray, t: float) -> np.ndarray:
        """Fill ghosts of a time-level field (for output or a first divergence)."""
        U = np.array(U, dtype=float, copy=True)
        for b in self.boundaries:
            b.begin_step(U, t)
        self.fill_ghosts(0, U, 0.0, record=False)
        return U

    def step(self, U: np.ndarray, t: float, dt: float, workspace: StageWorkspace | None = None):
        """Advance the extended field ``U`` (interior = ``U^n``) by ``dt``; returns a new array."""
        tab = self.tableau
        model = self.model
        s = tab.s
        Un = self.interior(U)
        for b in self.boundaries:
            b.begin_step(U, t)
        work = np.array(U, copy=True)
        divs: list[np.ndarray | None] = [None] * s
        srcs: list[np.ndarray | None] = [None] * s
        Ui = Un
        for i in range(s):
            rhs = Un.copy()
            for j in range(i):
                if tab.a_tilde[i, j] != 0.0:
                    rhs -= dt * tab.a_tilde[i, j] * divs[j]
                if tab.a[i, j] != 0.0:
                    rhs += dt * tab.a[i, j] * srcs[j]
            a_ii = tab.a[i, i]
            if a_ii != 0.0:
                try:
                    Ui = implicit_point_solve(rhs, a_ii, dt, model)
                except SolverError as exc:
                    raise type(exc)(f"stage {i + 1} at t = {t:.6g}: {exc}") from None
                srcs[i] = (Ui - rhs) / (dt * a_ii)
            else:
                Ui = rhs
                if self._need_src[i]:
                    srcs[i] = model.source(Ui)
            last = i == s - 1
            if self._need_div[i] or not last:
                self.scatter(work, Ui)
                self.fill_ghosts(i, work, dt, record=not last)
                if self._need_div[i]:
                    divs[i] = self.divergence(work)
            if workspace is not None:
                workspace.stages.append(Ui)
        if tab.stiffly_accurate:
            Unew = Ui
        else:
            Unew = Un.copy()
            for j in range(s):
                if tab.w_tilde[j] != 0.0:
                    Unew -= dt * tab.w_tilde[j] * divs[j]
                if tab.w[j] != 0.0:
                    Unew += dt * tab.w[j] * srcs[j]
        if workspace is not None:
            workspace.dt, workspace.t_n = dt, t
            workspace.divergences, workspace.sources = divs, srcs
        out = np.array(U, copy=True)
        self.scatter(out, Unew)
        self.steps += 1
        return out

    def integrate(
        self,
        U: np.ndarray,
        t0: float,
        t_end: float,
        max_steps: int | None = None,
        callback: Callable[[int, float, np.ndarray], None] | None = None,
        check: bool = True,
    ) -> tuple[np.ndarray, float, int]:
        """Step from ``t0`` to ``t_end``. Returns ``(U, t, steps)``."""
        t = t0
        n = 0
        start = time.perf_counter()
        while t < t_end:
            if max_steps is not None and n >= max_steps:
                break
            dt = self.compute_dt(U, t, t_end)
            U = self.step(U, t, dt)
            t = t_end if t + dt >= t_end else t + dt
            n += 1
            if check:
                Ui = self.interior(U)
                if not np.all(np.isfinite(Ui)):
                    raise SolverError(f"non-finite solution after step {n} (t = {t:.6g})")
                try:
                    model_check = self.model.check_admissible
                    model_check(Ui)
                except InadmissibleState as exc:
                    raise type(exc)(f"step {n}, t = {t:.6g}: {exc}") from None
            if callback is not None:
                callback(n, t, U)
            log.debug("step %d t=%.6g dt=%.3e", n, t, dt)
        log.info("%d steps to t=%.6g in %.2fs", n, t, time.perf_counter() - start)
        return U, t, n
