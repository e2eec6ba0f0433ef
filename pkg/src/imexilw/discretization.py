"""Finite-difference WENO3 with global Lax-Friedrichs flux splitting.

``spatial_divergence`` works on a field with two ghost layers along the chosen
direction and returns the conservative difference at the interior nodes.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import MissingGhostData
from .models import Model, matvec

WENO_EPSILON = 1e-6
MIN_SPEED = 1e-12

COMPONENTWISE = "componentwise"
CHARACTERISTIC = "characteristic"


@dataclass(frozen=True)
class SplitFluxes:
    plus: np.ndarray
    minus: np.ndarray
    alpha: float


def split_fluxes(F: np.ndarray, U: np.ndarray, alpha: float) -> SplitFluxes:
    return SplitFluxes(0.5 * (F + alpha * U), 0.5 * (F - alpha * U), alpha)


def global_alpha(U: np.ndarray, model: Model, axis: int = 0) -> float:
    """Largest directional spectral radius over the given states, floored at ``MIN_SPEED``."""
    U = np.asarray(U, dtype=float)
    if U.shape[1:] == ():
        U = U[:, None]
    a = float(np.max(model.max_speed(U, axis))) if U[0].size else 0.0
    return max(a, MIN_SPEED)


def weno3_interface_value(vm1, v0, vp1, eps: float = WENO_EPSILON):
    """Upwind-biased WENO3 value at ``i + 1/2`` from ``v_{i-1}, v_i, v_{i+1}``."""
    b0 = (v0 - vm1) ** 2
    b1 = (vp1 - v0) ** 2
    a0 = (1.0 / 3.0) / (eps + b0) ** 2
    a1 = (2.0 / 3.0) / (eps + b1) ** 2
    q0 = 1.5 * v0 - 0.5 * vm1
    q1 = 0.5 * (v0 + vp1)
    return (a0 * q0 + a1 * q1) / (a0 + a1)


def _interface_fluxes(Fp, Fm, n):
    """Numerical fluxes at the ``n + 1`` interfaces bracketing ``n`` interior nodes.

    Inputs carry the spatial direction last with two ghosts on each end.
    """
    hp = weno3_interface_value(Fp[..., 0 : n + 1], Fp[..., 1 : n + 2], Fp[..., 2 : n + 3])
    hm = weno3_interface_value(Fm[..., 3 : n + 4], Fm[..., 2 : n + 3], Fm[..., 1 : n + 2])
    return hp + hm


def spatial_divergence(
    U: np.ndarray,
    model: Model,
    dx: float,
    axis: int = 0,
    alpha: float | None = None,
    mode: str = COMPONENTWISE,
) -> np.ndarray:
    """Approximate ``dF/dx`` (axis 0) or ``dG/dy`` (axis 1) at interior nodes.

    ``U`` has shape ``(m, ...)`` where the spatial dimension ``axis + 1`` holds
    ``n + 4`` nodes including ghosts. The result has ``n`` nodes along it.
    """
    U = np.asarray(U, dtype=float)
    if not np.all(np.isfinite(U)):
        raise MissingGhostData("non-finite values in the divergence stencil")
    Ue = np.moveaxis(U, axis + 1, -1)
    n = Ue.shape[-1] - 4
    if n < 1:
        raise MissingGhostData("divergence needs at least one interior node plus ghosts")
    if alpha is None:
        alpha = global_alpha(Ue, model, axis)
    F = model.flux(Ue, axis)
    if mode == COMPONENTWISE:
        H = _interface_fluxes(0.5 * (F + alpha * Ue), 0.5 * (F - alpha * Ue), n)
    elif mode == CHARACTERISTIC:
        H = _characteristic_fluxes(Ue, F, model, axis, alpha, n)
    else:
        raise ValueError(f"unknown splitting mode {mode!r}")
    div = (H[..., 1:] - H[..., :-1]) / dx
    return np.moveaxis(div, -1, axis + 1)


def _characteristic_fluxes(Ue, F, model, axis, alpha, n):
    # eigenvectors at the arithmetic mean of the two nodes adjacent to each interface
    Ubar = 0.5 * (Ue[..., 1 : n + 2] + Ue[..., 2 : n + 3])
    _, L, R = model.eigensystem(Ubar, axis)
    Fp = 0.5 * (F + alpha * Ue)
    Fm = 0.5 * (F - alpha * Ue)

    def proj(W, k):
        return matvec(L, W[..., k : k + n + 1])

    hp = weno3_interface_value(proj(Fp, 0), proj(Fp, 1), proj(Fp, 2))
    hm = weno3_interface_value(proj(Fm, 3), proj(Fm, 2), proj(Fm, 1))
    return matvec(R, hp + hm)


def default_mode(model: Model) -> str:
    return CHARACTERISTIC if model.m > 2 else COMPONENTWISE
