"""WENO-type extrapolation of three uniformly spaced samples to a boundary point.

Candidates are the Lagrange polynomials ``p_0`` (constant), ``p_1`` (linear) and
``p_2`` (quadratic) through the first 1, 2, 3 samples. With ``h`` the spacing
and ``s = (x - x0)/h``, the smoothness indicators integrate over the cell
``s in [-1, 0]`` adjacent to the boundary:

    beta_0 = h^2
    beta_1 = D1^2
    beta_2 = D1^2 - 2*D1*D2 + (25/12)*D2^2

where ``D1 = V1 - V0`` and ``D2 = V2 - 2 V1 + V0``.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

DEFAULT_EPSILON = 1e-6
MAX_SPACING = 0.5


@dataclass(frozen=True)
class ExtrapolationResult:
    """``values[k]`` is the extrapolated k-th derivative; ``weights[r]`` is omega_r."""

    values: np.ndarray
    weights: np.ndarray


def _differences(v: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    v0, v1, v2 = v[0], v[1], v[2]
    return v1 - v0, v2 - 2.0 * v1 + v0


def smoothness_indicators(values, dx: float) -> np.ndarray:
    """Return ``(beta_0, beta_1, beta_2)`` stacked along the first axis."""
    v = np.asarray(values, dtype=float)
    d1, d2 = _differences(v)
    b0 = np.full_like(d1, dx * dx)
    b1 = d1 * d1
    b2 = d1 * d1 - 2.0 * d1 * d2 + (25.0 / 12.0) * d2 * d2
    return np.stack([b0, b1, b2])


def linear_weights(dx: float) -> tuple[float, float, float]:
    h = abs(dx)
    return h * h, h, 1.0 - h - h * h


def nonlinear_weights(values, dx: float, eps: float = DEFAULT_EPSILON) -> np.ndarray:
    h = abs(dx)
    if not 0.0 < h < MAX_SPACING:
        raise ValueError(f"extrapolation needs 0 < |dx| < {MAX_SPACING}, got {dx}")
    beta = smoothness_indicators(values, dx)
    d = np.array(linear_weights(dx)).reshape((3,) + (1,) * (beta.ndim - 1))
    alpha = d / (eps + beta) ** 2
    return alpha / alpha.sum(axis=0)


def candidate_derivatives(values, dx: float, x0: float, xb: float) -> np.ndarray:
    """``out[r, k]`` is the k-th derivative of candidate ``p_r`` at ``xb``."""
    v = np.asarray(values, dtype=float)
    d1, d2 = _differences(v)
    sb = (xb - x0) / dx
    zero = np.zeros_like(d1)
    p0 = [v[0], zero, zero]
    p1 = [v[0] + sb * d1, d1 / dx, zero]
    p2 = [
        v[0] + sb * d1 + 0.5 * sb * (sb - 1.0) * d2,
        (d1 + (sb - 0.5) * d2) / dx,
        d2 / (dx * dx),
    ]
    return np.stack([np.stack(p0), np.stack(p1), np.stack(p2)])


def weno_extrapolate(
    values,
    dx: float,
    x0: float,
    xb: float = 0.0,
    eps: float = DEFAULT_EPSILON,
) -> ExtrapolationResult:
    """Extrapolate samples at ``x0, x0 + dx, x0 + 2 dx`` to ``xb``.

    ``values`` has shape ``(3, *batch)``; ``dx`` may be negative when the samples
    run leftwards. Derivatives are with respect to ``x``. The k-th derivative is
    accurate to ``O(|dx|^(3-k))`` on smooth data.
    """
    w = nonlinear_weights(values, dx, eps)
    cand = candidate_derivatives(values, dx, x0, xb)
    return ExtrapolationResult(np.einsum("r...,rk...->k...", w, cand), w)


def linear_extrapolate(values, dx: float, x0: float, xb: float = 0.0) -> np.ndarray:
    """Extrapolation with the linear weights ``d_r`` (no smoothness detection)."""
    d = np.array(linear_weights(dx))
    cand = candidate_derivatives(values, dx, x0, xb)
    return np.einsum("r,rk...->k...", d, cand)
