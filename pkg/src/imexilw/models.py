"""Hyperbolic models ``U_t + F(U)_x [+ G(U)_y] = Q(U)``.

All state arrays are component-first: ``U.shape == (m, *batch)``. Matrices are
returned as ``(m, m, *batch)``. ``axis`` selects the flux direction (0 = x,
1 = y); one-dimensional models only accept ``axis=0``.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Any, Callable

import numpy as np

from .newton import NEWTON_MAXIT, NEWTON_RTOL
from .errors import (
    ConfigError,
    InadmissibleState,
    ModelError,
    NewtonDivergence,
    NonphysicalState,
    NonpositiveEpsilon,
)

Array = np.ndarray


def _eye(m: int, batch: tuple[int, ...]) -> Array:
    out = np.zeros((m, m) + batch)
    for k in range(m):
        out[k, k] = 1.0
    return out


def matvec(M: Array, v: Array) -> Array:
    """Batched ``M @ v`` for ``M`` of shape ``(p, m, *b)`` and ``v`` of shape ``(m, *b)``."""
    return np.einsum("ij...,j...->i...", M, v)


def matmul(A: Array, B: Array) -> Array:
    """Batched ``A @ B`` for ``(p, m, *b)`` and ``(m, k, *b)``."""
    return np.einsum("ij...,jk...->ik...", A, B)


class Model:
    """Base class. Subclasses fill in flux, eigensystem and source."""

    name = "model"
    m = 1
    ndim = 1
    components: tuple[str, ...] = ("u",)
    velocity: tuple[int, int] | None = None

    def _check_axis(self, axis: int) -> None:
        if axis >= self.ndim:
            raise ModelError(f"{self.name} has no flux along axis {axis}")

    def flux(self, U: Array, axis: int = 0) -> Array:
        raise NotImplementedError

    def jacobian(self, U: Array, axis: int = 0) -> Array:
        raise NotImplementedError

    def eigensystem(self, U: Array, axis: int = 0) -> tuple[Array, Array, Array]:
        """Return ``(lam, L, R)`` with ``L @ A @ R = diag(lam)`` and ``L @ R = I``."""
        raise NotImplementedError

    # Directional variants. ``n`` is a scalar sign for 1D models and a unit
    # vector ``(nx, ny)`` for 2D models.

    def flux_dir(self, U: Array, n) -> Array:
        if np.ndim(n) == 0:
            return n * self.flux(U, 0)
        return sum(n[k] * self.flux(U, k) for k in range(self.ndim) if n[k] != 0.0)

    def jacobian_dir(self, U: Array, n) -> Array:
        if np.ndim(n) == 0:
            return n * self.jacobian(U, 0)
        return sum(n[k] * self.jacobian(U, k) for k in range(self.ndim) if n[k] != 0.0)

    def eigensystem_dir(self, U: Array, n) -> tuple[Array, Array, Array]:
        if np.ndim(n) == 0:
            lam, L, R = self.eigensystem(U, 0)
            return n * lam, L, R
        if n[0] != 0.0 and n[1] == 0.0 and self.ndim > 0:
            lam, L, R = self.eigensystem(U, 0)
            return n[0] * lam, L, R
        if n[1] != 0.0 and n[0] == 0.0 and self.ndim > 1:
            lam, L, R = self.eigensystem(U, 1)
            return n[1] * lam, L, R
        raise ModelError(f"{self.name} has no eigensystem along {n}")

    def source(self, U: Array) -> Array:
        return np.zeros_like(U)

    def source_jacobian(self, U: Array) -> Array:
        return fd_jacobian(self.source, U)

    def max_speed(self, U: Array, axis: int = 0) -> Array:
        lam, _, _ = self.eigensystem(U, axis)
        return np.max(np.abs(lam), axis=0)

    def check_admissible(self, U: Array) -> None:
        pass

    @property
    def has_source(self) -> bool:
        return True

    def implicit_source_solve(self, rhs: Array, coef: float) -> Array | None:
        """Optional specialised solve of ``U - coef * Q(U) = rhs``; ``None`` means
        use the generic Newton iteration."""
        return None

    def describe(self) -> dict[str, Any]:
        return {"name": self.name}


def fd_jacobian(fun: Callable[[Array], Array], U: Array, rel: float = 1e-7) -> Array:
    """Central finite-difference Jacobian of a component-first vector function."""
    U = np.asarray(U, dtype=float)
    m = U.shape[0]
    cols = []
    for k in range(m):
        h = rel * np.maximum(1.0, np.abs(U[k]))
        up = U.copy()
        dn = U.copy()
        up[k] = up[k] + h
        dn[k] = dn[k] - h
        cols.append((fun(up) - fun(dn)) / (2.0 * h))
    return np.stack(cols, axis=1)


class BurgersSource(Model):
    """``u_t + (u^2/2)_x = u^2 + u``."""

    name = "burgers_source"
    m = 1
    components = ("u",)

    def flux(self, U, axis=0):
        self._check_axis(axis)
        return 0.5 * U * U

    def jacobian(self, U, axis=0):
        self._check_axis(axis)
        return U[np.newaxis].copy()

    def eigensystem(self, U, axis=0):
        self._check_axis(axis)
        one = np.ones((1, 1) + U.shape[1:])
        return U.copy(), one, one.copy()

    def max_speed(self, U, axis=0):
        return np.abs(U[0])

    def source(self, U):
        return U * U + U

    def source_jacobian(self, U):
        return (2.0 * U + 1.0)[np.newaxis]


class LinearRelaxation(Model):
    """``u_t + v_x = 0``, ``v_t + u_x = -(u + v)/eps``."""

    name = "linear_relax"
    m = 2
    components = ("u", "v")

    def __init__(self, eps: float = 1.0):
        if not eps > 0.0:
            raise NonpositiveEpsilon(f"eps must be positive, got {eps}")
        self.eps = float(eps)

    def flux(self, U, axis=0):
        self._check_axis(axis)
        return np.stack([U[1], U[0]])

    def jacobian(self, U, axis=0):
        self._check_axis(axis)
        A = np.zeros((2, 2) + U.shape[1:])
        A[0, 1] = 1.0
        A[1, 0] = 1.0
        return A

    def eigensystem(self, U, axis=0):
        self._check_axis(axis)
        b = U.shape[1:]
        lam = np.stack([np.ones(b), -np.ones(b)])
        L = np.zeros((2, 2) + b)
        L[0, 0] = L[0, 1] = L[1, 0] = 1.0
        L[1, 1] = -1.0
        return lam, L, 0.5 * L

    def max_speed(self, U, axis=0):
        return np.ones(U.shape[1:])

    def source(self, U):
        q = np.zeros_like(U)
        q[1] = -(U[0] + U[1]) / self.eps
        return q

    def source_jacobian(self, U):
        J = np.zeros((2, 2) + U.shape[1:])
        J[1, 0] = J[1, 1] = -1.0 / self.eps
        return J

    def describe(self):
        return {"name": self.name, "eps": self.eps}


class NonlinearRelaxation(Model):
    """``u_t + v_x = 0``, ``v_t + (u + (u+v)^2/2)_x = -((u+v) + (u+v)^2)/eps``.

    Admissible states satisfy ``1 + u + v > 0``.
    """

    name = "nonlinear_relax"
    m = 2
    components = ("u", "v")

    def __init__(self, eps: float = 1.0):
        if not eps > 0.0:
            raise NonpositiveEpsilon(f"eps must be positive, got {eps}")
        self.eps = float(eps)

    def check_admissible(self, U):
        if np.any(1.0 + U[0] + U[1] <= 0.0):
            raise InadmissibleState("1 + u + v must stay positive")

    def flux(self, U, axis=0):
        self._check_axis(axis)
        w = U[0] + U[1]
        return np.stack([U[1], U[0] + 0.5 * w * w])

    def jacobian(self, U, axis=0):
        self._check_axis(axis)
        w = U[0] + U[1]
        A = np.zeros((2, 2) + U.shape[1:])
        A[0, 1] = 1.0
        A[1, 0] = 1.0 + w
        A[1, 1] = w
        return A

    def eigensystem(self, U, axis=0):
        self._check_axis(axis)
        self.check_admissible(U)
        w = U[0] + U[1]
        b = U.shape[1:]
        lam = np.stack([1.0 + w, -np.ones(b)])
        L = np.empty((2, 2) + b)
        L[0, 0] = L[0, 1] = L[1, 0] = 1.0
        L[1, 1] = -1.0 / (1.0 + w)
        R = np.empty((2, 2) + b)
        R[0, 0] = 1.0 / (2.0 + w)
        R[0, 1] = R[1, 0] = (1.0 + w) / (2.0 + w)
        R[1, 1] = -(1.0 + w) / (2.0 + w)
        return lam, L, R

    def max_speed(self, U, axis=0):
        return np.maximum(np.abs(1.0 + U[0] + U[1]), 1.0)

    def source(self, U):
        w = U[0] + U[1]
        q = np.zeros_like(U)
        q[1] = -(w + w * w) / self.eps
        return q

    def source_jacobian(self, U):
        w = U[0] + U[1]
        J = np.zeros((2, 2) + U.shape[1:])
        J[1, 0] = J[1, 1] = -(1.0 + 2.0 * w) / self.eps
        return J

    def implicit_source_solve(self, rhs, coef):
        """``u`` passes through; ``w = u + v`` solves ``c w^2 + (1 + c) w = u + v_rhs``.

        ``c = coef/eps``. The root continuous with ``w = u + v_rhs`` at ``c = 0`` is
        taken, written in the cancellation-free form.
        """
        c = coef / self.eps
        k = rhs[0] + rhs[1]
        disc = (1.0 + c) ** 2 + 4.0 * c * k
        if np.any(disc < 0.0):
            raise InadmissibleState("implicit relaxation solve has no real root")
        w = 2.0 * k / ((1.0 + c) + np.sqrt(disc))
        return np.stack([rhs[0], w - rhs[0]])

    def describe(self):
        return {"name": self.name, "eps": self.eps}


@dataclass(frozen=True)
class EulerState:
    """Primitive view of a reactive Euler state."""

    rho: Array
    u: Array
    v: Array
    p: Array
    Y: Array

    @property
    def T(self) -> Array:
        return self.p / self.rho


class ReactiveEuler(Model):
    """2D reactive Euler equations with one-step Arrhenius kinetics.

    Conserved variables ``(rho, rho u, rho v, E, rho Y)`` with
    ``E = rho (u^2 + v^2)/2 + p/(gamma - 1) + q rho Y`` and reaction rate
    ``omega = -K rho Y exp(-T_act / T)``, ``T = p / rho``.
    """

    name = "reactive_euler"
    m = 5
    ndim = 2
    components = ("rho", "rhou", "rhov", "E", "rhoY")
    velocity = (1, 2)  # momentum components rotated by a change of frame

    def __init__(
        self,
        gamma: float = 1.2,
        q: float = 50.0,
        T_act: float = 50.0,
        K_rate: float = 2566.4,
    ):
        if not gamma > 1.0:
            raise ModelError("gamma must exceed 1")
        if not (q > 0.0 and T_act > 0.0 and K_rate > 0.0):
            raise ModelError("q, T_act and K_rate must be positive")
        self.gamma = float(gamma)
        self.q = float(q)
        self.T_act = float(T_act)
        self.K_rate = float(K_rate)

    def describe(self):
        return {
            "name": self.name,
            "gamma": self.gamma,
            "q": self.q,
            "T_act": self.T_act,
            "K_rate": self.K_rate,
        }

    # {{{ state conversions

    def conserved(self, rho, u, v, p, Y) -> Array:
        rho, u, v, p, Y = np.broadcast_arrays(*(np.asarray(x, float) for x in (rho, u, v, p, Y)))
        E = 0.5 * rho * (u * u + v * v) + p / (self.gamma - 1.0) + self.q * rho * Y
        return np.stack([rho, rho * u, rho * v, E, rho * Y])

    def from_rho_u_v_E_Y(self, rho, u, v, E, Y) -> Array:
        rho, u, v, E, Y = np.broadcast_arrays(*(np.asarray(x, float) for x in (rho, u, v, E, Y)))
        return np.stack([rho, rho * u, rho * v, E, rho * Y])

    def pressure(self, U: Array) -> Array:
        rho = U[0]
        ke = 0.5 * (U[1] * U[1] + U[2] * U[2]) / rho
        return (self.gamma - 1.0) * (U[3] - ke - self.q * U[4])

    def primitive(self, U: Array) -> EulerState:
        rho = U[0]
        return EulerState(rho, U[1] / rho, U[2] / rho, self.pressure(U), U[4] / rho)

    def check_admissible(self, U: Array) -> None:
        rho = U[0]
        if np.any(~(rho > 0.0)):
            raise NonphysicalState(f"non-positive density (min {np.nanmin(rho):.3e})")
        p = self.pressure(U)
        if np.any(~(p > 0.0)):
            raise NonphysicalState(f"non-positive pressure (min {np.nanmin(p):.3e})")

    def temperature(self, U: Array) -> Array:
        self.check_admissible(U)
        return self.pressure(U) / U[0]

    def sound_speed(self, U: Array) -> Array:
        self.check_admissible(U)
        return np.sqrt(self.gamma * self.pressure(U) / U[0])

    # }}}

    # {{{ directional flux machinery

    @staticmethod
    def _normal(axis: int) -> tuple[float, float]:
        return (1.0, 0.0) if axis == 0 else (0.0, 1.0)

    def flux(self, U, axis=0):
        self._check_axis(axis)
        return self.flux_normal(U, *self._normal(axis))

    def flux_normal(self, U: Array, nx: float, ny: float) -> Array:
        rho = U[0]
        un = (nx * U[1] + ny * U[2]) / rho
        p = self.pressure(U)
        F = U * un
        F[1] += nx * p
        F[2] += ny * p
        F[3] += un * p
        return F

    def jacobian(self, U, axis=0):
        self._check_axis(axis)
        return self.jacobian_normal(U, *self._normal(axis))

    def jacobian_normal(self, U: Array, nx: float, ny: float) -> Array:
        g1 = self.gamma - 1.0
        rho = U[0]
        u = U[1] / rho
        v = U[2] / rho
        un = nx * u + ny * v
        p = self.pressure(U)
        b = U.shape[1:]
        zero = np.zeros(b)
        # d(un)/dU and dp/dU
        dun = np.stack([-un / rho, nx / rho + zero, ny / rho + zero, zero, zero])
        dp = g1 * np.stack([0.5 * (u * u + v * v), -u, -v, 1.0 + zero, -self.q + zero])
        e = np.stack([zero, nx + zero, ny + zero, un, zero])
        A = _eye(5, b) * un + U[:, None] * dun[None, :] + e[:, None] * dp[None, :]
        A[3] += p * dun
        return A

    def eigensystem(self, U, axis=0):
        self._check_axis(axis)
        return self.eigensystem_normal(U, *self._normal(axis))

    def eigensystem_normal(self, U: Array, nx: float, ny: float) -> tuple[Array, Array, Array]:
        """Speeds ``(un - c, un, un, un, un + c)``: acoustic, entropy, shear,
        species, acoustic."""
        self.check_admissible(U)
        g1 = self.gamma - 1.0
        q = self.q
        rho = U[0]
        u = U[1] / rho
        v = U[2] / rho
        Y = U[4] / rho
        p = self.pressure(U)
        c = np.sqrt(self.gamma * p / rho)
        un = nx * u + ny * v
        ut = -ny * u + nx * v
        k2 = 0.5 * (u * u + v * v)
        H = k2 + c * c / g1 + q * Y
        b = U.shape[1:]
        zero = np.zeros(b)
        one = np.ones(b)

        lam = np.stack([un - c, un, un, un, un + c])

        R = np.stack(
            [
                np.stack([one, u - c * nx, v - c * ny, H - c * un, Y]),
                np.stack([one, u, v, k2 + q * Y, Y]),
                np.stack([zero, -ny + zero, nx + zero, ut, zero]),
                np.stack([zero, zero, zero, q * one, one]),
                np.stack([one, u + c * nx, v + c * ny, H + c * un, Y]),
            ],
            axis=1,
        )

        # left eigenvectors: primitive-variable rows times d(primitive)/d(conserved)
        a = g1 / (c * c)
        h = 0.5 / c
        L = np.empty((5, 5) + b)
        L[0] = np.stack([h * un + 0.5 * a * k2, -h * nx - 0.5 * a * u, -h * ny - 0.5 * a * v, 0.5 * a, -0.5 * a * q])
        L[1] = np.stack([1.0 - a * k2, a * u, a * v, -a, a * q])
        L[2] = np.stack([-ut, -ny + zero, nx + zero, zero, zero])
        L[3] = np.stack([-Y, zero, zero, zero, one])
        L[4] = np.stack([-h * un + 0.5 * a * k2, h * nx - 0.5 * a * u, h * ny - 0.5 * a * v, 0.5 * a, -0.5 * a * q])
        return lam, L, R

    def flux_dir(self, U, n):
        n = (float(n), 0.0) if np.ndim(n) == 0 else n
        return self.flux_normal(U, n[0], n[1])

    def jacobian_dir(self, U, n):
        n = (float(n), 0.0) if np.ndim(n) == 0 else n
        return self.jacobian_normal(U, n[0], n[1])

    def eigensystem_dir(self, U, n):
        n = (float(n), 0.0) if np.ndim(n) == 0 else n
        return self.eigensystem_normal(U, n[0], n[1])

    def max_speed(self, U, axis=0):
        c = self.sound_speed(U)
        return np.abs(U[1 + axis] / U[0]) + c

    # }}}

    # {{{ source

    def reaction_rate(self, U: Array) -> Array:
        T = self.temperature(U)
        return -self.K_rate * U[4] * np.exp(-self.T_act / T)

    def source(self, U):
        S = np.zeros_like(U)
        S[4] = self.reaction_rate(U)
        return S

    def source_jacobian(self, U):
        g1 = self.gamma - 1.0
        rho = U[0]
        u = U[1] / rho
        v = U[2] / rho
        p = self.pressure(U)
        T = self.temperature(U)
        e = np.exp(-self.T_act / T)
        omega = -self.K_rate * U[4] * e
        dp = g1 * np.stack([0.5 * (u * u + v * v), -u, -v, np.ones_like(u), -self.q + 0 * u])
        # d(-T_act rho / p)/dU
        dexpo = -self.T_act * (-rho * dp) / (p * p)
        dexpo[0] += -self.T_act / p
        J = np.zeros((5, 5) + U.shape[1:])
        J[4] = omega * dexpo
        J[4, 4] += -self.K_rate * e
        return J

    def implicit_source_solve(self, rhs: Array, coef: float) -> Array:
        """Solve ``U - coef * S(U) = rhs``; only ``rho Y`` changes.

        The scalar equation ``z + coef*K*z*exp(-T_act*rho/p(z)) = rhs_5`` has its
        root between 0 and ``rhs_5``; safeguarded Newton keeps the bracket.
        """
        out = np.array(rhs, dtype=float, copy=True)
        if coef == 0.0:
            return out
        g1 = self.gamma - 1.0
        rho = rhs[0]
        eint = rhs[3] - 0.5 * (rhs[1] ** 2 + rhs[2] ** 2) / rho
        r = rhs[4]
        ck = coef * self.K_rate

        def parts(z):
            p = g1 * (eint - self.q * z)
            ok = p > 0.0
            psafe = np.where(ok, p, 1.0)
            e = np.where(ok, np.exp(-self.T_act * rho / psafe), 0.0)
            de = np.where(ok, e * (-self.T_act * rho * g1 * self.q) / (psafe * psafe), 0.0)
            h = z + ck * z * e - r
            dh = 1.0 + ck * (e + z * de)
            return h, dh

        lo = np.minimum(0.0, r)
        hi = np.maximum(0.0, r)
        z = r.copy()
        scale = np.abs(r) + 1e-300
        for _ in range(NEWTON_MAXIT):
            h, dh = parts(z)
            lo = np.where(h < 0.0, z, lo)
            hi = np.where(h > 0.0, z, hi)
            with np.errstate(divide="ignore", invalid="ignore"):
                zn = z - h / dh
            bad = ~((zn >= lo) & (zn <= hi)) | ~np.isfinite(zn)
            zn = np.where(bad, 0.5 * (lo + hi), zn)
            step = np.abs(zn - z)
            z = zn
            if np.all((step <= NEWTON_RTOL * scale) | (hi - lo <= NEWTON_RTOL * scale)):
                break
        else:
            raise NewtonDivergence("reactive source solve did not converge")
        out[4] = z
        return out

    # }}}


MODEL_REGISTRY: dict[str, Callable[..., Model]] = {
    "burgers_source": BurgersSource,
    "linear_relax": LinearRelaxation,
    "nonlinear_relax": NonlinearRelaxation,
    "reactive_euler": ReactiveEuler,
}


def scalar_burgers_source() -> BurgersSource:
    return BurgersSource()


def linear_relaxation(eps: float) -> LinearRelaxation:
    return LinearRelaxation(eps)


def nonlinear_relaxation(eps: float) -> NonlinearRelaxation:
    return NonlinearRelaxation(eps)


def reactive_euler(
    gamma: float = 1.2, q: float = 50.0, T_act: float = 50.0, K_rate: float = 2566.4
) -> ReactiveEuler:
    return ReactiveEuler(gamma, q, T_act, K_rate)


def model_from_config(name: str, params: dict[str, Any] | None = None) -> Model:
    try:
        factory = MODEL_REGISTRY[name]
    except KeyError:
        raise ConfigError(f"unknown model {name!r}; known: {sorted(MODEL_REGISTRY)}") from None
    return factory(**(params or {}))
