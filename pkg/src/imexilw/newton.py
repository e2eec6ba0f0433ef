"""Batched dense linear solves and Newton iteration on component-first arrays."""

from __future__ import annotations

from typing import Callable

import numpy as np

from .errors import NewtonDivergence, SolverError

NEWTON_MAXIT = 50
NEWTON_RTOL = 1e-12
NEWTON_ATOL = 1e-12


def batched_solve(
    A: np.ndarray, b: np.ndarray, error: type[SolverError] = SolverError
) -> np.ndarray:
    """Solve ``A x = b`` for ``A`` of shape ``(m, m, *batch)`` and ``b`` of ``(m, *batch)``."""
    m = A.shape[0]
    batch = A.shape[2:]
    if m == 1:
        den = A[0, 0]
        if np.any(den == 0.0):
            raise error("singular 1x1 system")
        return b / den
    Am = np.moveaxis(A.reshape(m, m, -1), -1, 0)
    bm = np.moveaxis(b.reshape(m, -1), -1, 0)[..., None]
    try:
        x = np.linalg.solve(Am, bm)[..., 0]
    except np.linalg.LinAlgError as exc:
        raise error(str(exc)) from None
    if not np.all(np.isfinite(x)):
        raise error("non-finite solution of linear system")
    return np.moveaxis(x, 0, -1).reshape((m,) + batch)


def newton(
    residual: Callable[[np.ndarray], np.ndarray],
    jacobian: Callable[[np.ndarray], np.ndarray],
    x0: np.ndarray,
    *,
    rtol: float = NEWTON_RTOL,
    atol: float = NEWTON_ATOL,
    maxit: int = NEWTON_MAXIT,
    singular: type[SolverError] = SolverError,
) -> tuple[np.ndarray, int]:
    """Newton iteration; stops once every update satisfies ``|dx| <= atol + rtol*|x|``.

    A step-size criterion is used because residuals of stiff sources carry
    roundoff amplified by ``1/eps``. Returns ``(x, iterations)`` where
    ``iterations`` counts the updates that were still needed: a negligible final
    correction confirms convergence of the previous iterate and is not counted.
    """
    x = np.array(x0, dtype=float, copy=True)
    for it in range(1, maxit + 1):
        r = residual(x)
        if not np.all(np.isfinite(r)):
            raise NewtonDivergence("non-finite residual in Newton iteration")
        dx = batched_solve(jacobian(x), -r, singular)
        x = x + dx
        if np.all(np.abs(dx) <= atol + rtol * np.abs(x)):
            return x, it - 1
    raise NewtonDivergence(f"Newton did not converge in {maxit} iterations")


def implicit_point_solve(rhs: np.ndarray, a_ii: float, dt: float, model) -> np.ndarray:
    """Solve ``U - dt * a_ii * Q(U) = rhs`` independently at every node."""
    coef = dt * a_ii
    rhs = np.asarray(rhs, dtype=float)
    if coef == 0.0:
        return rhs.copy()
    special = model.implicit_source_solve(rhs, coef)
    if special is not None:
        return special
    m = rhs.shape[0]
    eye = np.eye(m).reshape((m, m) + (1,) * (rhs.ndim - 1))

    def res(U):
        return U - coef * model.source(U) - rhs

    def jac(U):
        return eye - coef * model.source_jacobian(U)

    U, _ = newton(res, jac, rhs, singular=SolverError)
    return U
