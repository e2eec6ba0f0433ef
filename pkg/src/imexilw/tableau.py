"""Double Butcher tableaux for IMEX Runge-Kutta schemes.

Indices are 0-based internally: stage ``i`` in the usual 1-based notation is
row ``i - 1`` of ``a_tilde``/``a``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction as Fr
from typing import Any, Mapping

import numpy as np

from .errors import AbscissaMismatch, TableauError, TriangularityViolation

ABSCISSA_TOL = 1e-14


@dataclass(frozen=True)
class IMEXTableau:
    """Explicit part ``(a_tilde, w_tilde, c_tilde)`` and implicit part ``(a, w, c)``."""

    a_tilde: np.ndarray
    a: np.ndarray
    w_tilde: np.ndarray
    w: np.ndarray
    c_tilde: np.ndarray
    c: np.ndarray
    name: str = ""

    @property
    def s(self) -> int:
        return self.a.shape[0]

    @property
    def stiffly_accurate(self) -> bool:
        """Both weight vectors equal the last rows, so ``U^{n+1}`` is the last stage."""
        return bool(
            np.array_equal(self.w_tilde, self.a_tilde[-1])
            and np.array_equal(self.w, self.a[-1])
        )

    def explicit_stage_used(self, j: int) -> bool:
        """Whether the convective term of stage ``j`` enters any later stage or the update."""
        if self.w_tilde[j] != 0.0 and not self.stiffly_accurate:
            return True
        return bool(np.any(self.a_tilde[j + 1 :, j] != 0.0))

    @classmethod
    def from_arrays(
        cls,
        a_tilde: Any,
        a: Any,
        w_tilde: Any = None,
        w: Any = None,
        name: str = "",
    ) -> "IMEXTableau":
        """Build a tableau, deriving abscissae from row sums and weights from the last rows
        when omitted."""
        at = np.asarray(a_tilde, dtype=float)
        ai = np.asarray(a, dtype=float)
        wt = at[-1].copy() if w_tilde is None else np.asarray(w_tilde, dtype=float)
        wi = ai[-1].copy() if w is None else np.asarray(w, dtype=float)
        ct = at.sum(axis=1)
        ci = ai.sum(axis=1)
        return validate(cls(at, ai, wt, wi, ct, ci, name))


def validate(t: IMEXTableau) -> IMEXTableau:
    """Check shapes, triangularity and the abscissa row-sum relations."""
    s = t.a.shape[0] if t.a.ndim == 2 else 0
    if s < 1:
        raise TableauError("tableau must have at least one stage")
    for name, arr, shape in (
        ("a_tilde", t.a_tilde, (s, s)),
        ("a", t.a, (s, s)),
        ("w_tilde", t.w_tilde, (s,)),
        ("w", t.w, (s,)),
        ("c_tilde", t.c_tilde, (s,)),
        ("c", t.c, (s,)),
    ):
        if np.shape(arr) != shape:
            raise TableauError(f"{name} has shape {np.shape(arr)}, expected {shape}")

    if np.any(np.triu(t.a_tilde) != 0.0):
        raise TriangularityViolation("explicit coefficients must be strictly lower triangular")
    if np.any(np.triu(t.a, k=1) != 0.0):
        raise TriangularityViolation("implicit coefficients must be lower triangular")

    ct = np.tril(t.a_tilde, k=-1).sum(axis=1)
    ci = np.tril(t.a).sum(axis=1)
    if np.max(np.abs(ct - t.c_tilde)) > ABSCISSA_TOL:
        raise AbscissaMismatch(f"c_tilde {t.c_tilde} != row sums {ct}")
    if np.max(np.abs(ci - t.c)) > ABSCISSA_TOL:
        raise AbscissaMismatch(f"c {t.c} != row sums {ci}")
    return t


def _frac(rows: list[list[str | int]]) -> np.ndarray:
    return np.array([[float(Fr(v)) for v in row] for row in rows])


def ars_443() -> IMEXTableau:
    """Five-stage (one trivial first stage), third-order IMEX scheme.

    Both parts have abscissae ``(0, 1/2, 2/3, 1/2, 1)`` and the weights equal the
    last rows, so the scheme is stiffly accurate.
    """
    a_tilde = _frac(
        [
            [0, 0, 0, 0, 0],
            ["1/2", 0, 0, 0, 0],
            ["11/18", "1/18", 0, 0, 0],
            ["5/6", "-5/6", "1/2", 0, 0],
            ["1/4", "7/4", "3/4", "-7/4", 0],
        ]
    )
    a = _frac(
        [
            [0, 0, 0, 0, 0],
            [0, "1/2", 0, 0, 0],
            [0, "1/6", "1/2", 0, 0],
            [0, "-1/2", "1/2", "1/2", 0],
            [0, "3/2", "-3/2", "1/2", "1/2"],
        ]
    )
    return IMEXTableau.from_arrays(a_tilde, a, name="ars443")


def ssp_rk3() -> IMEXTableau:
    """Three-stage SSP-RK3 (Shu-Osher) as a Butcher pair with an empty implicit part."""
    a_tilde = _frac([[0, 0, 0], [1, 0, 0], ["1/4", "1/4", 0]])
    w_tilde = np.array([1 / 6, 1 / 6, 2 / 3])
    return IMEXTableau.from_arrays(
        a_tilde, np.zeros((3, 3)), w_tilde, np.zeros(3), name="ssprk3"
    )


def forward_backward_euler() -> IMEXTableau:
    """First-order IMEX Euler: explicit convection, implicit source."""
    return IMEXTableau.from_arrays(
        [[0.0, 0.0], [1.0, 0.0]], [[0.0, 0.0], [0.0, 1.0]], name="imex_euler"
    )


NAMED_TABLEAUX = {
    "ars443": ars_443,
    "ssprk3": ssp_rk3,
    "imex_euler": forward_backward_euler,
}


def tableau_from_config(spec: str | Mapping[str, Any]) -> IMEXTableau:
    """Resolve a tableau from a config value: a registered name or nested arrays."""
    if isinstance(spec, str):
        try:
            return NAMED_TABLEAUX[spec]()
        except KeyError:
            raise TableauError(
                f"unknown tableau {spec!r}; known: {sorted(NAMED_TABLEAUX)}"
            ) from None
    return IMEXTableau.from_arrays(
        spec["a_tilde"],
        spec["a"],
        spec.get("w_tilde"),
        spec.get("w"),
        name=str(spec.get("name", "custom")),
    )
