"""IMEX Runge-Kutta WENO solver with inverse Lax-Wendroff ghost-point boundaries."""

from __future__ import annotations

__version__ = "0.1.0"
