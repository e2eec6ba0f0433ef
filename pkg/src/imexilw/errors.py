"""Exception hierarchy. The CLI maps each top-level category to an exit code."""

from __future__ import annotations


class ImexIlwError(Exception):
    """Base class for all library errors."""

    exit_code = 1


class ConfigError(ImexIlwError, ValueError):
    exit_code = 2


class TableauError(ConfigError):
    pass


class TriangularityViolation(TableauError):
    pass


class AbscissaMismatch(TableauError):
    pass


class ModelError(ImexIlwError, ValueError):
    exit_code = 3


class NonpositiveEpsilon(ModelError):
    pass


class InadmissibleState(ModelError):
    pass


class NonphysicalState(InadmissibleState):
    pass


class GeometryError(ConfigError):
    pass


class TooFewNodes(GeometryError):
    pass


class InvalidEta(GeometryError):
    pass


class GeometryOverlap(GeometryError):
    pass


class ObstacleOutsideDomain(GeometryError):
    pass


class MissingStencil(GeometryError):
    pass


class SolverError(ImexIlwError, ArithmeticError):
    exit_code = 4


class NewtonDivergence(SolverError):
    pass


class SingularBoundaryJacobian(SolverError):
    pass


class SingularILWSystem(SolverError):
    pass


class SingularStageMatrix(SolverError):
    pass


class ZeroEigenvalue(SolverError):
    pass


class MissingGhostData(SolverError):
    pass


class NonInflowBoundary(ImexIlwError, ValueError):
    exit_code = 3
