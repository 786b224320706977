"""Exception hierarchy.

Every domain failure derives from :class:`TrapError` so callers (and the
command line front end) can separate physics problems from bad input.
"""


class TrapError(Exception):
    """Base class for all domain errors raised by surftrap."""

    module = "surftrap"

    def qualified(self):
        return f"{self.module}: {type(self).__name__}: {self}"


# geometry
class GeometryError(TrapError):
    module = "geometry"


class OverlapError(GeometryError):
    pass


class DegeneratePolygon(GeometryError):
    pass


class DuplicateName(GeometryError):
    pass


class InvalidParams(GeometryError):
    pass


# fields
class FieldError(TrapError):
    module = "fields"


class UnknownElectrode(FieldError, KeyError):
    def __str__(self):
        return Exception.__str__(self)


class EvaluationBelowPlane(FieldError, ValueError):
    pass


class SingularSystem(FieldError):
    pass


class PanelLimitExceeded(FieldError, MemoryError):
    pass


# pseudo
class PseudoError(TrapError):
    module = "pseudo"


class UnstableDrive(PseudoError):
    pass


# analysis
class AnalysisError(TrapError):
    module = "analysis"


class NoMinimumFound(AnalysisError):
    pass


class NegativeCurvature(AnalysisError):
    pass


class Unbounded(AnalysisError):
    pass


class GridTooCoarse(AnalysisError):
    pass


class NullNotFound(AnalysisError):
    pass


# compensation
class CompensationError(TrapError):
    module = "compensation"


class InfeasibleTarget(CompensationError):
    pass


class RankDeficient(CompensationError):
    pass


class NoConvergence(TrapError):
    module = "solver"


class NonIdentifiable(CompensationError):
    pass


# crystal
class CrystalError(TrapError):
    module = "crystal"


class UnconfinedDirection(CrystalError):
    pass


class RangeExhausted(CrystalError):
    pass


# heating
class HeatingError(TrapError):
    module = "heating"


class NonPositiveInput(HeatingError, ValueError):
    pass


class ZeroField(HeatingError):
    pass


# cli
class CliError(TrapError):
    module = "cli"


class PlaneBelowSurface(CliError):
    pass
