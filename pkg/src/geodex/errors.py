"""Exception hierarchy.

Every error raised on purpose by the library derives from :class:`GeodexError`
so callers (the CLI in particular) can separate numerical failures from bugs.
"""


class GeodexError(Exception):
    """Base class for all library errors."""


class ParameterError(GeodexError, ValueError):
    pass


class DomainError(GeodexError, ValueError):
    """A chart point lies outside the chart domain (e.g. near a sphere pole)."""


class NumericsError(GeodexError):
    """Base class for failures of a numerical procedure."""


class AccuracyError(NumericsError):
    """An accuracy monitor (symplecticity defect, consistency check) tripped."""


class ConvergenceError(NumericsError):
    pass


class DegeneracyError(NumericsError):
    """The object is degenerate: singular shooting Jacobian, kernel of the Hessian, ..."""


class FrameError(NumericsError):
    pass


class AssemblyError(NumericsError):
    pass


class RegularityError(NumericsError):
    """A crossing form or crossing operator is singular."""

    def __init__(self, message, where=None):
        super().__init__(message)
        self.where = where


class AdmissibilityError(NumericsError):
    """A symplectic path ends on the Maslov cycle."""


class ResolutionError(NumericsError):
    """Crossings cannot be resolved at the current grid resolution."""


class ConfigError(GeodexError, ValueError):
    pass
