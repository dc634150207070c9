"""Exception hierarchy for minitwistor."""


class TwistorError(Exception):
    """Base class for all errors raised by this package."""


class ChartEscape(TwistorError, ValueError):
    """A direction left the stereographic chart (south pole / infinity)."""


class NotIntegrable(TwistorError):
    """A congruence failed the integrability check."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class PathMismatch(TwistorError):
    """Row-first and column-first potential integration disagree."""

    def __init__(self, message, discrepancy=None):
        super().__init__(message)
        self.discrepancy = discrepancy


class NoIntersection(TwistorError):
    """An incoming ray does not meet the reflecting surface."""


class NoConvergence(TwistorError):
    """Newton iteration for the incidence point did not converge."""

    def __init__(self, message, residual=None):
        super().__init__(message)
        self.residual = residual


class BranchUndefined(TwistorError, ValueError):
    """No valid square-root branch for the requested direction."""


class DegenerateFocus(TwistorError, ValueError):
    """The reflecting surface passes through the focus of a spherical wave."""


class InvalidParams(TwistorError, ValueError):
    """Bad shape parameters for a gallery surface."""


class UnknownCase(TwistorError, KeyError):
    """Requested reference solution does not exist."""


class ParseError(TwistorError, ValueError):
    """Syntax error in a scene file."""

    def __init__(self, line, message):
        super().__init__(f"line {line}: {message}")
        self.line = line
        self.message = message


class ValidationError(TwistorError, ValueError):
    """Semantically invalid scene configuration."""

    def __init__(self, field, message, line=None):
        where = f"line {line}: " if line is not None else ""
        super().__init__(f"{where}{field}: {message}")
        self.field = field
        self.message = message
        self.line = line


class Miss(NoIntersection):
    """The oracle ray misses the surface entirely."""
