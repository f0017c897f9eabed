"""Exception types shared across the package."""


class LefLabError(Exception):
    """Base class for all package-specific errors."""


class GridTooCoarse(LefLabError):
    """Node count leaves fewer than three interior nodes on some axis."""


class UnsupportedKind(LefLabError):
    """Grid kind is neither ``interval`` nor ``rectangle``."""


class GridMismatch(LefLabError):
    """Two fields (or a field and a grid) live on different grids."""


class NoConvergence(LefLabError):
    """An iterative solver hit its iteration cap before meeting tolerance."""

    def __init__(self, message, iterations=None):
        super().__init__(message)
        self.iterations = iterations


class NonPositivePotential(LefLabError):
    """A potential is not strictly positive at every node."""


class FileFormat(LefLabError):
    """A field or diagram file does not follow the documented layout."""


class OrderingFailed(LefLabError):
    """No admissible sub-solution scaling below the super-solution was found."""


class BracketInvalid(LefLabError):
    """A bisection bracket does not separate the two solver regimes."""


class ZeroField(LefLabError):
    """An operation that needs a nonzero field received the zero field."""


class ConfigError(LefLabError):
    """A run-configuration file has an invalid or unknown entry."""

    def __init__(self, reason, line=None):
        self.line = line
        self.reason = reason
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(prefix + reason)
