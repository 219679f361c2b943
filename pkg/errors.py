"""
Exception hierarchy for the inverse source toolkit
"""

from typing import Optional


class InverseSourceError(Exception):
    """Base class for every error raised by the toolkit"""


class ParseError(InverseSourceError):
    """Malformed mesh / boundary data / config file"""

    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class EmptyRegion(InverseSourceError):
    """Permissible region selects no element"""


class InvalidBoundary(InverseSourceError):
    """Boundary edges do not form a single closed cycle"""


class DegenerateElement(InverseSourceError):
    """Triangle with (numerically) zero area"""


class MissingBoundaryValue(InverseSourceError):
    """Boundary data lacks a value for some boundary node"""


class DimensionMismatch(InverseSourceError):
    """Vector length does not match the system it is used with"""


class SingularSystem(InverseSourceError):
    """Coupled CCBM matrix could not be factorized"""


class NonFiniteIterate(InverseSourceError):
    """An iterate became inf/nan (time step too large)"""

    def __init__(self, k: int, method: str = ""):
        self.k = k
        self.method = method
        super().__init__(f"{method or 'iteration'} produced a non-finite iterate at k={k}; "
                         f"reduce the time step")


class ZeroReference(InverseSourceError):
    """Relative error requested against a zero reference source"""


class ConfigError(InverseSourceError):
    """Invalid or unknown configuration key"""

    def __init__(self, message: str, key: Optional[str] = None):
        self.key = key
        if key is not None and key not in message:
            message = f"{key}: {message}"
        super().__init__(message)
