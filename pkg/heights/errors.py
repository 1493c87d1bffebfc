"""
Exception hierarchy.

Every error raised by the library derives from HeightsError and carries the
process exit code the CLI should use for it:

    2  ParseError, DimensionError, DomainError   (bad input)
    3  NotAMorphismError                         (forms share a common zero)
    4  ResourceCapError                          (enumeration / size caps)
"""
from typing import Any, Dict, Optional


class HeightsError(Exception):
    """Base class for all library errors."""

    exit_code = 1

    def __init__(self, message: str, witness: Optional[Dict[str, Any]] = None):
        super().__init__(message)
        self.message = message
        self.witness = witness or {}

    def to_dict(self) -> Dict[str, Any]:
        return {
            'error_type': type(self).__name__,
            'message': self.message,
            'exit_code': self.exit_code,
            'witness': self.witness,
        }


class ParseError(HeightsError, ValueError):
    """Malformed morphism JSON, builder string or run-config file."""

    exit_code = 2


class DimensionError(HeightsError, ValueError):
    """Vector or lift of the wrong dimension."""

    exit_code = 2


class DomainError(HeightsError, ValueError):
    """Argument outside the operation's domain (zero vector, non-prime, ...)."""

    exit_code = 2


class NotAMorphismError(HeightsError):
    """The forms have a nontrivial common zero; witness holds the minor data."""

    exit_code = 3


class ResourceCapError(HeightsError):
    """A configured cap (classes visited, iterate count, integer size) was hit."""

    exit_code = 4
