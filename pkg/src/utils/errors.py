"""Exception hierarchy shared by every subpackage.

Each class carries the exit code the command line reports for it.
"""
from typing import Optional


class NsrlError(Exception):
    """Base class for all errors raised by this package."""

    exit_code: int = 1


class DimensionError(NsrlError, ValueError):
    """Raised when tensor or matrix extents do not agree."""

    exit_code = 2


class VocabularyError(NsrlError, KeyError):
    """Raised for unknown names or out-of-range entity / predicate ids."""

    exit_code = 2

    def __str__(self) -> str:
        return str(self.args[0]) if self.args else ''


class ContractError(NsrlError):
    """Raised when an operation's precondition does not hold."""


class ConfigError(NsrlError):
    """Raised for invalid configuration, optionally anchored to a file line."""

    exit_code = 2

    def __init__(self, message: str, line: Optional[int] = None, path: Optional[str] = None):
        self.line = line
        self.path = path
        if line is not None:
            message = f'{path or "<config>"}:{line}: {message}'
        super().__init__(message)


class ParseError(ConfigError):
    """Raised when textual atoms, piles, clauses or log lines fail to parse."""


class IncompatibleCheckpointError(NsrlError):
    """Raised when a checkpoint does not match the requested environment."""

    exit_code = 3


class CapacityError(NsrlError):
    """Raised when a state space exceeds the enumeration cap."""

    exit_code = 4
