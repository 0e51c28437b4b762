"""
Error types for the manifold geodesics toolkit.
Every error raised by the library derives from ManifoldError so the CLI can
map it onto an exit code.
"""

from typing import List, Optional, Sequence, Tuple


class ManifoldError(Exception):
    """Base class for all toolkit errors."""

    exit_code: int = 1


class ValidationError(ManifoldError, ValueError):
    """Input failed a precondition (exit code 2)."""

    exit_code = 2


class CloudParseError(ValidationError):
    """A cloud file could not be parsed."""

    def __init__(self, message: str, path: Optional[str] = None, line: Optional[int] = None):
        self.path = path
        self.line = line
        location = ""
        if path is not None:
            location = f"{path}"
            if line is not None:
                location += f":{line}"
            location += ": "
        elif line is not None:
            location = f"line {line}: "
        super().__init__(f"{location}{message}")


class EmptyCloudError(ValidationError):
    """A cloud with zero points was supplied or parsed."""


class DuplicatePointError(ValidationError):
    """Two points coincide, which would create a zero-weight edge."""

    def __init__(self, pair: Tuple[int, int]):
        self.pair = pair
        super().__init__(
            f"coincident points {pair[0]} and {pair[1]}; deduplicate the cloud before building a graph"
        )


class IndexOutOfRangeError(ValidationError, IndexError):
    """A vertex index is outside [0, n)."""

    def __init__(self, name: str, value: int, n: int):
        self.name = name
        self.value = value
        self.n = n
        super().__init__(f"{name}={value} out of range for {n} points")


class ConfigError(ValidationError):
    """A pipeline config failed schema validation."""

    def __init__(self, message: str, fields: Sequence[str] = ()):
        self.fields: List[str] = list(fields)
        if self.fields:
            message = f"{message}: " + ", ".join(self.fields)
        super().__init__(message)


class CloudIOError(ManifoldError, OSError):
    """Reading or writing a file failed (exit code 3)."""

    exit_code = 3

    def __init__(self, message: str, path: Optional[str] = None):
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)


class InvariantViolation(ManifoldError, RuntimeError):
    """An internal invariant check failed (exit code 4)."""

    exit_code = 4


def check_index(name: str, value: int, n: int) -> int:
    """Validate a vertex index and return it as a plain int."""
    if not 0 <= int(value) < n:
        raise IndexOutOfRangeError(name, int(value), n)
    return int(value)
