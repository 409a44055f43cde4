"""Exception types raised across pairsight."""


class PairsightError(Exception):
    """Base class for all library errors."""


class DomainError(PairsightError, ValueError):
    """An argument lies outside the domain of the operation."""


class ConfigError(PairsightError, ValueError):
    """Invalid or inconsistent configuration."""


class InsufficientDataError(PairsightError, ValueError):
    """Not enough counts or samples to compute an estimate."""


class ContractViolation(PairsightError, ValueError):
    """An input breaks a documented precondition (e.g. unsorted timestamps)."""


class ParseError(PairsightError, ValueError):
    """Malformed record in an event or frame file."""

    def __init__(self, message, line=None, path=None):
        self.line = line
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
