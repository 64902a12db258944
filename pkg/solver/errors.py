from typing import Optional


class SolverError(Exception):
    """Base class for every error raised by the solver package."""


class GameParseError(SolverError, ValueError):
    def __init__(self, message: str, line: Optional[int] = None):
        self.line = line
        prefix = f"line {line}: " if line is not None else ""
        super().__init__(f"{prefix}{message}")


class GameValidationError(SolverError, ValueError):
    def __init__(self, violations: list[str]):
        self.violations = violations
        super().__init__("; ".join(violations))


class CapExceededError(SolverError):
    """An enumeration or blow-up exceeded its configured cap."""


class VerificationError(SolverError):
    """A strategy produced by a pipeline failed its own verification."""


class UsageError(SolverError):
    """Invalid combination of inputs for the requested operation."""
