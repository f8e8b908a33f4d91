"""Exception classes shared across the package."""


class SpdelabError(Exception):
    """Base class for all package errors."""


class ContractViolation(SpdelabError):
    """An operation was called with inputs violating its contract."""


class ConfigError(SpdelabError):
    """Invalid configuration (bad field values, unknown preset, ...)."""

    def __init__(self, message, field=None):
        super().__init__(message)
        self.field = field


class BlowUpError(SpdelabError):
    """Solver state became NaN/Inf; carries the offending step index."""

    def __init__(self, step, message=None):
        super().__init__(message or f"solution blew up at step {step}")
        self.step = step


class DegenerateStudyError(SpdelabError):
    """A Monte Carlo study produced no usable estimate."""
