"""Exception hierarchy shared across the package."""


class AiqnError(Exception):
    """Base class for all package errors."""


class DomainError(AiqnError, ValueError):
    """An argument violates a documented precondition."""


class ConfigError(AiqnError):
    """Bad experiment configuration or command usage."""


class FormatError(AiqnError):
    """Malformed binary file.  Carries the byte offset of the problem."""

    def __init__(self, message: str, offset: int | None = None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class IntegrationError(AiqnError):
    """Quadrature failed to converge.  Carries the best available estimate."""

    def __init__(self, message: str, best_estimate: float):
        super().__init__(f"{message} (best estimate {best_estimate!r})")
        self.best_estimate = best_estimate


class TrainingError(AiqnError):
    """Training aborted.  Carries the last finite checkpoint when available."""

    def __init__(self, message: str, last_good=None, step: int | None = None):
        super().__init__(message)
        self.last_good = last_good
        self.step = step
