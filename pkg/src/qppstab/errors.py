class QPPError(Exception):
    """Base class for all errors raised by qppstab."""


class DomainError(QPPError, ValueError):
    """A point lies outside the open positive orthant (or another domain)."""


class StructuralError(QPPError, ValueError):
    """Inconsistent dimensions, singular matrices or similar shape problems."""


class DecompositionError(QPPError):
    """The Poisson decomposition conditions fail.

    ``report`` carries the :class:`~qppstab.core.PoissonCheck` residuals.
    """

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class RefusalError(QPPError):
    """A certificate cannot be produced for the requested input."""


class NotFixedPointError(RefusalError):
    pass


class NotInKernelError(RefusalError):
    pass


class DivergenceError(QPPError):
    """Integration overflowed; ``last_state``/``trajectory`` hold the valid prefix."""

    def __init__(self, message, last_state=None, trajectory=None):
        super().__init__(message)
        self.last_state = last_state
        self.trajectory = trajectory


class SystemFileError(QPPError, ValueError):
    """Malformed system file. ``field`` and ``line`` locate the problem when known."""

    def __init__(self, message, field=None, line=None):
        loc = []
        if line is not None:
            loc.append(f"line {line}")
        if field is not None:
            loc.append(f"field '{field}'")
        super().__init__(f"{message} ({', '.join(loc)})" if loc else message)
        self.field = field
        self.line = line
