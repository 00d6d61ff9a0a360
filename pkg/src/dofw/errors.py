"""Exception types raised across the package."""


class DofwError(Exception):
    """Base class for package errors."""


class DimensionError(DofwError, ValueError):
    pass


class NonFiniteError(DofwError, ValueError):
    pass


class UnsupportedSetError(DofwError, NotImplementedError):
    pass


class ScheduleError(DofwError, ValueError):
    """Infeasible network parameters or a schedule violating the connectivity assumptions."""


class ConvergenceError(DofwError, RuntimeError):
    pass


class ConfigError(DofwError, ValueError):
    """Invalid experiment configuration; ``path`` names the offending field."""

    def __init__(self, message, path=None):
        self.message = message
        self.path = path
        super().__init__(f"{path}: {message}" if path else message)
