"""Exception hierarchy shared by all modules."""


class ExcessRiskError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(ExcessRiskError, ValueError):
    """An invalid distribution, class, or experiment specification."""

    def __init__(self, message, errors=None):
        super().__init__(message)
        self.errors = list(errors) if errors else [message]


class CapacityError(ExcessRiskError):
    """An exact or exhaustive computation was requested above its size cap."""

    def __init__(self, message, size=None, cap=None):
        super().__init__(message)
        self.size = size
        self.cap = cap


class InconsistencyError(ExcessRiskError, ValueError):
    """A sample is not realizable by the concept class a scheme expects."""


class InfeasibleError(ExcessRiskError):
    """The hard-margin problem has no separating hyperplane."""


class ConditioningError(ExcessRiskError):
    """The separating margin is too small to solve reliably."""


class SchemeSizeError(ExcessRiskError):
    """A compression set exceeded the declared size bound."""


class PrecisionError(ExcessRiskError):
    """Too few trials to estimate the requested quantile."""
