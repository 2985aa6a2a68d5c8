"""Exception hierarchy shared across the package."""


class BlidError(Exception):
    """Base class for all package errors."""


class MalformedSystemError(BlidError, ValueError):
    pass


class GenerationFailedError(BlidError):
    pass


class BandwidthUndefinedError(BlidError):
    pass


class IntegrationFailedError(BlidError):
    def __init__(self, message, error_estimate=None):
        super().__init__(message)
        self.error_estimate = error_estimate


class SimulationDivergedError(BlidError):
    pass


class DegenerateSignalError(BlidError, ValueError):
    pass


class NotIdentifiableError(BlidError):
    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class SolveFailedError(BlidError):
    pass


class KernelIndefiniteError(BlidError):
    pass


class TuningFailedError(BlidError):
    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace or []


class UndefinedFitError(BlidError, ValueError):
    pass


class ConfigError(BlidError, ValueError):
    pass
