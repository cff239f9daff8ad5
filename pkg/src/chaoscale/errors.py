"""Exception hierarchy shared across the library."""


class ChaoscaleError(Exception):
    """Base class for all library errors."""


class DimensionMismatchError(ChaoscaleError):
    """A measure, point or model was used with an incompatible dimension."""


class UnsupportedDimensionError(ChaoscaleError):
    """The operation is only implemented in dimension one."""


class EnumerationTooLargeError(ChaoscaleError):
    """The exact outcome enumeration would exceed the declared cap."""


class DerivativeUnavailableError(ChaoscaleError):
    """A functional derivative beyond the declared order was requested."""


class OracleUnavailableError(ChaoscaleError):
    """No analytic reference value exists for the requested quantity."""


class NumericalBlowupError(ChaoscaleError):
    """A simulation produced non-finite particle positions."""

    def __init__(self, step_index, message=None):
        self.step_index = step_index
        super().__init__(message or f"non-finite particle positions after step {step_index}")


class ConfigError(ChaoscaleError):
    """An experiment configuration failed validation."""

    def __init__(self, field, message):
        self.field = field
        super().__init__(f"invalid config field '{field}': {message}")
