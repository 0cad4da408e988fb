"""Exception types raised across the package."""


class PulseStreamError(ValueError):
    """Base class for invalid inputs and configurations."""


class DomainMismatchError(PulseStreamError):
    """Operands live on different domains or have incompatible sizes."""


class ModelError(PulseStreamError):
    """A pulse model, support or approximation problem is invalid."""


class InstanceGenerationError(PulseStreamError):
    """Random instance generation could not satisfy the separation model."""


class SignalFormatError(PulseStreamError):
    """A signal file is malformed."""


class IntegralityError(PulseStreamError):
    """An LP relaxation returned a fractional vertex where one was not allowed."""
