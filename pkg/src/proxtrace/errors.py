"""Exception hierarchy shared by all proxtrace modules."""


class ProxtraceError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(ProxtraceError, ValueError):
    """Invalid argument or configuration value."""


class DimensionMismatchError(ValidationError):
    """Vector dimensions of the operands do not agree."""


class DegenerateDataError(ValidationError):
    """Input data carries no usable extent (e.g. all points identical)."""


class FormatError(ProxtraceError):
    """A persisted file is malformed or has an unsupported version."""


class SamplingError(ProxtraceError):
    """Rejection sampling could not satisfy the placement constraints."""
