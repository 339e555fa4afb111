"""Exception types raised by the simulators."""


class DomainError(ValueError):
    """An argument lies outside the domain of the operation."""


class PreconditionError(ValueError):
    """A documented precondition of the operation does not hold."""


class CountingFailsError(PreconditionError):
    """Transmission counting carries no information (|alpha1| == |alpha2|)."""


class RegimeError(PreconditionError):
    """The protocol is used outside the regime it was designed for."""


class ResourceError(RuntimeError):
    """The requested computation exceeds a configured size limit."""
