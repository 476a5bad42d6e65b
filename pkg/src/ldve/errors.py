class LdveError(Exception):
    """Base class for errors raised by this package."""


class DomainError(LdveError, ValueError):
    pass


class TreeError(LdveError, ValueError):
    """Malformed tree, incomplete assignment or dangling branch."""


class InferenceError(LdveError):
    """Query cannot be answered (zero evidence, unbounded mass, ...)."""


class UnboundedMassError(InferenceError):
    pass


class SpecError(LdveError, ValueError):
    """Network or config file could not be parsed or does not type-check."""
