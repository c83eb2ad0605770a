"""Exception hierarchy shared by all dwid modules.

Everything raised on invalid input derives from :class:`ValidationError`
so the CLI can map it to a stable exit code (1). Plain ``OSError`` is left
alone and maps to exit code 2.
"""


class DwidError(Exception):
    """Base class for all dwid-specific errors."""


class ValidationError(DwidError):
    """Input violates a documented precondition or invariant."""


class ParameterError(ValidationError):
    """Bad algorithm parameter (even patch size, empty subset, ...)."""


class ContainerError(ValidationError):
    """Base for on-disk container problems."""


class MalformedHeaderError(ContainerError):
    """Sidecar JSON is unreadable or missing required keys."""


class UnknownFormatVersionError(ContainerError):
    """Sidecar declares a format version this build does not understand."""


class DimensionMismatchError(ContainerError):
    """Pixel payload size disagrees with the declared dimensions."""


class NonFinitePixelError(ContainerError):
    """Pixel payload contains NaN or infinite values."""
