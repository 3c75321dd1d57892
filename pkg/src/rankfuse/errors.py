"""Exception hierarchy shared by every rankfuse module.

All errors derive from :class:`RankfuseError` so callers (and the CLI) can
catch one base class and map it to a nonzero exit code.
"""


class RankfuseError(Exception):
    """Base class for all rankfuse errors."""


class ShapeError(RankfuseError):
    """Operands have incompatible shapes."""


class ParameterError(RankfuseError):
    """A scalar parameter (k, tau, weight, epsilon, ...) is out of range."""


class DegenerateInputError(RankfuseError):
    """An input is structurally valid but unusable, e.g. a zero-norm row."""


class ValidationError(RankfuseError):
    """Data violates a declared invariant (non-finite entry, bad index, ...)."""


class FormatError(RankfuseError):
    """A file could not be parsed; message names the offending location."""
