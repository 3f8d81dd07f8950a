"""Exception types shared across the toolkit."""


class HetmergeError(Exception):
    """Base class for all errors raised by this package."""


class ValidationError(HetmergeError):
    """Input violates a documented precondition or invariant."""


class ShapeError(ValidationError):
    """Operands have incompatible dimensions."""


class FormatError(HetmergeError):
    """A container file is not in the expected on-disk format."""
