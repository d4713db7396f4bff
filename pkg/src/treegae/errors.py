"""Exception types shared across the package."""


class TreegaeError(Exception):
    """Base class for all package errors."""


class DimensionError(TreegaeError, ValueError):
    """Matrix shapes incompatible for the requested operation."""


class ContractError(TreegaeError, ValueError):
    """A documented precondition was violated by the caller."""


class ParseError(TreegaeError, ValueError):
    """A dataset or checkpoint file could not be parsed."""


class NumericError(TreegaeError, ArithmeticError):
    """A computation produced a non-finite value (NaN loss and similar)."""
