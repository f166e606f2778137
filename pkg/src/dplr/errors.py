"""Exception hierarchy shared by the library and the command line."""


class DPLRError(Exception):
    """Base class for all errors raised by dplr."""


class DimensionError(DPLRError, ValueError):
    """Arguments have inconsistent shapes or invalid values."""


class ConfigError(DPLRError, ValueError):
    """A configuration is malformed or contains unknown keys."""


class ParseError(DPLRError, ValueError):
    """A data or model file could not be parsed."""


class NumericalError(DPLRError, ArithmeticError):
    """A computation produced a non-finite or otherwise invalid quantity."""


class NumericalDegeneracyError(NumericalError):
    """A matrix that must be symmetric positive definite is not."""


class ELBODecreaseError(NumericalError):
    """The evidence lower bound decreased during coordinate ascent."""
