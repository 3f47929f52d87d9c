"""Exception types shared across the package."""


class SparseDistError(Exception):
    """Base class for all sparsedist errors."""


class DimensionError(SparseDistError):
    """Shapes or sizes incompatible with the requested operation."""


class ParameterError(SparseDistError):
    """A configuration value is out of its valid range."""


class DegenerateInputError(SparseDistError):
    """Input is valid in shape but carries no usable signal (e.g. zero variance)."""


class NumericError(SparseDistError):
    """Non-finite values or numerically meaningless input."""


class CompressorError(SparseDistError):
    """The compression backend failed."""
