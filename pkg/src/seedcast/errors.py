"""Exception classes shared across the package.

The CLI maps these onto process exit codes: ConfigError -> 1,
DataError -> 2, NumericError -> 3.
"""


class ConfigError(ValueError):
    """Invalid configuration or CLI usage."""


class DataError(ValueError):
    """Unusable input data: parse failures, NaN cells, too few rows."""


class NumericError(ArithmeticError):
    """Numeric contract violation: non-finite inputs, diverging loss."""


class ShapeError(ValueError):
    """Tensor extents incompatible with the requested operation."""
