"""Exception types raised across the package."""


class RFAError(Exception):
    """Base class for all errors raised by :mod:`rfa`."""


class DimensionError(RFAError, ValueError):
    """Array shapes or name lists do not line up."""


class DegenerateInputError(RFAError, ValueError):
    """Input has no variance (or no rows) where some is required."""


class IllConditionedError(RFAError, ArithmeticError):
    """Unpenalized least squares on a rank-deficient design."""


class DataFormatError(RFAError, ValueError):
    """A data file is malformed. Carries the offending path and line when known."""

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        super().__init__(where + message)
        self.path = path
        self.line = line


class ConfigError(RFAError, ValueError):
    """A run configuration failed validation."""
