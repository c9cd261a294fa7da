"""Exception types raised across the package."""


class DimensionError(ValueError):
    """Raised when matrix shapes or block structures do not agree."""


class NumericalError(ArithmeticError):
    """Raised when a numerical routine fails to produce a usable result."""


class EnumerationCapError(ValueError):
    """Raised when a selection enumeration would exceed the configured cap."""


class PreconditionError(ValueError):
    """Raised when an input is well-formed but outside an operation's domain."""


class RetryExhaustedError(RuntimeError):
    """Raised when rejection sampling gives up."""


class MatrixFileError(ValueError):
    """Parse failure in a matrix file, with 1-based line/column position."""

    def __init__(self, message, line=None, column=None, path=None):
        self.line = line
        self.column = column
        self.path = path
        where = []
        if path is not None:
            where.append(str(path))
        if line is not None:
            where.append(f"line {line}")
        if column is not None:
            where.append(f"column {column}")
        prefix = ":".join(where)
        super().__init__(f"{prefix}: {message}" if prefix else message)
