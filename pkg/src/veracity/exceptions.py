"""Exception hierarchy shared by every module."""


class VeracityError(Exception):
    """Base class for all errors raised by this package."""


class DimensionError(VeracityError, ValueError):
    """Operand shapes do not conform."""


class NumericError(VeracityError, ArithmeticError):
    """A loss or gradient became non-finite."""


class StateError(VeracityError, RuntimeError):
    """A layer was used out of order, e.g. backward before forward."""


class ParseError(VeracityError, ValueError):
    """An input file could not be parsed.

    ``line`` is the 1-based line number when known.
    """

    def __init__(self, message, path=None, line=None):
        where = ""
        if path is not None:
            where = f"{path}"
            if line is not None:
                where += f":{line}"
            where += ": "
        elif line is not None:
            where = f"line {line}: "
        super().__init__(where + message)
        self.path = path
        self.line = line


class SplitError(VeracityError, ValueError):
    """An event-disjoint split cannot be formed."""


class CheckpointError(VeracityError, ValueError):
    """A checkpoint is malformed or incompatible with the running code."""
