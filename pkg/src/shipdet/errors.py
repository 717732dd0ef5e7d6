"""Exception types shared across the toolkit."""


class ShipdetError(Exception):
    """Base class for all toolkit errors."""


class InvalidBoxError(ShipdetError):
    """A box has non-finite fields or non-positive sides."""


class DegenerateGeometryError(ShipdetError):
    """Input geometry is collinear, empty, or has zero area."""


class OutOfRangeError(ShipdetError):
    """A decoded or derived quantity left its allowed range."""


class ParseError(ShipdetError):
    """A text record could not be parsed.

    Carries the 1-based line number when known.
    """

    def __init__(self, message: str, line: int | None = None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line
