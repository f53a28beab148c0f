"""Exception types shared across the package."""


class ConeCalcError(Exception):
    """Base class for all errors raised by this package."""


class DimensionMismatchError(ConeCalcError):
    """Operands live in fibers of different dimension."""


class ImproperConeError(ConeCalcError):
    """A cone field violates a properness requirement (e.g. contains a line)."""


class ParseError(ConeCalcError):
    """Expression source is malformed.

    Carries the character offset at which scanning failed.
    """

    def __init__(self, message: str, position: int):
        super().__init__(f"{message} (at position {position})")
        self.position = position


class EvaluationError(ConeCalcError):
    """A function handle produced a non-finite value at a probe point."""


class EstimationError(ConeCalcError):
    """A numerical estimate could not be formed from the available probes."""


class EmptyShellError(EstimationError):
    """A point cloud is too sparse at the requested scales."""
