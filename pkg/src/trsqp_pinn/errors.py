"""Exception types shared across the package."""


class ConfigurationError(ValueError):
    """Invalid sizes, splits, or missing inputs for an operation."""


class ParameterShapeError(ValueError):
    """Parameter vector length does not match the network architecture."""


class NumericOverflowError(FloatingPointError):
    """A non-finite value appeared during evaluation or differentiation."""


class InternalInvariantError(RuntimeError):
    """An algorithmic invariant (e.g. positive definiteness) was violated."""


class TrainingDivergedError(RuntimeError):
    """Training produced a non-finite loss or constraint value.

    The offending optimizer state is attached as ``state`` for inspection.
    """

    def __init__(self, message, state=None):
        super().__init__(message)
        self.state = state
