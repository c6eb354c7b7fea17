"""Exception hierarchy shared by all modules."""


class BladeASError(Exception):
    """Base class for every error raised by the package."""


class DomainError(BladeASError, ValueError):
    """Argument outside the mathematical domain of an operation."""


class InvalidOrderError(BladeASError, ValueError):
    pass


class FitError(BladeASError, ValueError):
    """Least-squares fit could not be carried out.

    ``condition`` holds the condition number of the system when the
    failure is due to rank deficiency.
    """

    def __init__(self, message, condition=None):
        super().__init__(message)
        self.condition = condition


class GeometryError(BladeASError, ValueError):
    pass


class ParseError(BladeASError, ValueError):
    def __init__(self, message, line=None):
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)
        self.line = line


class InvalidCodeError(ParseError):
    pass


class CannotScaleError(BladeASError, ValueError):
    pass


class BoundsError(BladeASError, ValueError):
    pass


class SamplingError(BladeASError, RuntimeError):
    pass


class SchemaError(ParseError):
    pass


class DataError(BladeASError, ValueError):
    pass


class ConvergenceError(BladeASError, RuntimeError):
    def __init__(self, message, station=None):
        super().__init__(message)
        self.station = station


class DegenerateError(BladeASError, ValueError):
    pass


class ShapeError(BladeASError, ValueError):
    pass


class InfeasibleError(BladeASError, ValueError):
    """No grid point satisfies every constraint.

    ``binding`` lists the labels of the constraints responsible.
    """

    def __init__(self, message, binding=()):
        super().__init__(message)
        self.binding = list(binding)
