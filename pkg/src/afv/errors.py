"""Exception hierarchy. Each class carries the CLI exit code it maps to."""


class AfvError(Exception):
    exit_code = 1


class ValidationError(AfvError, ValueError):
    """Bad arguments, malformed CSV rows, unknown config keys."""

    exit_code = 2


class DomainError(ValidationError):
    """Coordinates or values outside an operation's domain."""


class ParameterError(ValidationError):
    pass


class FormatError(ValidationError):
    """A file does not follow its declared on-disk format."""


class OrderingError(ValidationError):
    """A pipeline stage was requested before its upstream artifacts exist."""


class StateError(AfvError, RuntimeError):
    exit_code = 2


class FrameIOError(AfvError, OSError):
    exit_code = 3


class DegenerateStatisticError(AfvError, ArithmeticError):
    """A test statistic is undefined (zero variance, zero error SS)."""

    exit_code = 4
