"""Exception hierarchy. Each error carries the CLI exit code it maps to."""


class CFXError(Exception):
    exit_code = 1


class PoleError(CFXError, ZeroDivisionError):
    """The matrix sends the point (or part of the interval) to infinity."""

    exit_code = 2


class UnderflowError(CFXError):
    """A junction rewrite needed digits that are no longer available."""

    exit_code = 3


class NeedMoreDigits(CFXError):
    """The digit source ran dry before a decision could be made."""

    exit_code = 3


class NonTerminationError(CFXError):
    exit_code = 4

    def __init__(self, message, trace=()):
        super().__init__(message)
        self.trace = list(trace)


class ClosureError(CFXError):
    """A successor escaped the enumerated state set."""

    exit_code = 5


class PeriodicityNotFound(CFXError):
    exit_code = 5


class InvalidMatrix(CFXError, ValueError):
    exit_code = 1


class FormatError(CFXError, ValueError):
    exit_code = 1
