"""Exception types shared across the package."""


class CrossIterError(Exception):
    """Base class for every error raised by this package."""


class DimensionMismatchError(CrossIterError, ValueError):
    """Operands have incompatible shapes."""


class SpecError(CrossIterError, ValueError):
    """A spectrum specification, matrix flag, or run configuration is invalid."""


class PreconditionError(CrossIterError, ValueError):
    """A mathematical hypothesis required by an operation does not hold.

    The message names the violated hypothesis (grade of the start vector,
    positive definiteness, unit norm, ...).
    """


class BreakdownError(CrossIterError, RuntimeError):
    """An iteration lost a numerical property it relies on mid-run.

    The partial trace, when one exists, is attached as ``trace``.
    """

    def __init__(self, message, trace=None):
        super().__init__(message)
        self.trace = trace


class ConvergenceFailure(CrossIterError, RuntimeError):
    """An inner solver exhausted its iteration budget."""

    def __init__(self, message, diagnostics=None):
        super().__init__(message)
        self.diagnostics = dict(diagnostics or {})
