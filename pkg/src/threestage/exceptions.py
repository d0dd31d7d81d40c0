"""Exception hierarchy shared by the library and the CLI."""


class ThreeStageError(Exception):
    """Base class for all errors raised by this package."""


class DomainError(ThreeStageError, ValueError):
    """An argument lies outside the domain of a function."""


class DegenerateSampleError(ThreeStageError, ArithmeticError):
    """The GLR statistic is undefined (fewer than two points or zero variance)."""


class DegenerateDataError(ThreeStageError):
    """A procedure reached a decision point with degenerate data and cannot decide."""


class InsufficientDataError(ThreeStageError):
    """An observation source ran out before the procedure could stop."""


class InputError(ThreeStageError, ValueError):
    """Malformed external input, e.g. an unparseable data file line."""
