"""Exception hierarchy.

Configuration problems and numerical failures are kept apart so the command
line front end can map them onto distinct exit codes.
"""


class SequifiltError(Exception):
    """Base class for all errors raised by this package."""


class ConfigurationError(SequifiltError, ValueError):
    """Invalid input, configuration or unsupported model setup."""


class MeasurementParseError(ConfigurationError):
    """A measurement file row could not be parsed."""

    def __init__(self, message, line=None):
        self.line = line
        if line is not None:
            message = f"line {line}: {message}"
        super().__init__(message)


class NumericalError(SequifiltError, ArithmeticError):
    """A computation produced an unusable result."""


class RejectedSampleError(NumericalError):
    """A sampler returned a non-finite draw."""

    def __init__(self, index, value=None):
        self.index = index
        super().__init__(f"sampler returned a non-finite value at draw {index}: {value!r}")


class EvaluationError(NumericalError):
    """A test function evaluated to a non-finite value."""

    def __init__(self, index, value=None):
        self.index = index
        super().__init__(f"function is not finite at particle {index}: {value!r}")


class LikelihoodCollapseError(NumericalError):
    """Every particle has zero posterior weight after reweighting."""


class DivergenceError(NumericalError):
    """The ODE state became non-finite during integration."""

    def __init__(self, time):
        self.time = time
        super().__init__(f"integration diverged at time {time:.6g} s")


class InvalidStateError(NumericalError):
    """A Markov chain was started where the target density vanishes."""


class DegenerateSampleError(NumericalError):
    """A weighted sample has zero spread where a positive spread is required."""
