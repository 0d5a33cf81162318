"""Exception hierarchy shared by every polling_lab module."""


class PollingLabError(Exception):
    """Base class for all library errors."""


class NumericalError(PollingLabError):
    """A numerical routine could not deliver a result to its stated accuracy.

    The CLI maps every subclass to exit code 3.
    """


class ValidationError(PollingLabError, ValueError):
    """Invalid parameters or configuration (CLI exit code 2)."""

    def __init__(self, message, key=None):
        super().__init__(message)
        self.key = key


class ConfigError(ValidationError):
    pass


class ParseError(ValidationError):
    pass


class HeavyTailNoClosedFormLst(PollingLabError):
    """The LST of a heavy-tailed (Pareto) law has no closed form here."""


class InfiniteMoment(PollingLabError):
    """A formula needs a moment that is infinite for the given law."""


class Unstable(PollingLabError):
    """The model violates the stability condition of the queried quantity."""


class NotRegularlyVarying(PollingLabError):
    pass


class AsymmetricModel(ValidationError):
    pass


class NonExponentialService(ValidationError):
    pass


class EmptySample(ValidationError):
    pass


class AggregatedUnstable(Unstable):
    pass


class NonConvergence(NumericalError):
    pass


class InversionAccuracyLoss(NumericalError):
    pass


class QuadratureFailure(NumericalError):
    pass


class RootNotFound(NumericalError):
    def __init__(self, message, theta=None):
        super().__init__(message)
        self.theta = theta


class SingularSystem(NumericalError):
    pass


class SeriesDiverging(NumericalError):
    pass


class DimensionMismatch(NumericalError):
    pass
