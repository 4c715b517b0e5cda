"""Exception hierarchy shared across the library."""


class SemigenError(Exception):
    """Base class for all library-specific errors."""


class DimensionMismatch(SemigenError):
    pass


class NonFiniteValue(SemigenError):
    pass


class TooFewObservations(SemigenError):
    pass


class BandwidthNonPositive(SemigenError):
    pass


class DegenerateColumn(SemigenError):
    pass


class DegenerateIndex(SemigenError):
    pass


class OptimizerDidNotMove(SemigenError):
    pass


class LengthMismatch(SemigenError):
    pass
