"""Exception types raised by fockmodel.

Every numerical verdict that cannot be reached honestly is signalled by one of
these instead of a guessed answer.
"""


class FockModelError(Exception):
    """Base class for all library errors."""


class NotHermitian(FockModelError):
    pass


class NotPSD(FockModelError):
    pass


class Undetermined(FockModelError):
    pass


class RankUnstable(FockModelError):
    pass


class NotConverged(FockModelError):
    def __init__(self, message, residual=None, last=None):
        super().__init__(message)
        self.residual = residual
        self.last = last


class StructureViolation(FockModelError):
    pass


class IllConditioned(FockModelError):
    pass


class NotCNC(FockModelError):
    pass


class NotWandering(FockModelError):
    pass


class NotRegular(FockModelError):
    pass


class NotInvariant(FockModelError):
    pass


class TruncationUnstable(FockModelError):
    pass


class NotComparable(FockModelError):
    pass


class NotPowerBounded(FockModelError):
    pass


class DimensionTooLarge(FockModelError):
    pass
