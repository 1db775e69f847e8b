"""Exception types raised across the toolkit."""


class PushIdError(Exception):
    """Base class for all toolkit errors."""


class InvalidTrial(PushIdError, ValueError):
    """A Trial violates one of its structural invariants."""


class MalformedCsv(PushIdError, ValueError):
    pass


class NonUniformTimestep(PushIdError, ValueError):
    pass


class NonFiniteValue(PushIdError, ValueError):
    pass


class MissingKinematics(PushIdError, ValueError):
    """Velocity or acceleration is required but absent."""


class InvalidSpec(PushIdError, ValueError):
    pass


class TooShort(PushIdError, ValueError):
    pass


class NoStopDetected(PushIdError, ValueError):
    pass


class EmptyResult(PushIdError, ValueError):
    pass


class IndexOutOfRange(PushIdError, IndexError):
    pass


class NoMilestone(PushIdError, ValueError):
    """A segmentation milestone (zero crossing) could not be found."""


class OrderViolation(PushIdError, ValueError):
    pass


class UnsupportedStrategy(PushIdError, ValueError):
    pass


class NonFinite(PushIdError, ValueError):
    """A design-matrix entry would overflow or is not finite."""


class SingularSystem(PushIdError, ValueError):
    pass


class PhaseTooShort(PushIdError, ValueError):
    pass


class DimensionMismatch(PushIdError, ValueError):
    pass


class LengthMismatch(PushIdError, ValueError):
    pass


class Empty(PushIdError, ValueError):
    pass


class DegenerateTarget(PushIdError, ValueError):
    """R² is undefined because the observed values have zero variance."""


class EmptyGroup(PushIdError, ValueError):
    pass


class MixedSpec(PushIdError, ValueError):
    pass


class ConfigError(PushIdError, ValueError):
    pass


class EmptyPlot(PushIdError, ValueError):
    pass
