"""Exception hierarchy shared by all modules."""


class NoisyExtremesError(Exception):
    """Base class for every error raised by this package."""


class ConfigurationError(NoisyExtremesError, ValueError):
    pass


class EscapedState(NoisyExtremesError, ValueError):
    pass


class EscapeDominates(NoisyExtremesError, RuntimeError):
    """Every stationary sample left the basin of attraction."""


class InfeasibleThreshold(NoisyExtremesError, ValueError):
    pass


class InsufficientData(NoisyExtremesError, ValueError):
    pass


class NonFiniteInput(NoisyExtremesError, ValueError):
    pass


class DegenerateSample(NoisyExtremesError, ValueError):
    """Block maxima have (numerically) zero spread: no non-degenerate EVL."""


class TooFewBlocks(NoisyExtremesError, ValueError):
    pass


class NonConvergence(NoisyExtremesError, RuntimeError):
    pass


class SupportViolation(NoisyExtremesError, ValueError):
    pass


class ZeroDistance(NoisyExtremesError, ValueError):
    pass


class EpsilonRequired(NoisyExtremesError, ValueError):
    pass


class NotPeriodic(NoisyExtremesError, ValueError):
    pass


class NotExpanding(NoisyExtremesError, ValueError):
    """Periodic point is not repelling, so the clustering formula does not apply."""


class TruncationTooSmall(NoisyExtremesError, ValueError):
    pass


class TooFewExceedances(NoisyExtremesError, ValueError):
    pass


class AllRealizationsFailed(NoisyExtremesError, RuntimeError):
    pass


class SchemaError(ConfigurationError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")


class RangeError(ConfigurationError):
    def __init__(self, path: str, message: str):
        self.path = path
        super().__init__(f"{path}: {message}")
