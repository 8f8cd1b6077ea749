"""Exception hierarchy shared by every subpackage."""


class SoundChainError(Exception):
    """Base class for all errors raised by soundchain."""


class ConfigError(SoundChainError, ValueError):
    pass


# corpus
class InvalidFormants(ConfigError):
    pass


class InvalidCutoff(ConfigError):
    pass


class EmptyCorpus(ConfigError):
    pass


class SampleRateMismatch(SoundChainError):
    pass


class ChannelMismatch(SoundChainError):
    pass


class AudioIoError(SoundChainError, OSError):
    pass


# tensor
class ShapeError(SoundChainError, ValueError):
    pass


class NotScalar(SoundChainError, ValueError):
    pass


class GraphConsumed(SoundChainError, RuntimeError):
    pass


# gan / lineage
class DivergedError(SoundChainError, FloatingPointError):
    """Training produced a non-finite loss.

    ``checkpoint`` holds the last finite state, ``generation`` is filled in by
    the lineage runner.
    """

    def __init__(self, message, checkpoint=None, step=None, generation=None):
        super().__init__(message)
        self.checkpoint = checkpoint
        self.step = step
        self.generation = generation


class ResumeError(SoundChainError):
    def __init__(self, message, generation=None):
        super().__init__(message)
        self.generation = generation


# acoustics
class TooShort(SoundChainError, ValueError):
    pass


class NoBurstDetected(SoundChainError):
    pass


class NoVoicingDetected(SoundChainError):
    pass


class MomentsUndefined(SoundChainError, ArithmeticError):
    """Skew and kurtosis are undefined because the spectral SD is zero."""

    def __init__(self, message, cog=None, sd=None):
        super().__init__(message)
        self.cog = cog
        self.sd = sd


# stats
class LevelError(SoundChainError, ValueError):
    pass


class SingularDesign(SoundChainError, ValueError):
    pass


class DomainError(SoundChainError, ValueError):
    pass


class NotConverged(SoundChainError, RuntimeError):
    def __init__(self, message, fit=None):
        super().__init__(message)
        self.fit = fit


class EmptyData(SoundChainError, ValueError):
    pass


class TooFewPoints(SoundChainError, ValueError):
    pass


class DegenerateBandwidth(TooFewPoints):
    pass
