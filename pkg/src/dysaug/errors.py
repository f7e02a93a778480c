"""Exception types raised across the package."""


class DysaugError(Exception):
    """Base class for all errors raised by dysaug."""


# signal
class AlphaOutOfRange(DysaugError, ValueError):
    pass


class WaveTooShort(DysaugError, ValueError):
    pass


class InvalidMelConfig(DysaugError, ValueError):
    pass


class InvalidWsolaConfig(DysaugError, ValueError):
    pass


class WavFormatError(DysaugError, ValueError):
    """Audio file is not 16-bit PCM mono RIFF/WAVE."""


# subspace
class NonFiniteInput(DysaugError, ValueError):
    pass


class ShapeMismatch(DysaugError, ValueError):
    pass


# corpus
class EmptyAlignment(DysaugError, ValueError):
    pass


class AllSilence(DysaugError, ValueError):
    pass


class WordMismatch(DysaugError, ValueError):
    pass


class ZeroDuration(DysaugError, ValueError):
    pass


class EmptyInput(DysaugError, ValueError):
    pass


class ChannelMismatch(DysaugError, ValueError):
    pass


class EmptySide(DysaugError, ValueError):
    pass


class MissingWordIds(DysaugError, ValueError):
    pass


class DuplicateId(DysaugError, ValueError):
    pass


class CorruptArchive(DysaugError):
    """Archive or checkpoint failed magic, length or checksum validation."""


class ManifestError(DysaugError, ValueError):
    pass


# nn
class NotScalar(DysaugError, ValueError):
    pass


class DetachedGraph(DysaugError, RuntimeError):
    pass


class MissingGrads(DysaugError, RuntimeError):
    pass


# gan
class UnalignedPair(DysaugError, ValueError):
    pass


class EmptyTrainingSet(DysaugError, ValueError):
    pass


class UnknownSpeakerInPairing(DysaugError, KeyError):
    pass


# cli
class ConfigError(DysaugError, ValueError):
    pass


class MissingCheckpoint(DysaugError, FileNotFoundError):
    pass


class CountMismatch(DysaugError, RuntimeError):
    pass


class MissingAlignments(DysaugError, ValueError):
    """Raised with the list of speakers that have no usable alignments."""

    def __init__(self, speakers):
        self.speakers = list(speakers)
        super().__init__(f"no alignments for: {', '.join(self.speakers)}")
