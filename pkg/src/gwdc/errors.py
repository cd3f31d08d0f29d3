"""Exception hierarchy shared by every stage of the codec."""


class CodecError(Exception):
    """Base class for all codec errors."""


class ConfigurationError(CodecError, ValueError):
    """Invalid dictionary, quantizer or stopping-rule parameters."""


class DimensionError(CodecError, ValueError):
    """Vector or block lengths do not agree."""


class InputError(CodecError, ValueError):
    """Unusable input signal or metric arguments."""


class InvariantError(CodecError, AssertionError):
    """An internal data-model invariant was violated."""


class CorruptionError(CodecError):
    """Malformed or truncated encoded data.

    ``offset`` is the byte position in the container where the problem was
    detected, or ``None`` when no position applies (e.g. a raw symbol stream).
    """

    def __init__(self, message, offset=None):
        if offset is not None:
            message = f"{message} (at byte offset {offset})"
        super().__init__(message)
        self.offset = offset


class WavParseError(CodecError, ValueError):
    """Malformed or unsupported RIFF/WAVE data."""
