"""Exception types shared across the package."""


class VosmemError(Exception):
    """Base class for all errors raised by vosmem."""


class DimensionError(VosmemError, ValueError):
    """Grid shapes or channel counts that cannot be combined."""


class ResolutionError(VosmemError, ValueError):
    """A resample target that does not divide the source resolution."""


class DegenerateRowError(VosmemError, ArithmeticError):
    """raw_sum normalization hit a row whose sum is not strictly positive.

    Signals the caller that it may fall back to softmax for this matrix.
    """


class AlignmentError(VosmemError, ValueError):
    """Object lists that should be parallel have different lengths."""


class OverlapError(VosmemError, ValueError):
    """Hard-assigned object masks claim the same pixel."""


class DegenerateAnchorError(VosmemError, ValueError):
    """First-frame quality score is not strictly positive."""


class CausalityError(VosmemError, ValueError):
    """A memory frame index lies in the future of the current frame."""


class OrderingError(VosmemError, ValueError):
    """Admission attempted for a frame index not beyond all stored ones."""


class NoEvictableError(VosmemError, RuntimeError):
    """Eviction requested but only protected entries remain."""


class EmptyMemoryError(VosmemError, RuntimeError):
    """An operation needs at least one stored memory entry."""


class DecodeError(VosmemError, ValueError):
    """Read output does not carry the label channels decoding expects."""


class SpecError(VosmemError, ValueError):
    """Invalid synthetic-video or experiment specification."""


class ConfigError(VosmemError, ValueError):
    """Malformed or inconsistent configuration file."""
