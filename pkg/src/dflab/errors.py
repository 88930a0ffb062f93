"""Exception hierarchy shared across the package.

Every anticipated failure derives from :class:`DflError` so callers (and the
CLI) can distinguish contract violations from genuine bugs.
"""


class DflError(Exception):
    """Base class for all errors raised by dflab."""


class DimensionMismatch(DflError):
    """Tensor extents incompatible with the requested operation."""


class DecodeError(DflError):
    """Byte stream is not a decodable PNG/JPEG image."""


class InvalidZoom(DflError):
    """Zoom fraction outside the half-open interval [0, 1)."""


class ChannelError(DflError):
    """Image has the wrong channel count for the operation."""


class ShapeError(DflError):
    """Model input or parameter tensor has an unexpected shape."""


class FormatError(DflError):
    """File has a bad magic number, version, or malformed structure."""


class ChecksumError(DflError):
    """Stored checksum does not match the file contents."""


class EmptyClassError(DflError):
    """A dataset class directory contains no usable image files."""


class DatasetIOError(DflError):
    """Dataset tree is missing or unreadable."""


class LengthMismatch(DflError):
    """Paired sequences (labels vs. predictions/scores) differ in length."""


class SingleClassError(DflError):
    """ROC analysis needs at least one sample of each class."""
