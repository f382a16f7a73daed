"""Exception hierarchy shared by every stage of the mosaicking pipeline."""


class DroneMosaicError(Exception):
    """Base class for all errors raised by this package."""


# image core
class OutOfBounds(DroneMosaicError, ValueError):
    pass


class DimensionMismatch(DroneMosaicError, ValueError):
    pass


class ImageIOError(DroneMosaicError, OSError):
    pass


class UnsupportedFormat(ImageIOError):
    pass


class CorruptFile(ImageIOError):
    pass


# features
class FilterTooLarge(DroneMosaicError, ValueError):
    pass


class WindowOutOfBounds(DroneMosaicError, ValueError):
    pass


# matching / transform
class EmptyInput(DroneMosaicError, ValueError):
    pass


class IndexOutOfRange(DroneMosaicError, IndexError):
    pass


class StitchError(DroneMosaicError):
    """A pair of frames could not be joined.

    ``pair`` names the two frames involved when the error surfaces from a
    sequence or mosaic, ``partial`` carries whatever was assembled before
    the failure.
    """

    def __init__(self, message, pair=None, partial=None, report=None):
        super().__init__(message)
        self.pair = pair
        self.partial = partial
        self.report = report


class InsufficientMatches(StitchError):
    pass


class NoConsensus(StitchError):
    pass


class NoOverlap(StitchError):
    pass


class ExcessiveDrift(StitchError):
    pass


# flightsim
class SceneTooSmall(DroneMosaicError, ValueError):
    pass


class RegionMismatch(DroneMosaicError, ValueError):
    pass


class ConfigError(DroneMosaicError, ValueError):
    pass
