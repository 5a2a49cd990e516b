"""Exception hierarchy shared by every layer of the package."""


class CertainSyncError(Exception):
    """Base class for all errors raised by certainsync."""


class InvalidConstruction(CertainSyncError, ValueError):
    pass


class ChunkLimitExceeded(CertainSyncError):
    pass


class DiffSizeUnsupported(CertainSyncError, ValueError):
    pass


class ElementOutOfUniverse(CertainSyncError, ValueError):
    pass


class TooLargeToMaterialize(CertainSyncError):
    pass


class TooLargeForOracle(CertainSyncError):
    pass


class SketchShapeMismatch(CertainSyncError, ValueError):
    pass


class MalformedFrame(CertainSyncError, ValueError):
    pass


class SessionNotEstablished(CertainSyncError):
    pass


class ChunkGap(CertainSyncError):
    pass


class SpecMismatch(CertainSyncError):
    pass


class ExhaustedBeforeDecode(CertainSyncError):
    """The construction ran out of chunks while the diff still failed to peel.

    ``outcome`` carries the partial accounting so callers can log the cost.
    """

    def __init__(self, message, outcome=None):
        super().__init__(message)
        self.outcome = outcome


class RoundLimitExceeded(CertainSyncError):
    pass


class SizesExceedUniverse(CertainSyncError, ValueError):
    pass


class MalformedDataset(CertainSyncError, ValueError):
    pass
