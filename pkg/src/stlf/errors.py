"""Exception hierarchy shared by all stlf modules."""


class StlfError(Exception):
    """Base class for all errors raised by this package."""


class ParseError(StlfError):
    """A data file could not be parsed; the message carries the row number."""


class DuplicateTimestampError(StlfError):
    pass


class NonHourlySpacingError(StlfError):
    pass


class ZoneNotFoundError(StlfError):
    pass


class StationNotFoundError(StlfError):
    pass


class UnrepairableBoundaryGapError(StlfError):
    pass


class NonPositiveValueError(StlfError):
    pass


class LeadOutOfRangeError(StlfError):
    pass


class InsufficientHistoryError(StlfError):
    pass


class DegenerateSampleSizeError(StlfError):
    pass


class SpanTooShortError(StlfError):
    pass


class MissingExogenousError(StlfError):
    pass


class InSampleOriginError(StlfError):
    pass


class StateSyncError(StlfError):
    """A stateful forecaster's internal clock does not match the requested origin."""


class ChecksumError(StlfError):
    pass


class VersionError(StlfError):
    pass


class ConfigError(StlfError):
    pass
