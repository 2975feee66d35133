"""Exception and warning types shared across the package."""


class TonalVaeError(Exception):
    """Base class for every error raised by this package."""


class DataError(TonalVaeError):
    """Input data could not be interpreted."""


class MalformedFile(DataError):
    pass


class SchemaError(DataError):
    def __init__(self, message, path=()):
        self.path = tuple(path)
        where = "/".join(str(p) for p in self.path) or "<root>"
        super().__init__(f"{where}: {message}")


class ShapeError(DataError, ValueError):
    pass


class ParseError(DataError):
    pass


class OutOfRange(DataError, ValueError):
    pass


class NumericError(TonalVaeError):
    """A numerical routine produced or received non-finite values."""


class NonFinite(NumericError):
    pass


class DegenerateData(NumericError):
    pass


class TiedAngles(NumericError):
    pass


# Warnings: recoverable conditions that are recorded, not raised.

class TonalVaeWarning(UserWarning):
    pass


class UnmatchedNoteOn(TonalVaeWarning):
    pass


class MissingKeyWarning(TonalVaeWarning):
    pass


class TranspositionFold(TonalVaeWarning):
    pass


class InvalidEvent(TonalVaeWarning):
    pass


class CoincidentCentroids(TonalVaeWarning):
    pass
