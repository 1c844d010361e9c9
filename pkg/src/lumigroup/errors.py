"""Exception hierarchy shared by all lumigroup modules."""


class LumigroupError(Exception):
    """Base class for every error raised by the package."""


class InvalidLength(LumigroupError, ValueError):
    pass


class InvalidWindow(LumigroupError, ValueError):
    pass


class InvalidLevels(LumigroupError, ValueError):
    pass


class InvalidRate(LumigroupError, ValueError):
    pass


class EmptySignal(LumigroupError, ValueError):
    pass


class TooFewMaxima(LumigroupError):
    pass


class FlatSignal(LumigroupError):
    pass


class NoRepetition(LumigroupError):
    pass


class NotFound(LumigroupError):
    pass


class EmptyInput(LumigroupError, ValueError):
    pass


class TooShort(LumigroupError, ValueError):
    pass


class DegenerateLabels(LumigroupError, ValueError):
    pass


class DegenerateDataset(LumigroupError, ValueError):
    pass


class TooFewPoints(LumigroupError, ValueError):
    pass


class KindMismatch(LumigroupError, ValueError):
    pass


class NoProfiles(LumigroupError, ValueError):
    pass


class DuplicateId(LumigroupError, KeyError):
    pass


class UnknownClient(LumigroupError, KeyError):
    pass


class MissingPayload(LumigroupError):
    pass


class ProtocolError(LumigroupError, ValueError):
    """Malformed frame on the grouping wire protocol."""


class BadType(ProtocolError):
    pass


class LengthMismatch(ProtocolError):
    pass


class Truncated(ProtocolError):
    pass


class ConfigInvalid(LumigroupError, ValueError):
    pass


class UniverseMismatch(LumigroupError, ValueError):
    pass


class UnknownDevice(LumigroupError, KeyError):
    pass


class TooEarly(LumigroupError, ValueError):
    pass
