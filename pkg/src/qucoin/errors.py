class QuCoinError(Exception):
    """Base class for protocol errors."""


class UnitDestroyed(QuCoinError):
    """Operation attempted on a token unit that was already measured out."""


class DoubleSpendAttempt(UnitDestroyed):
    pass


class MaxRetriesExceeded(QuCoinError):
    """Signing loop did not terminate; the unit is very likely not a token state."""


class VerificationFailed(QuCoinError):
    pass


class ChannelDropped(QuCoinError):
    pass


class WrongKey(QuCoinError):
    pass


class MalformedRequest(QuCoinError):
    pass


class LedgerError(QuCoinError):
    pass


class Rejected(LedgerError):
    pass


class Unauthorized(LedgerError):
    pass


class UnknownToken(LedgerError, KeyError):
    pass


class InvalidSignature(LedgerError):
    pass


class InsufficientValue(LedgerError):
    pass


class AlreadySettled(LedgerError):
    pass


class ConfigError(QuCoinError):
    pass
