"""Exception hierarchy shared by every espnet subpackage."""

__all__ = [
    'EspnetError',
    # codec
    'CodecError', 'TruncatedPacket', 'BadChecksum', 'UnsupportedEthertype',
    'UnsupportedIhl', 'UnsupportedVersion', 'LengthMismatch', 'WrongLength',
    'InvariantViolation', 'PacketTooBig',
    # crypto
    'CryptoError', 'SequenceOverflow', 'IcvMismatch', 'BadPadding',
    'BadNextHeader', 'MissingKeyMaterial',
    # tables and registers
    'TableError', 'DuplicateKey', 'SchemaMismatch', 'UnknownTable',
    'UnknownAction', 'NoSuchEntry', 'DuplicatePriority', 'RegisterInUse',
    'IndexOutOfRange',
    # controller
    'ControllerError', 'SpiExhaustion', 'RegisterExhaustion', 'PeerUnreachable',
    'InsertRejected', 'UnknownSpi', 'UnknownProfile', 'UnknownRoadwarrior',
    'InvalidTransition',
    # agent
    'AgentError', 'ConflictingSelector', 'NoSelectorMatch', 'ChannelClosed',
    # simulation
    'SimulationError', 'ScenarioValidationError', 'Deadlock',
]


class EspnetError(Exception):
    """Root of all errors raised by espnet."""


class CodecError(EspnetError):
    pass


class TruncatedPacket(CodecError):
    pass


class BadChecksum(CodecError):
    pass


class UnsupportedEthertype(CodecError):
    pass


class UnsupportedIhl(CodecError):
    pass


class UnsupportedVersion(CodecError):
    pass


class LengthMismatch(CodecError):
    pass


class WrongLength(CodecError):
    pass


class InvariantViolation(CodecError):
    pass


class PacketTooBig(CodecError):
    """The encapsulated packet would not fit the 16-bit IPv4 length field."""


class CryptoError(EspnetError):
    pass


class SequenceOverflow(CryptoError):
    pass


class IcvMismatch(CryptoError):
    pass


class BadPadding(CryptoError):
    pass


class BadNextHeader(CryptoError):
    pass


class MissingKeyMaterial(CryptoError):
    pass


class TableError(EspnetError):
    pass


class DuplicateKey(TableError):
    pass


class SchemaMismatch(TableError):
    pass


class UnknownTable(TableError):
    pass


class UnknownAction(TableError):
    pass


class NoSuchEntry(TableError):
    pass


class DuplicatePriority(TableError):
    pass


class RegisterInUse(TableError):
    pass


class IndexOutOfRange(EspnetError):
    pass


class ControllerError(EspnetError):
    pass


class SpiExhaustion(ControllerError):
    pass


class RegisterExhaustion(ControllerError):
    pass


class PeerUnreachable(ControllerError):
    pass


class InsertRejected(ControllerError):
    pass


class UnknownSpi(ControllerError):
    pass


class UnknownProfile(ControllerError):
    pass


class UnknownRoadwarrior(ControllerError):
    pass


class InvalidTransition(ControllerError):
    pass


class AgentError(EspnetError):
    pass


class ConflictingSelector(AgentError):
    pass


class NoSelectorMatch(AgentError):
    pass


class ChannelClosed(AgentError):
    pass


class SimulationError(EspnetError):
    pass


class ScenarioValidationError(SimulationError):
    """Raised when a scenario document is invalid.

    Parameters
    __________
    path: str
        Location of the offending field, e.g. ``traffic[2].src``.
    message: str
        Human readable reason.
    """

    def __init__(self, path: str, message: str):
        self.path = path
        self.message = message
        super().__init__(f"{path or '<root>'}: {message}")


class Deadlock(SimulationError):
    """The event queue drained while traffic was still outstanding."""

    def __init__(self, message: str, state: dict):
        self.state = state
        super().__init__(message)
