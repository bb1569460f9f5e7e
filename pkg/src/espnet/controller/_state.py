import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Any

from .._errors import InvalidTransition
from ..crypto import SecurityAssociation
from ..pipeline import TableEntry
from ._profiles import TunnelProfile

logger = logging.getLogger(__name__)

__all__ = ['TunnelStatus', 'TunnelState', 'InstalledEntry']


class TunnelStatus(str, Enum):
    SETTING_UP = 'setting_up'
    ESTABLISHED = 'established'
    RENEWING_I = 'renewing_i'
    RENEWING_J = 'renewing_j'
    DELETING = 'deleting'
    DOWN = 'down'

    @property
    def is_renewing(self) -> bool:
        return self in (TunnelStatus.RENEWING_I, TunnelStatus.RENEWING_J)


_S = TunnelStatus
_TRANSITIONS: dict[TunnelStatus, set[TunnelStatus]] = {
    _S.SETTING_UP: {_S.ESTABLISHED, _S.DOWN},
    _S.ESTABLISHED: {_S.RENEWING_I, _S.RENEWING_J, _S.DELETING},
    _S.RENEWING_I: {_S.ESTABLISHED, _S.DELETING},
    _S.RENEWING_J: {_S.ESTABLISHED, _S.DELETING},
    _S.DELETING: {_S.DOWN},
    _S.DOWN: set(),
}


@dataclass(frozen=True)
class InstalledEntry:
    """A table entry the controller owns on a switch."""
    switch_id: str
    table: str
    key: tuple
    entry: TableEntry


@dataclass
class TunnelState:
    """Both SAs of a tunnel and its lifecycle status.

    `sa_i` protects left -> right traffic, `sa_j` right -> left.
    """
    profile: TunnelProfile
    sa_i: SecurityAssociation | None = None
    sa_j: SecurityAssociation | None = None
    status: TunnelStatus = TunnelStatus.SETTING_UP
    entries: list[InstalledEntry] = field(default_factory=list)
    agent_configured: bool = False
    renewals: int = 0
    warnings: list[str] = field(default_factory=list)

    @property
    def profile_id(self) -> str:
        return self.profile.profile_id

    def transition(self, new: TunnelStatus) -> None:
        if new not in _TRANSITIONS[self.status]:
            raise InvalidTransition(
                f"Tunnel {self.profile_id}: {self.status.value} -> {new.value} is not allowed."
            )
        logger.debug(f"Tunnel {self.profile_id}: {self.status.value} -> {new.value}")
        self.status = new

    def direction_of(self, spi: int) -> str | None:
        if self.sa_i is not None and self.sa_i.spi == spi:
            return 'i'
        if self.sa_j is not None and self.sa_j.spi == spi:
            return 'j'
        return None

    def to_dict(self) -> dict[str, Any]:
        """Status export without key material."""
        return {
            'profile_id': self.profile_id,
            'mode': self.profile.mode,
            'status': self.status.value,
            'sa_i': self.sa_i.redacted() if self.sa_i else None,
            'sa_j': self.sa_j.redacted() if self.sa_j else None,
            'renewals': self.renewals,
            'entries': len(self.entries),
            'warnings': list(self.warnings),
        }
