"""Ordered, latency-modelled control channels and the control trace."""
import json
import logging
from collections.abc import Iterator, Mapping
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Generator

import simpy

from .._errors import EspnetError, PeerUnreachable
from ..agent import Ack, AgentMessage, HostAgent, decode_message, encode_message
from ..pipeline import SwitchState, TableEntry

logger = logging.getLogger(__name__)

__all__ = ['ControlRecord', 'ControlTrace', 'ControlChannel', 'AgentChannel',
           'replay_control_trace', 'TABLE_OPS']

TABLE_OPS = ('table_insert', 'table_modify', 'table_delete')


def _jsonable(value: Any) -> Any:
    if isinstance(value, bytes):
        return '<redacted>'
    if isinstance(value, (IPv4Address, IPv4Network)):
        return str(value)
    if isinstance(value, Mapping):
        return {str(k): _jsonable(v) for k, v in sorted(value.items())}
    if isinstance(value, (list, tuple)):
        return [_jsonable(v) for v in value]
    if value is None or isinstance(value, (str, int, float, bool)):
        return value
    return str(value)


@dataclass(frozen=True)
class ControlRecord:
    """One acknowledged control operation.

    `args` keeps the exact arguments (including keys) for replay and is
    never written out.
    """
    time: float
    peer: str
    op: str
    table: str | None = None
    key: tuple = ()
    action: str | None = None
    message: str | None = None
    args: Mapping[str, Any] = field(default_factory=dict, repr=False, compare=False)

    @property
    def spi(self) -> int | None:
        params = self.args.get('params') or {}
        entry = self.args.get('entry')
        if entry is not None:
            params = entry.params
        return params.get('spi')

    def to_dict(self) -> dict[str, Any]:
        return {
            'time': round(self.time, 9),
            'peer': self.peer,
            'op': self.op,
            'table': self.table,
            'key': _jsonable(self.key),
            'action': self.action,
            'message': self.message,
            'spi': self.spi,
        }


class ControlTrace:
    """Append-only list of control records in acknowledgement order."""

    def __init__(self):
        self.records: list[ControlRecord] = []

    def __len__(self) -> int:
        return len(self.records)

    def __iter__(self) -> Iterator[ControlRecord]:
        return iter(self.records)

    def append(self, record: ControlRecord) -> None:
        self.records.append(record)

    def since(self, mark: int) -> list[ControlRecord]:
        return self.records[mark:]

    def table_ops(self, start: int = 0) -> list[ControlRecord]:
        return [r for r in self.records[start:] if r.op in TABLE_OPS]

    def counts(self) -> dict[str, int]:
        out: dict[str, int] = {}
        for r in self.records:
            kind = r.op if r.op != 'message' else f"message:{r.message}"
            out[kind] = out.get(kind, 0) + 1
        return dict(sorted(out.items()))

    def to_jsonl(self) -> str:
        return ''.join(json.dumps(r.to_dict(), sort_keys=True) + '\n' for r in self.records)


class ControlChannel:
    """Reliable in-order channel from the controller to one switch.

    `call` is a simpy process body: it waits `latency` for the request,
    applies it, records it, and waits `latency` again for the ack.
    """

    def __init__(
        self,
        env: simpy.Environment,
        peer_id: str,
        target: SwitchState | HostAgent,
        latency: float,
        trace: ControlTrace,
    ):
        self.env = env
        self.peer_id = peer_id
        self.target = target
        self.latency = latency
        self.trace = trace
        self.online = True

    def __repr__(self) -> str:
        state = 'up' if self.online else 'down'
        return f"{type(self).__name__}({self.peer_id}, {state})"

    def _check_online(self) -> None:
        if not self.online:
            raise PeerUnreachable(f"Control channel to {self.peer_id} is down.")

    def _record(self, op: str, **kwargs) -> ControlRecord:
        record = ControlRecord(time=self.env.now, peer=self.peer_id, op=op, **kwargs)
        self.trace.append(record)
        logger.debug(f"control {self.peer_id} {op} {record.table or record.message or ''} {list(record.key)}")
        return record

    def call(self, op: str, **args) -> Generator[simpy.Event, Any, Any]:
        yield self.env.timeout(self.latency)
        self._check_online()
        result = getattr(self.target, op)(**args)
        entry: TableEntry | None = args.get('entry')
        key = entry.key if entry is not None else args.get('key', ())
        if not isinstance(key, tuple):
            key = (key,)
        self._record(op, table=args.get('table'), key=key,
                     action=entry.action if entry is not None else args.get('action'), args=args)
        yield self.env.timeout(self.latency)
        return result


class AgentChannel(ControlChannel):
    """Channel to a roadwarrior agent; messages travel as encoded frames."""

    def send(self, message: AgentMessage) -> Generator[simpy.Event, Any, Any]:
        yield self.env.timeout(self.latency)
        self._check_online()
        assert isinstance(self.target, HostAgent)
        try:
            ack = self.target.handle_message(decode_message(encode_message(message)))
        except EspnetError as e:
            ack = Ack(ok=False, ref=getattr(message, 'profile_id', ''), error=f"{type(e).__name__}: {e}")
        self._record('message', message=type(message).__name__,
                     key=(getattr(message, 'profile_id', ''),), args={'message': message})
        yield self.env.timeout(self.latency)
        return decode_message(encode_message(ack))


def replay_control_trace(trace: ControlTrace | list[ControlRecord], switches: Mapping[str, SwitchState]) -> int:
    """Re-applies every recorded table operation to the given switches.

    Returns the number of operations applied.
    """
    applied = 0
    for record in trace:
        if record.op not in TABLE_OPS or record.peer not in switches:
            continue
        getattr(switches[record.peer], record.op)(**record.args)
        applied += 1
    return applied
