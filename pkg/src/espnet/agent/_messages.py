"""Messages exchanged between the controller and roadwarrior agents.

Frames are a 4-byte big-endian length followed by a UTF-8 JSON object with
a ``type`` field naming the message variant.
"""
import json
import logging
import struct
from dataclasses import dataclass, field
from ipaddress import IPv4Address, IPv4Network
from typing import Any, Literal

from .._validation import there_can_be_only_one
from ..crypto import CipherSuiteId, SaKeyMaterial, SecurityAssociation

logger = logging.getLogger(__name__)

__all__ = ['Selector', 'ProfileSummary', 'TunnelOffer', 'TunnelRequest',
           'ConfigApply', 'ExpireNotice', 'Teardown', 'Ack', 'SaUpdate', 'Hello',
           'AgentMessage', 'encode_message', 'decode_message', 'sa_to_json', 'sa_from_json']

_LEN = struct.Struct('!I')


@dataclass(frozen=True)
class Selector:
    """Traffic selector: source and destination prefixes, optional protocol.

    >>> s = Selector('10.0.9.7/32', '10.0.2.0/24')
    >>> s.matches(IPv4Address('10.0.9.7'), IPv4Address('10.0.2.10'), 17)
    True
    """
    src: IPv4Network
    dst: IPv4Network
    protocol: int | None = None

    def __post_init__(self):
        object.__setattr__(self, 'src', IPv4Network(self.src, strict=False))
        object.__setattr__(self, 'dst', IPv4Network(self.dst, strict=False))

    def matches(self, src: IPv4Address, dst: IPv4Address, protocol: int) -> bool:
        return (src in self.src and dst in self.dst
                and (self.protocol is None or self.protocol == protocol))

    def overlaps(self, other: 'Selector') -> bool:
        protocols_meet = self.protocol is None or other.protocol is None or self.protocol == other.protocol
        return self.src.overlaps(other.src) and self.dst.overlaps(other.dst) and protocols_meet

    def reversed(self) -> 'Selector':
        return Selector(src=self.dst, dst=self.src, protocol=self.protocol)

    def to_json(self) -> dict[str, Any]:
        return {'src': str(self.src), 'dst': str(self.dst), 'protocol': self.protocol}


@dataclass(frozen=True)
class ProfileSummary:
    profile_id: str
    dst: str
    suite: str


@dataclass(frozen=True)
class TunnelOffer:
    profiles: tuple[ProfileSummary, ...] = ()


@dataclass(frozen=True)
class TunnelRequest:
    profile_id: str


@dataclass(frozen=True)
class ConfigApply:
    """Both SAs of a host-to-site tunnel plus the selector and routes."""
    profile_id: str
    sa_in: SecurityAssociation
    sa_out: SecurityAssociation
    selector: Selector
    routes: tuple[str, ...] = ()


@dataclass(frozen=True)
class ExpireNotice:
    spi: int
    level: Literal['soft', 'hard'] = 'soft'


@dataclass(frozen=True)
class Teardown:
    profile_id: str


@dataclass(frozen=True)
class Ack:
    ok: bool = True
    ref: str = ''
    error: str = ''


@dataclass(frozen=True)
class SaUpdate:
    """One renewal step on a host: exactly one of the fields is set."""
    profile_id: str
    install_in: SecurityAssociation | None = None
    replace_out: SecurityAssociation | None = None
    remove_in_spi: int | None = None

    def __post_init__(self):
        there_can_be_only_one(self.install_in, self.replace_out, self.remove_in_spi)


@dataclass(frozen=True)
class Hello:
    roadwarrior_id: str
    token: str = field(repr=False)
    endpoint_ip: IPv4Address

    def __post_init__(self):
        object.__setattr__(self, 'endpoint_ip', IPv4Address(self.endpoint_ip))


AgentMessage = (TunnelOffer | TunnelRequest | ConfigApply | ExpireNotice
                | Teardown | Ack | SaUpdate | Hello)

_TYPES: dict[str, type] = {cls.__name__: cls for cls in (
    TunnelOffer, TunnelRequest, ConfigApply, ExpireNotice, Teardown, Ack, SaUpdate, Hello,
)}


def sa_to_json(sa: SecurityAssociation) -> dict[str, Any]:
    """Full SA including keys; only for the agent channel, never reports."""
    out = sa.redacted()
    for name in ('aes_key', 'ctr_nonce', 'hmac_key'):
        value = getattr(sa.keys, name)
        out[name] = value.hex() if value is not None else None
    return out


def sa_from_json(data: dict[str, Any]) -> SecurityAssociation:
    keys = SaKeyMaterial(**{
        name: bytes.fromhex(data[name]) if data.get(name) is not None else None
        for name in ('aes_key', 'ctr_nonce', 'hmac_key')
    })
    return SecurityAssociation(
        spi=data['spi'], tunnel_src=data['tunnel_src'], tunnel_dst=data['tunnel_dst'],
        suite=CipherSuiteId(data['suite']), keys=keys, register_index=data['register_index'],
        soft_limit=data['soft_limit'], hard_limit=data['hard_limit'],
    )


def _to_json(message: AgentMessage) -> dict[str, Any]:
    match message:
        case TunnelOffer(profiles):
            body: dict[str, Any] = {'profiles': [vars(p) for p in profiles]}
        case ConfigApply(profile_id, sa_in, sa_out, selector, routes):
            body = {'profile_id': profile_id, 'sa_in': sa_to_json(sa_in),
                    'sa_out': sa_to_json(sa_out), 'selector': selector.to_json(),
                    'routes': list(routes)}
        case SaUpdate(profile_id, install_in, replace_out, remove_in_spi):
            body = {'profile_id': profile_id,
                    'install_in': sa_to_json(install_in) if install_in else None,
                    'replace_out': sa_to_json(replace_out) if replace_out else None,
                    'remove_in_spi': remove_in_spi}
        case Hello(roadwarrior_id, token, endpoint_ip):
            body = {'roadwarrior_id': roadwarrior_id, 'token': token, 'endpoint_ip': str(endpoint_ip)}
        case _:
            body = dict(vars(message))
    return {'type': type(message).__name__, **body}


def _from_json(data: dict[str, Any]) -> AgentMessage:
    kind = data.pop('type', None)
    if kind not in _TYPES:
        raise ValueError(f"Unknown agent message type {kind!r}.")
    match kind:
        case 'TunnelOffer':
            return TunnelOffer(tuple(ProfileSummary(**p) for p in data['profiles']))
        case 'ConfigApply':
            return ConfigApply(
                profile_id=data['profile_id'], sa_in=sa_from_json(data['sa_in']),
                sa_out=sa_from_json(data['sa_out']), selector=Selector(**data['selector']),
                routes=tuple(data['routes']),
            )
        case 'SaUpdate':
            return SaUpdate(
                profile_id=data['profile_id'],
                install_in=sa_from_json(data['install_in']) if data['install_in'] else None,
                replace_out=sa_from_json(data['replace_out']) if data['replace_out'] else None,
                remove_in_spi=data['remove_in_spi'],
            )
    return _TYPES[kind](**data)


def encode_message(message: AgentMessage) -> bytes:
    """Length-prefixed JSON frame.

    >>> encode_message(TunnelRequest('rw-office'))[4:]
    b'{"profile_id":"rw-office","type":"TunnelRequest"}'
    """
    payload = json.dumps(_to_json(message), sort_keys=True, separators=(',', ':')).encode()
    return _LEN.pack(len(payload)) + payload


def decode_message(frame: bytes) -> AgentMessage:
    """Inverse of encode_message; the frame must hold exactly one message."""
    if len(frame) < _LEN.size:
        raise ValueError(f"Agent frame of {len(frame)} bytes has no length prefix.")
    (length,) = _LEN.unpack(frame[:_LEN.size])
    if length != len(frame) - _LEN.size:
        raise ValueError(f"Agent frame announces {length} bytes but carries {len(frame) - _LEN.size}.")
    return _from_json(json.loads(frame[_LEN.size:]))
