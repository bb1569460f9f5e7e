import logging
from dataclasses import dataclass, field
from enum import IntEnum
from ipaddress import IPv4Address

from .._errors import InvariantViolation
from .._validation import check_length, check_uint

logger = logging.getLogger(__name__)

__all__ = ['ETHERTYPE_IPV4', 'PROTO_ESP', 'PROTO_IPIP', 'ETH_LEN', 'IPV4_LEN',
           'ESP_LEN', 'SpdMark', 'EthernetHeader', 'Ipv4Header', 'EspHeader',
           'EspTrailer', 'UserMetadata', 'Packet', 'mac_to_bytes', 'mac_to_str']

ETHERTYPE_IPV4 = 0x0800
PROTO_IPIP = 4
PROTO_ESP = 50
ETH_LEN = 14
IPV4_LEN = 20
ESP_LEN = 8


def mac_to_bytes(mac: str | bytes) -> bytes:
    """Parses a colon separated MAC address.

    >>> mac_to_bytes('02:00:00:00:00:0a').hex()
    '02000000000a'
    """
    if isinstance(mac, bytes):
        return check_length(mac, 6, 'mac')
    parts = mac.split(':')
    if len(parts) != 6:
        raise ValueError(f"{mac!r} is not a valid MAC address.")
    return bytes(int(p, 16) for p in parts)


def mac_to_str(mac: bytes) -> str:
    """
    >>> mac_to_str(bytes([2, 0, 0, 0, 0, 10]))
    '02:00:00:00:00:0a'
    """
    return ':'.join(f"{b:02x}" for b in mac)


class SpdMark(IntEnum):
    UNSET = 0
    BYPASS = 1
    PROTECT = 2


@dataclass(frozen=True)
class EthernetHeader:
    dst_mac: bytes
    src_mac: bytes
    ethertype: int = ETHERTYPE_IPV4

    def __post_init__(self):
        object.__setattr__(self, 'dst_mac', mac_to_bytes(self.dst_mac))
        object.__setattr__(self, 'src_mac', mac_to_bytes(self.src_mac))
        check_uint(self.ethertype, 16, 'ethertype')


@dataclass(frozen=True)
class Ipv4Header:
    """IPv4 header without options.

    `total_length` and `checksum` are derived on serialization and therefore
    take no part in equality.
    """
    src: IPv4Address
    dst: IPv4Address
    protocol: int
    ttl: int = 64
    dscp_ecn: int = 0
    identification: int = 0
    flags_frag: int = 0
    total_length: int = field(default=IPV4_LEN, compare=False)
    checksum: int = field(default=0, compare=False)
    version: int = 4
    ihl: int = 5

    def __post_init__(self):
        object.__setattr__(self, 'src', IPv4Address(self.src))
        object.__setattr__(self, 'dst', IPv4Address(self.dst))
        for name, bits in [('protocol', 8), ('ttl', 8), ('dscp_ecn', 8),
                           ('identification', 16), ('flags_frag', 16),
                           ('total_length', 16), ('checksum', 16)]:
            check_uint(getattr(self, name), bits, name)
        if self.version != 4 or self.ihl != 5:
            raise InvariantViolation(
                f"Only IPv4 without options is supported, found "
                f"version={self.version}, ihl={self.ihl}."
            )


@dataclass(frozen=True)
class EspHeader:
    spi: int
    seq: int

    def __post_init__(self):
        check_uint(self.spi, 32, 'spi')
        check_uint(self.seq, 32, 'seq')
        if self.spi < 256:
            raise InvariantViolation(f"SPI values 0-255 are reserved, found {self.spi}.")


@dataclass(frozen=True)
class EspTrailer:
    padding: bytes
    pad_length: int
    next_header: int = PROTO_IPIP
    icv: bytes = b''


@dataclass
class UserMetadata:
    """Per-packet scratch state written by the pipeline blocks."""
    spd_mark: SpdMark = SpdMark.UNSET
    soft_limit_reached: bool = False
    hard_limit_reached: bool = False
    egress_port: int | None = None
    dropped: bool = False
    drop_reason: str | None = None
    # Tunnel destination selected by a PROTECT rule, key for SAD-ENC
    sa_dst: IPv4Address | None = None

    def drop(self, reason: str) -> None:
        self.dropped = True
        self.drop_reason = reason


@dataclass
class Packet:
    """Layered view of an Ethernet/IPv4[/ESP] frame.

    For ESP packets `body` holds everything after the ESP header (IV,
    ciphertext and ICV), otherwise the IPv4 payload.
    """
    eth: EthernetHeader
    ipv4: Ipv4Header
    esp: EspHeader | None = None
    body: bytes = b''
    meta: UserMetadata = field(default_factory=UserMetadata, compare=False)

    def __post_init__(self):
        if (self.esp is not None) != (self.ipv4.protocol == PROTO_ESP):
            raise InvariantViolation(
                "ESP header must be present iff protocol == 50, found "
                f"protocol={self.ipv4.protocol}, esp={self.esp}."
            )

    @property
    def ip_payload_length(self) -> int:
        return len(self.body) + (ESP_LEN if self.esp is not None else 0)
