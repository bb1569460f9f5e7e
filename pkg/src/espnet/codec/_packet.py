import logging
import struct
from dataclasses import replace
from ipaddress import IPv4Address

from .._custom_typing import Address
from .._errors import (
    BadChecksum,
    InvariantViolation,
    LengthMismatch,
    TruncatedPacket,
    UnsupportedEthertype,
    UnsupportedIhl,
    UnsupportedVersion,
)
from ._checksum import ipv4_checksum, verify_ipv4_checksum
from ._headers import (
    ESP_LEN,
    ETH_LEN,
    ETHERTYPE_IPV4,
    IPV4_LEN,
    PROTO_ESP,
    EspHeader,
    EthernetHeader,
    Ipv4Header,
    Packet,
)

logger = logging.getLogger(__name__)

__all__ = ['parse_packet', 'serialize_packet', 'parse_ipv4', 'serialize_ipv4',
           'make_packet', 'MIN_FRAME_LEN']

MIN_FRAME_LEN = ETH_LEN + IPV4_LEN

_ETH = struct.Struct('!6s6sH')
_IPV4 = struct.Struct('!BBHHHBBH4s4s')
_ESP = struct.Struct('!II')


def _pack_ipv4_header(ip: Ipv4Header, payload_length: int) -> bytes:
    total_length = IPV4_LEN + payload_length
    if total_length > 0xFFFF:
        raise InvariantViolation(f"IPv4 total length {total_length} exceeds 65535.")
    fields = [
        (ip.version << 4) | ip.ihl, ip.dscp_ecn, total_length,
        ip.identification, ip.flags_frag, ip.ttl, ip.protocol, 0,
        ip.src.packed, ip.dst.packed,
    ]
    header = _IPV4.pack(*fields)
    checksum = ipv4_checksum(header)
    return header[:10] + checksum.to_bytes(2, 'big') + header[12:]


def serialize_ipv4(ip: Ipv4Header, esp: EspHeader | None, body: bytes) -> bytes:
    """IPv4 header (fresh length and checksum) followed by ESP header and body."""
    if (esp is not None) != (ip.protocol == PROTO_ESP):
        raise InvariantViolation(
            f"ESP header presence does not agree with protocol {ip.protocol}."
        )
    esp_bytes = _ESP.pack(esp.spi, esp.seq) if esp is not None else b''
    return _pack_ipv4_header(ip, len(esp_bytes) + len(body)) + esp_bytes + body


def serialize_packet(p: Packet) -> bytes:
    """Deparser: emits the frame, recomputing total length and checksum.

    >>> p = make_packet('02:00:00:00:00:01', '02:00:00:00:00:02',
    ...                 '10.0.1.10', '10.0.2.10', protocol=17, payload=b'hi')
    >>> parse_packet(serialize_packet(p)) == p
    True
    """
    eth = _ETH.pack(p.eth.dst_mac, p.eth.src_mac, p.eth.ethertype)
    return eth + serialize_ipv4(p.ipv4, p.esp, p.body)


def parse_ipv4(data: bytes, eth: EthernetHeader) -> Packet:
    """Parses an IPv4 packet (no link layer) and attaches `eth` to it."""
    if len(data) < IPV4_LEN:
        raise TruncatedPacket(f"Need {IPV4_LEN} bytes of IPv4 header, found {len(data)}.")
    header = data[:IPV4_LEN]
    if not verify_ipv4_checksum(header):
        raise BadChecksum(f"IPv4 checksum mismatch in header {header.hex()}.")
    (ver_ihl, dscp_ecn, total_length, identification, flags_frag,
     ttl, protocol, checksum, src, dst) = _IPV4.unpack(header)
    version, ihl = ver_ihl >> 4, ver_ihl & 0x0F
    if version != 4:
        raise UnsupportedVersion(f"Expected IP version 4, found {version}.")
    if ihl != 5:
        raise UnsupportedIhl(f"IPv4 options are not supported (ihl={ihl}).")
    if total_length < IPV4_LEN:
        raise LengthMismatch(f"IPv4 total length {total_length} is shorter than the header.")
    if len(data) < total_length:
        raise TruncatedPacket(f"IPv4 total length {total_length} exceeds {len(data)} available bytes.")
    if len(data) > total_length:
        raise LengthMismatch(f"{len(data) - total_length} trailing bytes after the IPv4 packet.")

    ip = Ipv4Header(
        src=IPv4Address(src), dst=IPv4Address(dst), protocol=protocol,
        ttl=ttl, dscp_ecn=dscp_ecn, identification=identification,
        flags_frag=flags_frag, total_length=total_length, checksum=checksum,
    )
    payload = data[IPV4_LEN:total_length]
    esp = None
    if protocol == PROTO_ESP:
        if len(payload) < ESP_LEN:
            raise TruncatedPacket(f"ESP header needs {ESP_LEN} bytes, found {len(payload)}.")
        spi, seq = _ESP.unpack(payload[:ESP_LEN])
        esp = EspHeader(spi=spi, seq=seq)
        payload = payload[ESP_LEN:]
    return Packet(eth=eth, ipv4=ip, esp=esp, body=payload)


def parse_packet(frame: bytes) -> Packet:
    """Parser: Ethernet -> IPv4 -> (ESP) -> accept, rejecting anything else.

    The checksum is verified before version and ihl are interpreted, so any
    single-bit corruption of the IPv4 header surfaces as BadChecksum.
    """
    if len(frame) < MIN_FRAME_LEN:
        raise TruncatedPacket(f"Frame of {len(frame)} bytes is shorter than {MIN_FRAME_LEN}.")
    dst_mac, src_mac, ethertype = _ETH.unpack(frame[:ETH_LEN])
    if ethertype != ETHERTYPE_IPV4:
        raise UnsupportedEthertype(f"Unsupported ethertype {ethertype:#06x}.")
    eth = EthernetHeader(dst_mac=dst_mac, src_mac=src_mac, ethertype=ethertype)
    return parse_ipv4(frame[ETH_LEN:], eth)


def make_packet(
    src_mac: str | bytes,
    dst_mac: str | bytes,
    src: Address,
    dst: Address,
    *,
    protocol: int = 17,
    payload: bytes = b'',
    ttl: int = 64,
    identification: int = 0,
) -> Packet:
    """Builds a plain (non-ESP) IPv4 packet with consistent length fields."""
    ip = Ipv4Header(src=src, dst=dst, protocol=protocol, ttl=ttl,
                    identification=identification)
    ip = replace(ip, total_length=IPV4_LEN + len(payload))
    eth = EthernetHeader(dst_mac=dst_mac, src_mac=src_mac)
    return Packet(eth=eth, ipv4=ip, body=payload)
