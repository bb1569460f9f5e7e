"""Tunnel-mode encapsulation shared by switches and roadwarrior hosts."""
import logging
from dataclasses import replace

from .._errors import PacketTooBig
from ..codec import (
    ESP_LEN,
    IPV4_LEN,
    PROTO_ESP,
    EthernetHeader,
    Ipv4Header,
    Packet,
    parse_ipv4,
)
from ._sa import EspCiphertext, SecurityAssociation
from ._suites import esp_header_for, get_suite

logger = logging.getLogger(__name__)

__all__ = ['MAX_IPV4_LEN', 'outer_length', 'tunnel_encapsulate', 'tunnel_decapsulate']

MAX_IPV4_LEN = 0xffff


def outer_length(sa: SecurityAssociation, inner_length: int) -> int:
    """Total length of the outer IPv4 packet carrying `inner_length` bytes.

    >>> from ipaddress import IPv4Address
    >>> sa = SecurityAssociation(spi=0x100, tunnel_src=IPv4Address('192.0.2.1'),
    ...                          tunnel_dst=IPv4Address('192.0.2.2'), register_index=0,
    ...                          soft_limit=1, hard_limit=2, suite='NULL')
    >>> outer_length(sa, 40)
    72
    """
    return IPV4_LEN + ESP_LEN + inner_length + get_suite(sa.suite).overhead(inner_length)


def tunnel_encapsulate(
    sa: SecurityAssociation,
    counter: int,
    inner_ip: bytes,
    eth: EthernetHeader,
    outer_ttl: int = 64,
) -> Packet:
    """Wraps a serialized inner IPv4 packet into outer IPv4 + ESP.

    `counter` is the SA packet counter after incrementing and becomes the
    ESP sequence number. Raises PacketTooBig before any cryptographic work
    if the result would exceed the IPv4 total length field.
    """
    total = outer_length(sa, len(inner_ip))
    if total > MAX_IPV4_LEN:
        raise PacketTooBig(f"Encapsulated length {total} exceeds {MAX_IPV4_LEN} bytes.")
    esp = esp_header_for(sa, counter)
    ct = get_suite(sa.suite).encapsulate(sa, esp, inner_ip)
    body = ct.to_bytes()
    outer = Ipv4Header(src=sa.tunnel_src, dst=sa.tunnel_dst, protocol=PROTO_ESP, ttl=outer_ttl)
    outer = replace(outer, total_length=IPV4_LEN + ESP_LEN + len(body))
    return Packet(eth=eth, ipv4=outer, esp=esp, body=body)


def tunnel_decapsulate(sa: SecurityAssociation, outer: Packet) -> Packet:
    """Authenticates and decrypts an ESP packet, returning the inner packet
    with the outer Ethernet header attached.
    """
    assert outer.esp is not None
    suite = get_suite(sa.suite)
    ct = EspCiphertext.from_bytes(outer.body, suite.iv_len, suite.icv_len)
    inner_ip = suite.decapsulate(sa, outer.esp, ct)
    return parse_ipv4(inner_ip, outer.eth)
