import numpy as np

from .._errors import WrongLength
from ._headers import IPV4_LEN

__all__ = ['ipv4_checksum', 'verify_ipv4_checksum', 'ones_complement_sum']


def ones_complement_sum(data: bytes) -> int:
    """RFC 1071 16-bit one's-complement sum of an even-length buffer.

    >>> hex(ones_complement_sum(bytes.fromhex('ffff0001')))
    '0x1'
    """
    words = np.frombuffer(data, dtype='>u2').astype(np.uint64)
    total = int(words.sum())
    while total >> 16:
        total = (total & 0xFFFF) + (total >> 16)
    return total


def ipv4_checksum(header_bytes: bytes) -> int:
    """Computes the IPv4 header checksum. The checksum field (bytes 10-11)
    must be zeroed by the caller.

    >>> hex(ipv4_checksum(bytes(20)))
    '0xffff'
    >>> hex(ipv4_checksum(bytes.fromhex('450000730000400040110000c0a80001c0a800c7')))
    '0xb861'
    """
    if len(header_bytes) != IPV4_LEN:
        raise WrongLength(f"IPv4 header must be {IPV4_LEN} bytes, found {len(header_bytes)}.")
    return ~ones_complement_sum(header_bytes) & 0xFFFF


def verify_ipv4_checksum(header_bytes: bytes) -> bool:
    """True if the header (checksum included) sums to 0xFFFF."""
    if len(header_bytes) != IPV4_LEN:
        raise WrongLength(f"IPv4 header must be {IPV4_LEN} bytes, found {len(header_bytes)}.")
    return ones_complement_sum(header_bytes) == 0xFFFF
