from .._errors import BadNextHeader, BadPadding
from ._headers import PROTO_IPIP, EspTrailer

__all__ = ['ESP_ALIGNMENT', 'esp_frame', 'esp_unframe', 'pad_length_for']

ESP_ALIGNMENT = 4


def pad_length_for(plaintext_length: int) -> int:
    """Number of padding bytes so that plaintext + padding + 2 is aligned.

    >>> pad_length_for(18), pad_length_for(19), pad_length_for(20)
    (0, 3, 2)
    """
    return -(plaintext_length + 2) % ESP_ALIGNMENT


def esp_frame(plaintext: bytes, icv_len: int = 0) -> tuple[bytes, EspTrailer]:
    """Appends RFC 4303 padding, pad length and next header to plaintext.

    The returned trailer carries a zeroed placeholder ICV of `icv_len`
    bytes; cipher suites fill it in.

    >>> framed, trailer = esp_frame(bytes(19))
    >>> framed[19:].hex(), trailer.pad_length
    ('0102030304', 3)
    """
    pad_len = pad_length_for(len(plaintext))
    padding = bytes(range(1, pad_len + 1))
    trailer = EspTrailer(padding=padding, pad_length=pad_len,
                         next_header=PROTO_IPIP, icv=bytes(icv_len))
    framed = plaintext + padding + bytes([pad_len, PROTO_IPIP])
    return framed, trailer


def esp_unframe(framed: bytes) -> bytes:
    """Strips and validates the ESP trailer, returning the plaintext.
    """
    if len(framed) < 2 or len(framed) % ESP_ALIGNMENT:
        raise BadPadding(f"Framed payload of {len(framed)} bytes is not {ESP_ALIGNMENT}-byte aligned.")
    pad_len, next_header = framed[-2], framed[-1]
    if next_header != PROTO_IPIP:
        raise BadNextHeader(f"Expected next header {PROTO_IPIP} (IP-in-IP), found {next_header}.")
    if pad_len >= ESP_ALIGNMENT or pad_len > len(framed) - 2:
        raise BadPadding(f"Pad length {pad_len} inconsistent with {len(framed)}-byte payload.")
    end = len(framed) - 2 - pad_len
    if framed[end:end + pad_len] != bytes(range(1, pad_len + 1)):
        raise BadPadding("Padding bytes are not the monotone sequence 1, 2, 3.")
    return framed[:end]
