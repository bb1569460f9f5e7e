"""Cipher suites implementing ESP encapsulation and decapsulation.

Each suite is a pair of operations over (SA, ESP header, bytes). New suites
register themselves in CIPHER_SUITES under their CipherSuiteId.
"""
import hashlib
import hmac
import logging
import struct

from Crypto.Cipher import AES

from .._errors import IcvMismatch, SequenceOverflow
from ..codec import EspHeader, esp_frame, esp_unframe, pad_length_for
from ._sa import CipherSuiteId, EspCiphertext, SecurityAssociation

logger = logging.getLogger(__name__)

__all__ = ['CipherSuite', 'NullSuite', 'AesCtrHmacMd5Suite', 'CIPHER_SUITES',
           'get_suite', 'suite_encapsulate', 'suite_decapsulate',
           'aes_ctr_transform', 'esp_header_for', 'MAX_SEQ']

MAX_SEQ = 0xFFFFFFFF
_ESP = struct.Struct('!II')


def esp_header_for(sa: SecurityAssociation, counter: int) -> EspHeader:
    """ESP header for the `counter`-th packet sent under `sa`."""
    if counter > MAX_SEQ:
        raise SequenceOverflow(f"SA {sa.spi}: sequence number {counter} exceeds 2^32-1.")
    if counter < 1:
        raise ValueError(f"Sequence numbers start at 1, found {counter}.")
    return EspHeader(spi=sa.spi, seq=counter)


def aes_ctr_transform(key: bytes, nonce: bytes, iv: bytes, data: bytes) -> bytes:
    """AES-CTR as in RFC 3686: counter block = nonce || iv || block counter,
    the block counter starting at 1. Encryption and decryption coincide.
    """
    cipher = AES.new(key, AES.MODE_CTR, nonce=nonce + iv, initial_value=1)
    return cipher.encrypt(data)


def _check_spi(sa: SecurityAssociation, esp: EspHeader) -> None:
    if esp.spi != sa.spi:
        raise ValueError(f"ESP header SPI {esp.spi} does not belong to SA {sa.spi}.")


class CipherSuite:
    """Base class of the cipher-suite externs."""

    suite_id: CipherSuiteId
    iv_len: int = 0
    icv_len: int = 0

    def encapsulate(self, sa: SecurityAssociation, esp: EspHeader, inner_ip: bytes) -> EspCiphertext:
        raise NotImplementedError

    def decapsulate(self, sa: SecurityAssociation, esp: EspHeader, ct: EspCiphertext) -> bytes:
        raise NotImplementedError

    def overhead(self, inner_length: int) -> int:
        """Bytes added after the ESP header for an inner packet of given length."""
        return self.iv_len + pad_length_for(inner_length) + 2 + self.icv_len


class NullSuite(CipherSuite):
    """Identity transform without integrity check value."""

    suite_id = CipherSuiteId.NULL

    def encapsulate(self, sa, esp, inner_ip):
        _check_spi(sa, esp)
        framed, _ = esp_frame(inner_ip, icv_len=0)
        return EspCiphertext(iv=b'', body=framed, icv=b'')

    def decapsulate(self, sa, esp, ct):
        _check_spi(sa, esp)
        return esp_unframe(ct.body)


class AesCtrHmacMd5Suite(CipherSuite):
    """AES-128-CTR encryption with HMAC-MD5-96 authentication.

    The explicit IV is the 8-byte big-endian sequence number. The ICV covers
    ESP header || IV || ciphertext.
    """

    suite_id = CipherSuiteId.AES_CTR_HMAC_MD5
    iv_len = 8
    icv_len = 12

    def _icv(self, sa: SecurityAssociation, esp: EspHeader, iv: bytes, body: bytes) -> bytes:
        assert sa.keys.hmac_key is not None
        mac = hmac.new(sa.keys.hmac_key, _ESP.pack(esp.spi, esp.seq) + iv + body, hashlib.md5)
        return mac.digest()[:self.icv_len]

    def encapsulate(self, sa, esp, inner_ip):
        _check_spi(sa, esp)
        if esp.seq < 1:
            raise ValueError("Transmitted ESP packets carry seq >= 1.")
        assert sa.keys.aes_key is not None and sa.keys.ctr_nonce is not None
        framed, _ = esp_frame(inner_ip, icv_len=self.icv_len)
        iv = esp.seq.to_bytes(self.iv_len, 'big')
        body = aes_ctr_transform(sa.keys.aes_key, sa.keys.ctr_nonce, iv, framed)
        return EspCiphertext(iv=iv, body=body, icv=self._icv(sa, esp, iv, body))

    def decapsulate(self, sa, esp, ct):
        _check_spi(sa, esp)
        if len(ct.iv) != self.iv_len or len(ct.icv) != self.icv_len:
            raise IcvMismatch(f"SA {sa.spi}: ESP payload too short to carry IV and ICV.")
        expected = self._icv(sa, esp, ct.iv, ct.body)
        # Nothing is decrypted before the ICV has been checked
        if not hmac.compare_digest(expected, ct.icv):
            raise IcvMismatch(f"SA {sa.spi}: integrity check failed for seq {esp.seq}.")
        assert sa.keys.aes_key is not None and sa.keys.ctr_nonce is not None
        framed = aes_ctr_transform(sa.keys.aes_key, sa.keys.ctr_nonce, ct.iv, ct.body)
        return esp_unframe(framed)


CIPHER_SUITES: dict[CipherSuiteId, CipherSuite] = {
    suite.suite_id: suite for suite in (NullSuite(), AesCtrHmacMd5Suite())
}


def get_suite(suite_id: CipherSuiteId | str) -> CipherSuite:
    return CIPHER_SUITES[CipherSuiteId(suite_id)]


def suite_encapsulate(sa: SecurityAssociation, esp: EspHeader, inner_ip: bytes) -> EspCiphertext:
    """Encrypts/authenticates an inner IPv4 packet under `sa`."""
    return get_suite(sa.suite).encapsulate(sa, esp, inner_ip)


def suite_decapsulate(sa: SecurityAssociation, esp: EspHeader, ct: EspCiphertext) -> bytes:
    """Authenticates/decrypts an ESP payload, returning the inner packet."""
    return get_suite(sa.suite).decapsulate(sa, esp, ct)
