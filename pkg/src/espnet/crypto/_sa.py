import logging
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address
from typing import Any

from .._errors import MissingKeyMaterial
from .._validation import check_length, check_limits, check_uint

logger = logging.getLogger(__name__)

__all__ = ['CipherSuiteId', 'SaKeyMaterial', 'SecurityAssociation', 'EspCiphertext']


class CipherSuiteId(str, Enum):
    NULL = 'NULL'
    AES_CTR_HMAC_MD5 = 'AES_CTR_HMAC_MD5'


@dataclass(frozen=True)
class SaKeyMaterial:
    """Keys of one SA. All fields are None for the NULL suite."""
    aes_key: bytes | None = field(default=None, repr=False)
    ctr_nonce: bytes | None = field(default=None, repr=False)
    hmac_key: bytes | None = field(default=None, repr=False)

    def __post_init__(self):
        if self.aes_key is not None:
            check_length(self.aes_key, 16, 'aes_key')
        if self.ctr_nonce is not None:
            check_length(self.ctr_nonce, 4, 'ctr_nonce')
        if self.hmac_key is not None:
            check_length(self.hmac_key, 16, 'hmac_key')

    @property
    def is_empty(self) -> bool:
        return self.aes_key is None and self.ctr_nonce is None and self.hmac_key is None

    @property
    def is_complete(self) -> bool:
        return None not in (self.aes_key, self.ctr_nonce, self.hmac_key)


@dataclass(frozen=True)
class SecurityAssociation:
    """One unidirectional SA as installed in SAD-ENC or SAD-DEC."""
    spi: int
    tunnel_src: IPv4Address
    tunnel_dst: IPv4Address
    suite: CipherSuiteId
    keys: SaKeyMaterial = field(default_factory=SaKeyMaterial)
    register_index: int = 0
    soft_limit: int = 50000
    hard_limit: int = 51000

    def __post_init__(self):
        object.__setattr__(self, 'tunnel_src', IPv4Address(self.tunnel_src))
        object.__setattr__(self, 'tunnel_dst', IPv4Address(self.tunnel_dst))
        object.__setattr__(self, 'suite', CipherSuiteId(self.suite))
        check_uint(self.spi, 32, 'spi')
        if self.spi < 256:
            raise ValueError(f"SPI values 0-255 are reserved, found {self.spi}.")
        check_uint(self.register_index, 32, 'register_index')
        check_limits(self.soft_limit, self.hard_limit)
        if self.suite is CipherSuiteId.AES_CTR_HMAC_MD5 and not self.keys.is_complete:
            raise MissingKeyMaterial(f"SA {self.spi} uses {self.suite.value} but lacks key material.")

    def to_action_params(self) -> dict[str, Any]:
        """Flattens the SA into SAD action parameters."""
        params: dict[str, Any] = {
            'spi': self.spi,
            'tunnel_src': str(self.tunnel_src),
            'tunnel_dst': str(self.tunnel_dst),
            'register_index': self.register_index,
            'soft_limit': self.soft_limit,
            'hard_limit': self.hard_limit,
        }
        if self.suite is CipherSuiteId.AES_CTR_HMAC_MD5:
            params.update(aes_key=self.keys.aes_key, ctr_nonce=self.keys.ctr_nonce,
                          hmac_key=self.keys.hmac_key)
        return params

    @classmethod
    def from_action_params(cls, suite: CipherSuiteId, params: dict[str, Any]) -> 'SecurityAssociation':
        keys = SaKeyMaterial(
            aes_key=params.get('aes_key'),
            ctr_nonce=params.get('ctr_nonce'),
            hmac_key=params.get('hmac_key'),
        )
        return cls(
            spi=params['spi'], tunnel_src=params['tunnel_src'],
            tunnel_dst=params['tunnel_dst'], suite=suite, keys=keys,
            register_index=params['register_index'],
            soft_limit=params['soft_limit'], hard_limit=params['hard_limit'],
        )

    def redacted(self) -> dict[str, Any]:
        """JSON-able description without key material."""
        return {
            'spi': self.spi,
            'tunnel_src': str(self.tunnel_src),
            'tunnel_dst': str(self.tunnel_dst),
            'suite': self.suite.value,
            'register_index': self.register_index,
            'soft_limit': self.soft_limit,
            'hard_limit': self.hard_limit,
        }


@dataclass(frozen=True)
class EspCiphertext:
    iv: bytes
    body: bytes
    icv: bytes

    def to_bytes(self) -> bytes:
        return self.iv + self.body + self.icv

    @classmethod
    def from_bytes(cls, data: bytes, iv_len: int, icv_len: int) -> 'EspCiphertext':
        """Splits a received ESP body. Short inputs yield a short body that
        the suite later rejects.
        """
        iv = data[:iv_len]
        rest = data[iv_len:]
        if not icv_len:
            return cls(iv=iv, body=rest, icv=b'')
        if len(rest) < icv_len:
            return cls(iv=iv, body=b'', icv=rest)
        return cls(iv=iv, body=rest[:-icv_len], icv=rest[-icv_len:])
