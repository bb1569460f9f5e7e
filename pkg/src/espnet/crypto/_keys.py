import logging
import secrets
from typing import Protocol

import numpy as np

from ._sa import CipherSuiteId, SaKeyMaterial

logger = logging.getLogger(__name__)

__all__ = ['RandomSource', 'SecureRandom', 'seeded_random', 'generate_key_material']


class RandomSource(Protocol):
    """The subset of numpy.random.Generator used for keys and SPIs."""

    def bytes(self, length: int) -> bytes: ...

    def integers(self, low: int, high: int) -> int: ...


class SecureRandom:
    """RandomSource drawing from the operating system's CSPRNG."""

    def bytes(self, length: int) -> bytes:
        return secrets.token_bytes(length)

    def integers(self, low: int, high: int) -> int:
        return low + secrets.randbelow(high - low)


def seeded_random(seed: int | None) -> RandomSource:
    """Deterministic source for simulation; `None` falls back to OS entropy.

    >>> seeded_random(7).bytes(4) == seeded_random(7).bytes(4)
    True
    """
    if seed is None:
        return SecureRandom()
    return np.random.default_rng(seed)


def generate_key_material(suite: CipherSuiteId | str, rng: RandomSource) -> SaKeyMaterial:
    """Draws fresh key material for one SA. The NULL suite needs none.

    >>> generate_key_material('NULL', seeded_random(1)).is_empty
    True
    """
    suite = CipherSuiteId(suite)
    if suite is CipherSuiteId.NULL:
        return SaKeyMaterial()
    return SaKeyMaterial(aes_key=rng.bytes(16), ctr_nonce=rng.bytes(4), hmac_key=rng.bytes(16))
