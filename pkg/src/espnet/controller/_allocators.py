import logging
from collections.abc import Iterable

from .._custom_typing import NodeId, Spi
from .._errors import RegisterExhaustion, SpiExhaustion
from ..crypto import RandomSource

logger = logging.getLogger(__name__)

__all__ = ['SpiAllocator', 'RegisterAllocator', 'MIN_SPI']

MIN_SPI = 256


class SpiAllocator:
    """Uniform random SPIs in [256, 2^32) with collision retry.

    Issued SPIs are never handed out twice by the same allocator.

    >>> from espnet.crypto import seeded_random
    >>> a = SpiAllocator(seeded_random(3))
    >>> a.allocate() != a.allocate()
    True
    """

    def __init__(self, rng: RandomSource, retries: int = 64):
        self.rng = rng
        self.retries = retries
        self.allocated: set[Spi] = set()

    def __contains__(self, spi: Spi) -> bool:
        return spi in self.allocated

    def allocate(self) -> Spi:
        for _ in range(self.retries):
            spi = int(self.rng.integers(MIN_SPI, 1 << 32))
            if spi not in self.allocated:
                self.allocated.add(spi)
                return spi
            logger.debug(f"SPI collision on {spi}, retrying")
        raise SpiExhaustion(f"No free SPI found after {self.retries} attempts.")


class RegisterAllocator:
    """Tracks register indices in use per switch."""

    def __init__(self, size: int):
        self.size = size
        self.used: dict[str, set[int]] = {}

    def allocate(self, switch_ids: Iterable[NodeId]) -> int:
        """Smallest index free on all given switches, marked used on each."""
        switch_ids = list(switch_ids)
        taken = set().union(*(self.used.get(s, set()) for s in switch_ids))
        for index in range(self.size):
            if index not in taken:
                for s in switch_ids:
                    self.used.setdefault(s, set()).add(index)
                return index
        raise RegisterExhaustion(f"No register index free on {switch_ids} (size {self.size}).")

    def release(self, switch_ids: Iterable[NodeId], index: int) -> None:
        for s in switch_ids:
            self.used.get(s, set()).discard(index)
