import numpy as np

from .._errors import IndexOutOfRange

__all__ = ['RegisterArray']


class RegisterArray:
    """Per-SA 64-bit packet counters.

    >>> r = RegisterArray(4)
    >>> r.increment(2), r.increment(2), r.read(2)
    (1, 2, 2)
    """

    def __init__(self, size: int):
        if size <= 0:
            raise ValueError(f"Register array size must be positive, found {size}.")
        self._counters = np.zeros(size, dtype=np.uint64)

    def __len__(self) -> int:
        return len(self._counters)

    def check_index(self, index: int) -> int:
        if not 0 <= index < len(self._counters):
            raise IndexOutOfRange(f"Register index {index} outside [0, {len(self._counters)}).")
        return index

    def read(self, index: int) -> int:
        return int(self._counters[self.check_index(index)])

    def write(self, index: int, value: int) -> None:
        if not 0 <= value < (1 << 64):
            raise ValueError(f"Register value {value} does not fit 64 bits.")
        self._counters[self.check_index(index)] = value

    def increment(self, index: int) -> int:
        self._counters[self.check_index(index)] += np.uint64(1)
        return int(self._counters[index])

    def assign(self, index: int) -> None:
        """Resets a counter when an SA takes over its index."""
        self.write(index, 0)
