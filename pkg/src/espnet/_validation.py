from collections.abc import Iterable
from itertools import compress


def there_can_be_only_one(*args):
    """Will raise an error if more than one arg evaluates to True.
    """
    is_true = [bool(arg) for arg in args]
    if sum(is_true) != 1:
        raise ValueError("Exactly one param should be set.")
    return list(compress(args, is_true))[0]


def check_uint(value: int, bits: int, name: str) -> int:
    """Ensures that value fits an unsigned field of the given width.

    >>> check_uint(255, 8, 'ttl')
    255
    >>> check_uint(256, 8, 'ttl')
    Traceback (most recent call last):
    ...
    ValueError: `ttl` must fit in 8 unsigned bits, found 256.
    """
    if not isinstance(value, int) or isinstance(value, bool) or not 0 <= value < (1 << bits):
        raise ValueError(f"`{name}` must fit in {bits} unsigned bits, found {value!r}.")
    return value


def check_length(data: bytes, expected: int | Iterable[int], name: str) -> bytes:
    """Ensures that data has one of the expected lengths.
    """
    allowed = (expected,) if isinstance(expected, int) else tuple(expected)
    if len(data) not in allowed:
        raise ValueError(
            f"`{name}` must be {' or '.join(map(str, allowed))} bytes long "
            f"but found {len(data)}."
        )
    return data


def check_limits(soft_limit: int, hard_limit: int) -> None:
    """Packet limits must be positive and strictly ordered."""
    if soft_limit <= 0:
        raise ValueError(f"Soft limit must be positive, found {soft_limit}.")
    if not soft_limit < hard_limit:
        raise ValueError(
            f"Soft limit must be smaller than hard limit, found "
            f"soft={soft_limit}, hard={hard_limit}."
        )


def consistent_length(*args):
    """Ensures that all args have the same length.
    """
    lens = [len(arg) for arg in args if arg is not None]
    if len(set(lens)) > 1:
        raise ValueError(
            f"Found objects of inconsistent lengths: {lens}."
        )
