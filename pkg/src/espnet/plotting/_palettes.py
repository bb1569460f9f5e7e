import logging
import pathlib
import re
from collections import UserList

import yaml
from matplotlib.colors import to_hex, to_rgba_array

logger = logging.getLogger(__name__)

__all__ = ['DiscretePalette', 'PALETTES', 'get_palette']

path = pathlib.Path(__file__).parent.resolve()
with open(path / "palettes/discrete.yaml", "r") as f:
    PALETTES: dict[str, list[str]] = yaml.safe_load(f)


class DiscretePalette(UserList):
    """A list of hex colors that loops back to the start when indexed past
    its end.

    Parameters
    __________
    pal: list[str]
        Hex color codes or rgb tuples.

    >>> pal = DiscretePalette(['#000000', '#ffffff'])
    >>> pal[3]
    '#ffffff'
    """

    def __init__(self, pal: list):
        items = []
        for item in pal:
            if not isinstance(item, str):
                item = to_hex(item)
            elif not re.search(r'^#(?:[0-9a-fA-F]{3}){1,2}$', item):
                raise ValueError(f"{item} is not a valid hex color.")
            items.append(item)
        if not items:
            raise ValueError("A palette needs at least one color.")
        super().__init__(items)

    def __getitem__(self, i):
        if not isinstance(i, slice):
            return self.data[i % len(self.data)]
        return [self.data[idx % len(self.data)] for idx in range(i.stop)[i]]

    def take(self, n: int) -> list[str]:
        return [self[i] for i in range(n)]

    def as_rgb_array(self):
        return to_rgba_array(self.data)[:, :3]


def get_palette(palette: str | list | DiscretePalette) -> DiscretePalette:
    """Resolves a palette name (case-insensitive) or color list."""
    if isinstance(palette, DiscretePalette):
        return palette
    if isinstance(palette, str):
        if palette.upper() not in PALETTES:
            raise ValueError(f"Unknown palette {palette!r}, expected one of {sorted(PALETTES)}.")
        return DiscretePalette(PALETTES[palette.upper()])
    return DiscretePalette(palette)
