import pathlib

__all__ = ['read_hexdump', 'write_hexdump']


def read_hexdump(path: str | pathlib.Path) -> list[bytes]:
    """Reads one frame per line of lowercase hex. Blank lines and lines
    starting with '#' are skipped.
    """
    frames = []
    with open(path, 'r') as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith('#'):
                continue
            frames.append(bytes.fromhex(line))
    return frames


def write_hexdump(path: str | pathlib.Path, frames: list[bytes]) -> None:
    with open(path, 'w') as f:
        for frame in frames:
            f.write(frame.hex() + '\n')
