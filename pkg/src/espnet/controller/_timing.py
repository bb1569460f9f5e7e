import logging
import time
from contextlib import contextmanager
from typing import Iterator

import pandas as pd

logger = logging.getLogger(__name__)

__all__ = ['TimingRecorder', 'TIMED_OPERATIONS']

TIMED_OPERATIONS = ('setup', 'renewal', 'sa_generation', 'table_insert', 'table_modify')


class TimingRecorder:
    """Collects wall-clock durations (milliseconds) per operation kind."""

    def __init__(self, enabled: bool = True):
        self.enabled = enabled
        self.samples: dict[str, list[float]] = {op: [] for op in TIMED_OPERATIONS}

    @contextmanager
    def measure(self, operation: str) -> Iterator[None]:
        if not self.enabled:
            yield
            return
        start = time.perf_counter()
        try:
            yield
        finally:
            self.samples.setdefault(operation, []).append((time.perf_counter() - start) * 1e3)

    def merge(self, other: 'TimingRecorder') -> None:
        for op, values in other.samples.items():
            self.samples.setdefault(op, []).extend(values)

    def to_frame(self) -> pd.DataFrame:
        """Long table with columns ``operation`` and ``ms``."""
        rows = [(op, v) for op, values in self.samples.items() for v in values]
        return pd.DataFrame(rows, columns=['operation', 'ms'])
