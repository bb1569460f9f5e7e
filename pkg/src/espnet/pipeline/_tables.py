"""Generic match-action tables with exact, lpm and ternary columns."""
import logging
from collections.abc import Mapping, Sequence
from dataclasses import dataclass, field
from enum import Enum
from ipaddress import IPv4Address, IPv4Network
from typing import Any, NamedTuple

import numpy as np

from .._errors import (
    DuplicateKey,
    DuplicatePriority,
    NoSuchEntry,
    SchemaMismatch,
    UnknownAction,
)
from .._validation import consistent_length

logger = logging.getLogger(__name__)

__all__ = ['MatchKind', 'Column', 'Exact', 'Lpm', 'Ternary', 'ActionSpec',
           'TableEntry', 'MatchActionTable', 'LookupResult', 'normalize_key']


class MatchKind(str, Enum):
    EXACT = 'exact'
    LPM = 'lpm'
    TERNARY = 'ternary'


class Column(NamedTuple):
    name: str
    kind: MatchKind
    width: int = 32
    is_address: bool = True


class Exact(NamedTuple):
    value: int


class Lpm(NamedTuple):
    value: int
    prefix_len: int


class Ternary(NamedTuple):
    value: int
    mask: int


MatchValue = Exact | Lpm | Ternary


class ActionSpec(NamedTuple):
    name: str
    params: tuple[str, ...] = ()
    optional: tuple[str, ...] = ()


@dataclass(frozen=True)
class TableEntry:
    """A table entry. `key` holds one match value per column; raw values
    (ints, addresses, prefixes, None for a ternary wildcard) are accepted
    and normalized by the table.
    """
    key: tuple
    action: str
    params: Mapping[str, Any] = field(default_factory=dict)
    priority: int | None = None


class LookupResult(NamedTuple):
    entry: TableEntry | None
    action: str
    params: Mapping[str, Any]

    @property
    def hit(self) -> bool:
        return self.entry is not None


def _as_int(value) -> int:
    if isinstance(value, IPv4Address):
        return int(value)
    if isinstance(value, str):
        return int(IPv4Address(value))
    return int(value)


def _normalize_value(column: Column, raw) -> MatchValue:
    full = (1 << column.width) - 1
    match column.kind:
        case MatchKind.EXACT:
            value = raw.value if isinstance(raw, Exact) else _as_int(raw)
            if not 0 <= value <= full:
                raise SchemaMismatch(f"Column {column.name!r}: {value} exceeds {column.width} bits.")
            return Exact(value)
        case MatchKind.LPM:
            if isinstance(raw, Lpm):
                value, plen = raw
            elif isinstance(raw, (str, IPv4Network)):
                net = IPv4Network(raw, strict=False)
                value, plen = int(net.network_address), net.prefixlen
            else:
                value, plen = _as_int(raw), column.width
            if not 0 <= plen <= column.width:
                raise SchemaMismatch(f"Column {column.name!r}: prefix length {plen} out of range.")
            mask = full ^ ((1 << (column.width - plen)) - 1)
            return Lpm(value & mask, plen)
        case MatchKind.TERNARY:
            if raw is None:
                return Ternary(0, 0)
            if isinstance(raw, Ternary):
                value, mask = raw
            elif isinstance(raw, (str, IPv4Network)):
                net = IPv4Network(raw, strict=False)
                value, mask = int(net.network_address), int(net.netmask)
            else:
                value, mask = _as_int(raw), full
            return Ternary(value & mask & full, mask & full)
    raise SchemaMismatch(f"Unknown match kind {column.kind!r}.")


def normalize_key(schema: Sequence[Column], key: Sequence) -> tuple[MatchValue, ...]:
    """Normalizes a raw key against a schema.

    >>> schema = [Column('dst', MatchKind.LPM)]
    >>> normalize_key(schema, ['10.0.2.7/24'])
    (Lpm(value=167772672, prefix_len=24),)
    """
    if isinstance(key, (str, int, IPv4Address, IPv4Network)) or key is None:
        key = (key,)
    try:
        consistent_length(key, schema)
    except ValueError as e:
        raise SchemaMismatch(f"Key {key!r} does not match schema {[c.name for c in schema]}.") from e
    return tuple(_normalize_value(c, k) for c, k in zip(schema, key))


class MatchActionTable:
    """A named match-action table.

    Lookups on tables with lpm or ternary columns are vectorized with numpy
    over all entries: an entry matches if `key & mask == value` for every
    column; among matches the longest prefix (lpm) or the highest priority
    (ternary) wins. Exact-only tables use a dict.

    Parameters
    __________
    name: str
        Table name.
    schema: Sequence[Column]
        Key columns and their match kinds.
    actions: Sequence[ActionSpec]
        Actions entries may reference, with their parameter names.
    default_action: str
        Action applied on a miss. Must take no parameters.
    """

    def __init__(
        self,
        name: str,
        schema: Sequence[Column],
        actions: Sequence[ActionSpec],
        default_action: str = 'drop',
    ):
        kinds = [c.kind for c in schema]
        if kinds.count(MatchKind.LPM) > 1:
            raise ValueError(f"Table {name!r}: at most one lpm column is supported.")
        if MatchKind.LPM in kinds and MatchKind.TERNARY in kinds:
            raise ValueError(f"Table {name!r}: lpm and ternary columns cannot be mixed.")
        self.name = name
        self.schema = tuple(schema)
        self.actions = {a.name: a for a in actions}
        if default_action not in self.actions:
            raise UnknownAction(f"Table {name!r}: default action {default_action!r} is not declared.")
        self.default_action = default_action
        self.is_ternary = MatchKind.TERNARY in kinds
        self.is_exact = all(k is MatchKind.EXACT for k in kinds)
        self._entries: dict[tuple[MatchValue, ...], TableEntry] = {}
        self._arrays: tuple[np.ndarray, np.ndarray, np.ndarray, list[TableEntry]] | None = None

    def __len__(self) -> int:
        return len(self._entries)

    @property
    def entries(self) -> list[TableEntry]:
        return list(self._entries.values())

    def _check_action(self, action: str, params: Mapping[str, Any]) -> None:
        if action not in self.actions:
            raise UnknownAction(f"Table {self.name!r} has no action {action!r}.")
        spec = self.actions[action]
        missing = set(spec.params) - set(params)
        extra = set(params) - set(spec.params) - set(spec.optional)
        if missing or extra:
            raise SchemaMismatch(
                f"Action {action!r} of table {self.name!r}: missing params "
                f"{sorted(missing)}, unexpected params {sorted(extra)}."
            )

    def normalize(self, key: Sequence) -> tuple[MatchValue, ...]:
        return normalize_key(self.schema, key)

    def get(self, key: Sequence) -> TableEntry:
        norm = self.normalize(key)
        if norm not in self._entries:
            raise NoSuchEntry(f"Table {self.name!r} has no entry {self.describe_key(norm)}.")
        return self._entries[norm]

    def __contains__(self, key) -> bool:
        return self.normalize(key) in self._entries

    def insert(self, entry: TableEntry) -> TableEntry:
        """Adds an entry and returns its normalized form."""
        norm = self.normalize(entry.key)
        self._check_action(entry.action, entry.params)
        if norm in self._entries:
            raise DuplicateKey(f"Table {self.name!r} already holds {self.describe_key(norm)}.")
        if self.is_ternary:
            if entry.priority is None:
                raise SchemaMismatch(f"Ternary table {self.name!r} requires entry priorities.")
            if any(e.priority == entry.priority for e in self._entries.values()):
                raise DuplicatePriority(f"Table {self.name!r} already uses priority {entry.priority}.")
        entry = TableEntry(key=norm, action=entry.action, params=dict(entry.params),
                           priority=entry.priority if self.is_ternary else None)
        self._entries[norm] = entry
        self._arrays = None
        return entry

    def modify(self, key: Sequence, action: str, params: Mapping[str, Any]) -> tuple[TableEntry, TableEntry]:
        """Swaps the action of an existing entry; returns (old, new)."""
        norm = self.normalize(key)
        if norm not in self._entries:
            raise NoSuchEntry(f"Table {self.name!r} has no entry {self.describe_key(norm)}.")
        self._check_action(action, params)
        old = self._entries[norm]
        new = TableEntry(key=norm, action=action, params=dict(params), priority=old.priority)
        self._entries[norm] = new
        self._arrays = None
        return old, new

    def delete(self, key: Sequence) -> TableEntry:
        norm = self.normalize(key)
        if norm not in self._entries:
            raise NoSuchEntry(f"Table {self.name!r} has no entry {self.describe_key(norm)}.")
        self._arrays = None
        return self._entries.pop(norm)

    def _build_arrays(self):
        entries = list(self._entries.values())
        n, c = len(entries), len(self.schema)
        values = np.zeros((n, c), dtype=np.uint64)
        masks = np.zeros((n, c), dtype=np.uint64)
        scores = np.zeros(n, dtype=np.int64)
        for i, entry in enumerate(entries):
            for j, (column, mv) in enumerate(zip(self.schema, entry.key)):
                full = (1 << column.width) - 1
                match mv:
                    case Exact(value):
                        values[i, j], masks[i, j] = value, full
                    case Lpm(value, plen):
                        values[i, j] = value
                        masks[i, j] = full ^ ((1 << (column.width - plen)) - 1)
                        scores[i] += plen
                    case Ternary(value, mask):
                        values[i, j], masks[i, j] = value, mask
            if self.is_ternary:
                scores[i] = entry.priority
        self._arrays = (values, masks, scores, entries)
        return self._arrays

    def lookup(self, values: Sequence[int]) -> LookupResult:
        """Matches concrete header values (one int per column)."""
        if self.is_exact:
            entry = self._entries.get(tuple(Exact(int(v)) for v in values))
        else:
            arrays = self._arrays if self._arrays is not None else self._build_arrays()
            table_values, masks, scores, entries = arrays
            entry = None
            if entries:
                key = np.asarray(values, dtype=np.uint64)
                hits = np.flatnonzero(((key & masks) == table_values).all(axis=1))
                if hits.size:
                    entry = entries[hits[np.argmax(scores[hits])]]
        if entry is None:
            return LookupResult(None, self.default_action, {})
        return LookupResult(entry, entry.action, entry.params)

    def describe_key(self, key: Sequence[MatchValue]) -> list[str]:
        out = []
        for column, mv in zip(self.schema, key):
            fmt = (lambda v: str(IPv4Address(v))) if column.is_address and column.width == 32 else str
            match mv:
                case Exact(value):
                    out.append(fmt(value))
                case Lpm(value, plen):
                    out.append(f"{fmt(value)}/{plen}")
                case Ternary(value, mask):
                    out.append('*' if mask == 0 else f"{fmt(value)}&&&{fmt(mask)}")
        return out

    def snapshot(self) -> list[dict[str, Any]]:
        """JSON-able entries in key order; byte parameters are redacted."""
        rows = []
        for key in sorted(self._entries):
            entry = self._entries[key]
            params = {
                k: ('<redacted>' if isinstance(v, bytes) else str(v) if isinstance(v, IPv4Address) else v)
                for k, v in sorted(entry.params.items())
            }
            rows.append({'key': self.describe_key(key), 'priority': entry.priority,
                         'action': entry.action, 'params': params})
        return rows
