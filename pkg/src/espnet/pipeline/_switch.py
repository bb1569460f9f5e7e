"""The switch: four function blocks over four match-action tables.

ESP packets go through ESP decryption and then L3 forwarding. Other IPv4
packets go through the (no-op) higher-layer hook, SPD matching, optionally
ESP encryption, and L3 forwarding. Every failure is a categorized drop.
"""
import logging
from collections import Counter
from collections.abc import Mapping
from dataclasses import dataclass, replace
from ipaddress import IPv4Address
from typing import Any, Literal, NamedTuple

from .._errors import (
    BadNextHeader,
    BadPadding,
    CodecError,
    IcvMismatch,
    RegisterInUse,
    SchemaMismatch,
    SequenceOverflow,
    UnknownTable,
)
from .._params import SwitchParams, WorkCost, validate_switch_params, validate_work_cost
from ..codec import (
    EthernetHeader,
    Packet,
    SpdMark,
    mac_to_bytes,
    mac_to_str,
    parse_packet,
    serialize_ipv4,
    serialize_packet,
)
from ..crypto import (
    CipherSuiteId,
    SecurityAssociation,
    MAX_IPV4_LEN,
    outer_length,
    tunnel_decapsulate,
    tunnel_encapsulate,
)
from ._registers import RegisterArray
from ._tables import ActionSpec, Column, LookupResult, MatchActionTable, MatchKind, TableEntry

logger = logging.getLogger(__name__)

__all__ = ['LPM_FWD', 'SPD', 'SAD_ENC', 'SAD_DEC', 'TABLE_NAMES', 'DROP_CATEGORIES',
           'Notification', 'ProcessResult', 'SwitchState', 'encrypt_action',
           'decrypt_action', 'suite_of_action', 'make_tables']

LPM_FWD = 'LPM-FWD'
SPD = 'SPD'
SAD_ENC = 'SAD-ENC'
SAD_DEC = 'SAD-DEC'
TABLE_NAMES = (LPM_FWD, SPD, SAD_ENC, SAD_DEC)

DROP_CATEGORIES = (
    'parse-error', 'no-spd-match', 'spd-discard', 'no-sa', 'icv-fail',
    'bad-padding', 'hard-limit', 'seq-overflow', 'too-big', 'ttl-expired', 'no-route',
)

_SA_PARAMS = ('spi', 'tunnel_src', 'tunnel_dst', 'register_index', 'soft_limit', 'hard_limit')
_KEY_PARAMS = ('aes_key', 'ctr_nonce', 'hmac_key')


def encrypt_action(suite: CipherSuiteId | str) -> str:
    """
    >>> encrypt_action('AES_CTR_HMAC_MD5')
    'esp_encrypt_aes_ctr_hmac_md5'
    """
    return f"esp_encrypt_{CipherSuiteId(suite).value.lower()}"


def decrypt_action(suite: CipherSuiteId | str) -> str:
    return f"esp_decrypt_{CipherSuiteId(suite).value.lower()}"


def suite_of_action(action: str) -> CipherSuiteId:
    for suite in CipherSuiteId:
        if action in (encrypt_action(suite), decrypt_action(suite)):
            return suite
    raise ValueError(f"{action!r} is not a cipher-suite action.")


def _sa_actions(make_name) -> list[ActionSpec]:
    actions = [ActionSpec('drop')]
    for suite in CipherSuiteId:
        params = _SA_PARAMS + (_KEY_PARAMS if suite is CipherSuiteId.AES_CTR_HMAC_MD5 else ())
        actions.append(ActionSpec(make_name(suite), params))
    return actions


def make_tables() -> dict[str, MatchActionTable]:
    """The fixed table set of the pipeline."""
    return {
        LPM_FWD: MatchActionTable(
            LPM_FWD, [Column('dst', MatchKind.LPM)],
            [ActionSpec('forward_packet', ('dst_mac', 'port')), ActionSpec('drop')],
        ),
        SPD: MatchActionTable(
            SPD,
            [Column('src', MatchKind.TERNARY), Column('dst', MatchKind.TERNARY),
             Column('protocol', MatchKind.TERNARY, width=8, is_address=False)],
            [ActionSpec('add_spd_mark', ('mark',), optional=('tunnel_dst',)), ActionSpec('drop')],
        ),
        SAD_ENC: MatchActionTable(
            SAD_ENC, [Column('dst', MatchKind.EXACT)], _sa_actions(encrypt_action),
        ),
        SAD_DEC: MatchActionTable(
            SAD_DEC,
            [Column('outer_src', MatchKind.EXACT), Column('outer_dst', MatchKind.EXACT),
             Column('spi', MatchKind.EXACT, is_address=False)],
            _sa_actions(decrypt_action),
        ),
    }


@dataclass(frozen=True)
class Notification:
    switch_id: str
    spi: int
    direction: Literal['enc', 'dec']
    kind: Literal['soft_limit'] = 'soft_limit'


class ProcessResult(NamedTuple):
    outputs: list[tuple[int, bytes]]
    notifications: list[Notification]
    drop_reason: str | None = None


class SwitchState:
    """A software switch exposing the table/register/notification control API.

    Parameters
    __________
    switch_id: str
        Unique switch identifier.
    ports: dict[int, str | bytes]
        Port id to the MAC address used as source on egress.
    params: dict | SwitchParams
        Register size and outer ttl.
    work_cost: dict | WorkCost
        Work units charged per lookup and per processed byte.
    """

    def __init__(
        self,
        switch_id: str,
        ports: dict[int, str | bytes],
        params: dict | SwitchParams | None = None,
        work_cost: dict | WorkCost | None = None,
    ):
        self.switch_id = switch_id
        self.ports = {int(p): mac_to_bytes(mac) for p, mac in ports.items()}
        self.params: SwitchParams = validate_switch_params(params)
        self.work_cost: WorkCost = validate_work_cost(work_cost)
        self.tables = make_tables()
        self.registers = RegisterArray(self.params.register_size)
        self._register_owner: dict[int, tuple[str, tuple]] = {}
        self._notified: set[tuple[int, str]] = set()
        self._pending: list[Notification] = []
        self.drops: Counter[str] = Counter()
        self.control_counts: Counter[str] = Counter()
        self.ingress_count = 0
        self.forwarded_count = 0
        self.work = 0.0

    def __repr__(self) -> str:
        sizes = ', '.join(f"{n}:{len(t)}" for n, t in self.tables.items())
        return f"SwitchState({self.switch_id}, {sizes})"

    # ------------------------------------------------------------------ #
    # Control API
    # ------------------------------------------------------------------ #
    def _table(self, name: str) -> MatchActionTable:
        if name not in self.tables:
            raise UnknownTable(f"Switch {self.switch_id} has no table {name!r}.")
        return self.tables[name]

    @staticmethod
    def _uses_register(table: str, action: str) -> bool:
        return table in (SAD_ENC, SAD_DEC) and action != 'drop'

    def _check_entry(self, table: str, action: str, params: Mapping[str, Any], key: tuple | None) -> None:
        """Switch-specific checks on top of the table schema.

        `key` is the normalized key of the entry being replaced, if any.
        """
        if table == LPM_FWD and action == 'forward_packet' and int(params.get('port', -1)) not in self.ports:
            raise SchemaMismatch(f"Switch {self.switch_id} has no port {params.get('port')}.")
        if self._uses_register(table, action) and 'register_index' in params:
            index = params['register_index']
            self.registers.check_index(index)
            owner = self._register_owner.get(index)
            if owner is not None and owner != (table, key):
                raise RegisterInUse(
                    f"Switch {self.switch_id}: register {index} is used by a {owner[0]} entry."
                )

    def _claim_register(self, table: str, entry: TableEntry) -> None:
        index = entry.params['register_index']
        self._register_owner[index] = (table, entry.key)
        self.registers.assign(index)

    def _release_register(self, table: str, entry: TableEntry) -> None:
        if not self._uses_register(table, entry.action):
            return
        index = entry.params['register_index']
        if self._register_owner.get(index) == (table, entry.key):
            del self._register_owner[index]
        direction = 'enc' if table == SAD_ENC else 'dec'
        self._notified.discard((entry.params['spi'], direction))

    def table_insert(self, table: str, entry: TableEntry) -> TableEntry:
        """Adds an entry, active for the next processed packet."""
        t = self._table(table)
        self._check_entry(table, entry.action, entry.params, None)
        entry = t.insert(entry)
        if self._uses_register(table, entry.action):
            self._claim_register(table, entry)
        self.control_counts['insert'] += 1
        logger.debug(f"{self.switch_id}: insert {table} {t.describe_key(entry.key)} -> {entry.action}")
        return entry

    def table_modify(self, table: str, key, action: str, params: Mapping[str, Any]) -> TableEntry:
        """Replaces the action of an entry in one step."""
        t = self._table(table)
        current = t.get(key)
        self._check_entry(table, action, params, current.key)
        old, new = t.modify(key, action, params)
        self._release_register(table, old)
        if self._uses_register(table, action):
            self._claim_register(table, new)
        self.control_counts['modify'] += 1
        logger.debug(f"{self.switch_id}: modify {table} {t.describe_key(new.key)} -> {action}")
        return new

    def table_delete(self, table: str, key) -> TableEntry:
        """Removes an entry, releasing its register index for SAD tables."""
        t = self._table(table)
        old = t.delete(key)
        self._release_register(table, old)
        self.control_counts['delete'] += 1
        logger.debug(f"{self.switch_id}: delete {table} {t.describe_key(old.key)}")
        return old

    def table_read(self, table: str, key) -> TableEntry | None:
        """The entry stored under exactly `key`, if any."""
        t = self._table(table)
        self.control_counts['read'] += 1
        return t.get(key) if key in t else None

    def table_lookup(self, table: str, values: tuple[int, ...]) -> LookupResult:
        """Runs a lookup as the data plane would, without side effects."""
        self.control_counts['read'] += 1
        return self._table(table).lookup(values)

    def register_read(self, index: int) -> int:
        return self.registers.read(index)

    def register_write(self, index: int, value: int) -> None:
        self.registers.write(index, value)
        self.control_counts['register_write'] += 1

    def poll_notifications(self) -> list[Notification]:
        """Drains pending notifications in emission order."""
        notes, self._pending = self._pending, []
        return notes

    # ------------------------------------------------------------------ #
    # Data plane
    # ------------------------------------------------------------------ #
    def _notify(self, spi: int, direction: Literal['enc', 'dec']) -> None:
        if (spi, direction) in self._notified:
            return
        self._notified.add((spi, direction))
        note = Notification(switch_id=self.switch_id, spi=spi, direction=direction)
        self._pending.append(note)
        logger.info(f"{self.switch_id}: soft limit reached for SPI {spi} ({direction})")

    def _check_limits(self, p: Packet, sa: SecurityAssociation, counter: int, direction) -> bool:
        """Sets limit flags; returns False when the packet must be dropped."""
        if counter == sa.soft_limit:
            p.meta.soft_limit_reached = True
            self._notify(sa.spi, direction)
        if counter >= sa.hard_limit:
            p.meta.hard_limit_reached = True
        if counter > sa.hard_limit:
            p.meta.drop('hard-limit')
            return False
        return True

    def _cipher_work(self, suite: CipherSuiteId, length: int) -> float:
        cost = self.work_cost.frame_byte * length
        if suite is CipherSuiteId.AES_CTR_HMAC_MD5:
            cost += (self.work_cost.cipher_byte + self.work_cost.auth_byte) * length
        return cost

    def block_higher_layer(self, p: Packet) -> None:
        """Hook for functions on layers above IP; nothing to do here."""

    def block_spd_match(self, p: Packet) -> None:
        """Marks the packet BYPASS or PROTECT, or drops it."""
        self.work += self.work_cost.lookup
        result = self.tables[SPD].lookup((int(p.ipv4.src), int(p.ipv4.dst), p.ipv4.protocol))
        if not result.hit:
            p.meta.drop('no-spd-match')
            return
        if result.action == 'drop':
            p.meta.drop('spd-discard')
            return
        p.meta.spd_mark = SpdMark(result.params['mark'])
        tunnel_dst = result.params.get('tunnel_dst')
        if tunnel_dst is not None:
            p.meta.sa_dst = IPv4Address(tunnel_dst)

    def block_esp_encrypt(self, p: Packet) -> Packet:
        """Returns the outer ESP packet, or `p` marked as dropped."""
        self.work += self.work_cost.lookup
        sa_dst = p.meta.sa_dst if p.meta.sa_dst is not None else p.ipv4.dst
        result = self.tables[SAD_ENC].lookup((int(sa_dst),))
        if not result.hit or result.action == 'drop':
            p.meta.drop('no-sa')
            return p
        sa = SecurityAssociation.from_action_params(suite_of_action(result.action), result.params)
        inner_ip = serialize_ipv4(p.ipv4, None, p.body)
        if outer_length(sa, len(inner_ip)) > MAX_IPV4_LEN:
            p.meta.drop('too-big')
            return p
        counter = self.registers.increment(sa.register_index)
        if not self._check_limits(p, sa, counter, 'enc'):
            return p
        try:
            outer = tunnel_encapsulate(sa, counter, inner_ip, p.eth, self.params.outer_ttl)
        except SequenceOverflow:
            p.meta.drop('seq-overflow')
            return p
        self.work += self._cipher_work(sa.suite, len(inner_ip))
        outer.meta = p.meta
        return outer

    def block_esp_decrypt(self, p: Packet) -> Packet:
        """Returns the inner packet, or `p` marked as dropped."""
        assert p.esp is not None
        self.work += self.work_cost.lookup
        result = self.tables[SAD_DEC].lookup((int(p.ipv4.src), int(p.ipv4.dst), p.esp.spi))
        if not result.hit or result.action == 'drop':
            p.meta.drop('no-sa')
            return p
        sa = SecurityAssociation.from_action_params(suite_of_action(result.action), result.params)
        counter = self.registers.increment(sa.register_index)
        if not self._check_limits(p, sa, counter, 'dec'):
            return p
        try:
            inner = tunnel_decapsulate(sa, p)
        except IcvMismatch:
            p.meta.drop('icv-fail')
            return p
        except (BadPadding, BadNextHeader):
            p.meta.drop('bad-padding')
            return p
        except CodecError:
            p.meta.drop('parse-error')
            return p
        self.work += self._cipher_work(sa.suite, len(p.body))
        inner.meta = p.meta
        return inner

    def block_l3_forward(self, p: Packet) -> Packet:
        """Longest-prefix forwarding with MAC rewrite and ttl decrement."""
        if p.ipv4.ttl <= 1:
            p.meta.drop('ttl-expired')
            return p
        self.work += self.work_cost.lookup
        result = self.tables[LPM_FWD].lookup((int(p.ipv4.dst),))
        if not result.hit or result.action == 'drop':
            p.meta.drop('no-route')
            return p
        port = int(result.params['port'])
        p.eth = EthernetHeader(dst_mac=mac_to_bytes(result.params['dst_mac']),
                               src_mac=self.ports[port], ethertype=p.eth.ethertype)
        p.ipv4 = replace(p.ipv4, ttl=p.ipv4.ttl - 1)
        p.meta.egress_port = port
        return p

    def process_packet(self, ingress_port: int, frame: bytes) -> ProcessResult:
        """Runs one frame through the pipeline: at most one output frame."""
        self.ingress_count += 1
        emitted = len(self._pending)
        try:
            p = parse_packet(frame)
        except CodecError as e:
            logger.debug(f"{self.switch_id}: parse error on port {ingress_port}: {e}")
            self.drops['parse-error'] += 1
            return ProcessResult([], [], 'parse-error')
        self.work += self.work_cost.parse_byte * len(frame)

        if p.esp is not None:
            p = self.block_esp_decrypt(p)
        else:
            self.block_higher_layer(p)
            self.block_spd_match(p)
            if not p.meta.dropped and p.meta.spd_mark is SpdMark.PROTECT:
                p = self.block_esp_encrypt(p)
        if not p.meta.dropped:
            p = self.block_l3_forward(p)

        notes = self._pending[emitted:]
        if p.meta.dropped:
            reason = p.meta.drop_reason or 'unknown'
            self.drops[reason] += 1
            logger.debug(f"{self.switch_id}: drop ({reason}) {p.ipv4.src} -> {p.ipv4.dst}")
            return ProcessResult([], notes, reason)
        out = serialize_packet(p)
        self.work += self.work_cost.parse_byte * len(out)
        self.forwarded_count += 1
        assert p.meta.egress_port is not None
        return ProcessResult([(p.meta.egress_port, out)], notes, None)

    def snapshot(self) -> dict[str, Any]:
        """JSON-able state: tables (keys redacted), counters, registers in use."""
        return {
            'switch_id': self.switch_id,
            'ports': {str(p): mac_to_str(m) for p, m in sorted(self.ports.items())},
            'tables': {name: t.snapshot() for name, t in self.tables.items()},
            'registers': {str(i): self.registers.read(i) for i in sorted(self._register_owner)},
            'drops': dict(sorted(self.drops.items())),
            'ingress': self.ingress_count,
            'forwarded': self.forwarded_count,
            'control_messages': dict(sorted(self.control_counts.items())),
        }
