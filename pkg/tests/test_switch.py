from ipaddress import IPv4Address

import pytest
from conftest import H1_MAC, S1_PORTS, S2_PORTS, make_switch_pair

from espnet import RegisterInUse, SchemaMismatch, UnknownTable
from espnet.agent import ConfigApply, HostAgent, Selector
from espnet.codec import ETH_LEN, IPV4_LEN, SpdMark, make_packet, parse_packet, serialize_packet
from espnet.crypto import CipherSuiteId, SecurityAssociation, generate_key_material, seeded_random
from espnet.pipeline import (
    DROP_CATEGORIES,
    SAD_DEC,
    SAD_ENC,
    SPD,
    Notification,
    TableEntry,
    decrypt_action,
    encrypt_action,
)


def lan_frame(src='10.0.1.1', dst='10.0.2.1', ttl=64, payload=b'payload!') -> bytes:
    return serialize_packet(make_packet(H1_MAC, S1_PORTS[1], src, dst, protocol=17,
                                        payload=payload, ttl=ttl))


def make_sa(spi: int, soft_limit: int = 100, hard_limit: int = 110, register_index: int = 0,
            suite: CipherSuiteId = CipherSuiteId.AES_CTR_HMAC_MD5) -> SecurityAssociation:
    return SecurityAssociation(
        spi=spi, tunnel_src='192.0.2.1', tunnel_dst='192.0.2.2', suite=suite,
        keys=generate_key_material(suite, seeded_random(spi)), register_index=register_index,
        soft_limit=soft_limit, hard_limit=hard_limit,
    )


def protect(s1, s2, sa: SecurityAssociation) -> None:
    """Hand-installed one-way tunnel s1 -> s2 for 10.0.1.0/24 -> 10.0.2.0/24."""
    s2.table_insert(SAD_DEC, TableEntry(('192.0.2.1', '192.0.2.2', sa.spi), decrypt_action(sa.suite),
                                        sa.to_action_params()))
    s1.table_insert(SAD_ENC, TableEntry(('192.0.2.2',), encrypt_action(sa.suite), sa.to_action_params()))
    s1.table_insert(SPD, TableEntry(('10.0.1.0/24', '10.0.2.0/24', None), 'add_spd_mark',
                                    {'mark': int(SpdMark.PROTECT), 'tunnel_dst': '192.0.2.2'}, priority=10))


def bypass_all(sw) -> None:
    sw.table_insert(SPD, TableEntry((None, None, None), 'add_spd_mark', {'mark': int(SpdMark.BYPASS)}, priority=0))


def test_default_deny():
    s1, _ = make_switch_pair()
    result = s1.process_packet(1, lan_frame())
    assert result.outputs == [] and result.drop_reason == 'no-spd-match'
    assert s1.drops == {'no-spd-match': 1}


def test_unknown_spi_is_dropped():
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000))
    [(_, frame)] = s1.process_packet(1, lan_frame()).outputs
    s2.table_delete(SAD_DEC, ('192.0.2.1', '192.0.2.2', 1000))
    assert s2.process_packet(2, frame).drop_reason == 'no-sa'


def test_bypass_forwards_with_rewrite():
    s1, _ = make_switch_pair()
    bypass_all(s1)
    [(port, frame)] = s1.process_packet(1, lan_frame(dst='192.0.2.2')).outputs
    p = parse_packet(frame)
    assert port == 2
    assert p.eth.src_mac == bytes.fromhex(S1_PORTS[2].replace(':', ''))
    assert p.eth.dst_mac == bytes.fromhex(S2_PORTS[2].replace(':', ''))
    assert p.ipv4.ttl == 63


@pytest.mark.parametrize('frame, reason', [
    (lan_frame(dst='203.0.113.9'), 'no-route'),
    (lan_frame(dst='192.0.2.2', ttl=1), 'ttl-expired'),
    (b'\x00' * 20, 'parse-error'),
])
def test_categorized_drops(frame, reason):
    s1, _ = make_switch_pair()
    bypass_all(s1)
    assert s1.process_packet(1, frame).drop_reason == reason
    assert reason in DROP_CATEGORIES


def test_spd_discard():
    s1, _ = make_switch_pair()
    bypass_all(s1)
    s1.table_insert(SPD, TableEntry((None, '10.0.2.0/24', None), 'drop', {}, priority=5))
    assert s1.process_packet(1, lan_frame()).drop_reason == 'spd-discard'


@pytest.mark.parametrize('suite', list(CipherSuiteId))
def test_tunnel_through_two_switches(suite):
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000, suite=suite))
    sent = lan_frame(payload=b'hello, other side')
    [(port, esp_frame)] = s1.process_packet(1, sent).outputs
    outer = parse_packet(esp_frame)
    assert port == 2
    assert outer.esp.spi == 1000 and outer.esp.seq == 1
    assert (outer.ipv4.src, outer.ipv4.dst) == (IPv4Address('192.0.2.1'), IPv4Address('192.0.2.2'))
    assert outer.ipv4.ttl == 63
    [(port, frame)] = s2.process_packet(2, esp_frame).outputs
    inner = parse_packet(frame)
    assert port == 1
    assert inner.body == b'hello, other side'
    assert inner.ipv4.dst == IPv4Address('10.0.2.1')
    assert inner.ipv4.ttl == 63
    assert s1.register_read(0) == 1 and s2.register_read(0) == 1


def test_soft_limit_notifies_once_and_hard_limit_drops():
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000, soft_limit=2, hard_limit=3))
    results = [s1.process_packet(1, lan_frame()) for _ in range(5)]
    assert [r.drop_reason for r in results] == [None, None, None, 'hard-limit', 'hard-limit']
    assert results[1].notifications == [Notification('s1', 1000, 'enc')]
    assert s1.poll_notifications() == [Notification('s1', 1000, 'enc')]
    assert s1.poll_notifications() == []
    for r in results[:3]:
        s2.process_packet(2, r.outputs[0][1])
    assert s2.poll_notifications() == [Notification('s2', 1000, 'dec')]


def test_tampered_esp_is_dropped():
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000))
    [(_, frame)] = s1.process_packet(1, lan_frame()).outputs
    tampered = frame[:-1] + bytes([frame[-1] ^ 0x80])
    assert s2.process_packet(2, tampered).drop_reason == 'icv-fail'
    assert s2.forwarded_count == 0


def test_register_ownership():
    s1, _ = make_switch_pair()
    sa = make_sa(1000, register_index=3)
    s1.table_insert(SAD_ENC, TableEntry(('192.0.2.2',), encrypt_action(sa.suite), sa.to_action_params()))
    other = make_sa(1001, register_index=3)
    with pytest.raises(RegisterInUse):
        s1.table_insert(SAD_DEC, TableEntry(('192.0.2.2', '192.0.2.1', 1001), decrypt_action(other.suite),
                                            other.to_action_params()))
    # replacing the owner itself keeps the index
    s1.table_modify(SAD_ENC, ('192.0.2.2',), encrypt_action(other.suite), other.to_action_params())
    s1.table_delete(SAD_ENC, ('192.0.2.2',))
    s1.table_insert(SAD_DEC, TableEntry(('192.0.2.2', '192.0.2.1', 1001), decrypt_action(other.suite),
                                        other.to_action_params()))


def test_control_api_errors():
    s1, _ = make_switch_pair()
    with pytest.raises(UnknownTable):
        s1.table_read('ACL', ('10.0.0.1',))
    with pytest.raises(SchemaMismatch):
        s1.table_insert('LPM-FWD', TableEntry(('10.9.0.0/16',), 'forward_packet',
                                              {'dst_mac': H1_MAC, 'port': 9}))


def test_snapshot_hides_keys():
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000))
    snap = s1.snapshot()
    assert set(snap['tables']) == {'LPM-FWD', 'SPD', 'SAD-ENC', 'SAD-DEC'}
    [row] = snap['tables']['SAD-ENC']
    assert row['params']['aes_key'] == '<redacted>'
    assert snap['registers'] == {'0': 0}


@pytest.mark.parametrize('suite', list(CipherSuiteId))
def test_host_and_switch_encrypt_identically(suite):
    s1, s2 = make_switch_pair()
    sa = make_sa(1000, suite=suite)
    protect(s1, s2, sa)
    host = HostAgent('h1', '10.0.1.1', H1_MAC, S1_PORTS[1])
    host.apply_config(ConfigApply('t', sa_in=make_sa(2000, suite=suite), sa_out=sa,
                                  selector=Selector('10.0.1.0/24', '10.0.2.0/24')))
    for payload in [b'', b'x', b'seventeen bytes!!', bytes(range(200))]:
        sent = lan_frame(payload=payload)
        [(_, from_switch)] = s1.process_packet(1, sent).outputs
        from_host = host.host_send(sent[ETH_LEN:])
        assert from_switch[ETH_LEN + IPV4_LEN:] == from_host[ETH_LEN + IPV4_LEN:]
        a, b = parse_packet(from_switch), parse_packet(from_host)
        assert (a.ipv4.src, a.ipv4.dst) == (b.ipv4.src, b.ipv4.dst)


def test_oversized_protect_traffic_is_dropped():
    s1, s2 = make_switch_pair()
    protect(s1, s2, make_sa(1000))
    result = s1.process_packet(1, lan_frame(payload=b'x' * 65500))
    assert result.outputs == [] and result.drop_reason == 'too-big'
    assert 'too-big' in DROP_CATEGORIES
    assert s1.register_read(0) == 0
    [(_, frame)] = s1.process_packet(1, lan_frame()).outputs
    assert parse_packet(frame).esp.seq == 1
    assert s1.drops == {'too-big': 1}
    assert s1.ingress_count == 2 and s1.forwarded_count == 1


def test_every_frame_is_forwarded_or_counted():
    s1, s2 = make_switch_pair()
    bypass_all(s1)
    protect(s1, s2, make_sa(1000, soft_limit=2, hard_limit=3))
    s1.table_insert(SPD, TableEntry(('10.0.1.0/24', '10.0.3.0/24', None), 'add_spd_mark',
                                    {'mark': int(SpdMark.PROTECT), 'tunnel_dst': '192.0.2.9'}, priority=11))
    batch = [
        lan_frame(dst='192.0.2.2'),
        lan_frame(payload=b'x' * 65500),
        *[lan_frame() for _ in range(4)],
        lan_frame(dst='203.0.113.9'),
        lan_frame(dst='192.0.2.2', ttl=1),
        b'\x00' * 20,
        lan_frame(dst='10.0.3.1'),
    ]
    for frame in batch:
        s1.process_packet(1, frame)
    assert s1.drops == {'too-big': 1, 'hard-limit': 1, 'no-route': 1, 'ttl-expired': 1,
                        'parse-error': 1, 'no-sa': 1}
    assert s1.forwarded_count == 4
    assert sum(s1.drops.values()) + s1.forwarded_count == s1.ingress_count == len(batch)
    assert set(s1.drops) <= set(DROP_CATEGORIES)
