from ipaddress import IPv4Address

import pytest

from espnet import BadNextHeader, BadPadding, ConflictingSelector, NoSelectorMatch, PacketTooBig, UnknownSpi
from espnet.agent import (
    Ack,
    ConfigApply,
    ExpireNotice,
    Hello,
    HostAgent,
    ProfileSummary,
    SaUpdate,
    Selector,
    Teardown,
    TunnelOffer,
    decode_message,
    encode_message,
)
from espnet.codec import ETH_LEN, make_packet, serialize_packet
from espnet.crypto import SecurityAssociation, generate_key_material, seeded_random

A_IP, B_IP = '198.51.100.7', '198.51.100.8'


def make_sa(spi: int, src: str, dst: str, soft_limit: int = 100, hard_limit: int = 110) -> SecurityAssociation:
    return SecurityAssociation(spi=spi, tunnel_src=src, tunnel_dst=dst, suite='AES_CTR_HMAC_MD5',
                               keys=generate_key_material('AES_CTR_HMAC_MD5', seeded_random(spi)),
                               soft_limit=soft_limit, hard_limit=hard_limit)


def make_agent(host_id: str, ip: str) -> HostAgent:
    return HostAgent(host_id, ip, '02:00:00:00:00:07', '02:00:00:00:02:03',
                     roadwarrior_id=host_id, token=f"{host_id}-token")


def inner(src: str, dst: str, payload: bytes = b'ping') -> bytes:
    p = make_packet('02:00:00:00:00:07', '02:00:00:00:02:03', src, dst, payload=payload)
    return serialize_packet(p)[ETH_LEN:]


@pytest.fixture
def peers():
    """Two hosts sharing a tunnel, A -> B under SPI 1000 and B -> A under 2000."""
    a, b = make_agent('a', A_IP), make_agent('b', B_IP)
    a_to_b, b_to_a = make_sa(1000, A_IP, B_IP, 2, 3), make_sa(2000, B_IP, A_IP)
    a.apply_config(ConfigApply('t', sa_in=b_to_a, sa_out=a_to_b, selector=Selector(f"{A_IP}/32", f"{B_IP}/32")))
    b.apply_config(ConfigApply('t', sa_in=a_to_b, sa_out=b_to_a, selector=Selector(f"{B_IP}/32", f"{A_IP}/32")))
    return a, b


def test_messages_survive_the_wire():
    sa_in, sa_out = make_sa(1000, A_IP, '192.0.2.2'), make_sa(2000, '192.0.2.2', A_IP)
    messages = [
        Hello('alice', 'secret', A_IP),
        TunnelOffer((ProfileSummary('p', '10.0.2.0/24', 'AES_CTR_HMAC_MD5'),)),
        ConfigApply('p', sa_in=sa_in, sa_out=sa_out, selector=Selector(f"{A_IP}/32", '10.0.2.0/24', 17),
                    routes=('10.0.2.0/24',)),
        SaUpdate('p', install_in=sa_in),
        SaUpdate('p', remove_in_spi=1000),
        ExpireNotice(1000, 'hard'),
        Teardown('p'),
        Ack(ok=False, ref='p', error='nope'),
    ]
    for message in messages:
        assert decode_message(encode_message(message)) == message


def test_malformed_frames():
    frame = encode_message(Teardown('p'))
    with pytest.raises(ValueError):
        decode_message(frame[:-1])
    with pytest.raises(ValueError):
        decode_message(b'\x00\x00')
    with pytest.raises(ValueError):
        decode_message(b'\x00\x00\x00\x0f{"type":"Spam"}')


def test_sa_update_sets_exactly_one_field():
    with pytest.raises(ValueError):
        SaUpdate('p')
    with pytest.raises(ValueError):
        SaUpdate('p', install_in=make_sa(1000, A_IP, B_IP), remove_in_spi=1000)


def test_hello_hides_the_token():
    assert 'secret' not in repr(Hello('alice', 'secret', A_IP))


def test_selector():
    s = Selector('10.0.1.0/24', '10.0.2.0/24', 6)
    assert s.matches(IPv4Address('10.0.1.9'), IPv4Address('10.0.2.9'), 6)
    assert not s.matches(IPv4Address('10.0.1.9'), IPv4Address('10.0.2.9'), 17)
    assert s.reversed() == Selector('10.0.2.0/24', '10.0.1.0/24', 6)
    assert s.overlaps(Selector('10.0.0.0/16', '10.0.2.128/25'))
    assert not s.overlaps(Selector('10.0.1.0/24', '10.0.2.0/24', 17))


def test_host_tunnel(peers):
    a, b = peers
    sent = inner(A_IP, B_IP, b'hello b')
    assert b.host_receive(a.host_send(sent)) == sent
    reply = inner(B_IP, A_IP, b'hello a')
    assert a.host_receive(b.host_send(reply)) == reply


def test_host_limits(peers):
    a, b = peers
    frames = [a.host_send(inner(A_IP, B_IP)) for _ in range(4)]
    assert frames[3] is None
    assert a.drops['hard-limit'] == 1
    assert a.poll_expire_notices() == [ExpireNotice(1000, 'soft'), ExpireNotice(1000, 'hard')]
    assert a.poll_expire_notices() == []
    for frame in frames[:3]:
        b.host_receive(frame)
    assert [n.level for n in b.poll_expire_notices()] == ['soft', 'hard']


def test_host_rejects_unknown_traffic(peers):
    a, b = peers
    with pytest.raises(NoSelectorMatch):
        a.host_send(inner(A_IP, '203.0.113.1'))
    frame = b.host_send(inner(B_IP, A_IP))
    with pytest.raises(UnknownSpi):
        b.host_receive(frame)


def test_conflicting_selector(peers):
    a, _ = peers
    overlapping = ConfigApply('other', sa_in=make_sa(3000, B_IP, A_IP), sa_out=make_sa(3001, A_IP, B_IP),
                              selector=Selector(f"{A_IP}/32", '198.51.100.0/24'))
    with pytest.raises(ConflictingSelector):
        a.apply_config(overlapping)
    assert list(a.applied) == ['t']


def test_sa_update_and_teardown(peers):
    a, b = peers
    new_in = make_sa(2001, B_IP, A_IP)
    a.handle_message(SaUpdate('t', install_in=new_in))
    assert set(a.state.sad_in) == {2000, 2001}
    a.handle_message(SaUpdate('t', remove_in_spi=2000))
    assert set(a.state.sad_in) == {2001}
    with pytest.raises(UnknownSpi):
        a.sa_update(SaUpdate('t', remove_in_spi=2000))

    new_out = make_sa(1001, A_IP, B_IP)
    a.handle_message(SaUpdate('t', replace_out=new_out))
    b.handle_message(SaUpdate('t', install_in=new_out))
    sent = inner(A_IP, B_IP)
    assert b.host_receive(a.host_send(sent)) == sent

    a.handle_message(Teardown('t'))
    assert a.applied == {} and a.state.sad_in == {} and a.state.spd_lite == {}
    assert a.handle_message(Teardown('t')) == Ack(ref='t')


def test_reapplying_replaces_the_config(peers):
    a, _ = peers
    again = ConfigApply('t', sa_in=make_sa(2002, B_IP, A_IP), sa_out=make_sa(1002, A_IP, B_IP),
                        selector=Selector(f"{A_IP}/32", f"{B_IP}/32"))
    a.apply_config(again)
    assert set(a.state.sad_in) == {2002}
    assert a.state.sad_out['t'].spi == 1002


def null_peers() -> tuple[HostAgent, HostAgent]:
    a, b = make_agent('a', A_IP), make_agent('b', B_IP)
    a_to_b = SecurityAssociation(spi=1000, tunnel_src=A_IP, tunnel_dst=B_IP, suite='NULL')
    b_to_a = SecurityAssociation(spi=2000, tunnel_src=B_IP, tunnel_dst=A_IP, suite='NULL')
    a.apply_config(ConfigApply('t', sa_in=b_to_a, sa_out=a_to_b, selector=Selector(f"{A_IP}/32", f"{B_IP}/32")))
    b.apply_config(ConfigApply('t', sa_in=a_to_b, sa_out=b_to_a, selector=Selector(f"{B_IP}/32", f"{A_IP}/32")))
    return a, b


def test_forged_trailer_without_icv():
    a, b = null_peers()
    frame = a.host_send(inner(A_IP, B_IP))
    assert frame is not None
    assert b.host_receive(frame) == inner(A_IP, B_IP)
    # 24-byte inner packet: trailer is 01 02 | pad length 2 | next header 4
    assert frame[-4:] == b'\x01\x02\x02\x04'
    wrong_next_header = frame[:-1] + b'\x11'
    with pytest.raises(BadNextHeader):
        b.host_receive(wrong_next_header)
    wrong_padding = frame[:-3] + b'\x09' + frame[-2:]
    with pytest.raises(BadPadding):
        b.host_receive(wrong_padding)


def test_oversized_packet_keeps_the_counter(peers):
    a, _ = peers
    with pytest.raises(PacketTooBig):
        a.host_send(inner(A_IP, B_IP, b'x' * 65500))
    assert a.drops['too-big'] == 1
    assert a.state.counters[1000] == 0
    assert a.host_send(inner(A_IP, B_IP)) is not None
    assert a.state.counters[1000] == 1
