from dataclasses import replace

import numpy as np
import pytest
from Crypto.Cipher import AES
from conftest import FIXTURES, load_json

from espnet import IcvMismatch, MissingKeyMaterial, SequenceOverflow
from espnet.codec import (
    ESP_ALIGNMENT,
    ETH_LEN,
    EthernetHeader,
    make_packet,
    parse_packet,
    serialize_ipv4,
    serialize_packet,
)
from espnet.crypto import (
    MAX_SEQ,
    CipherSuiteId,
    SaKeyMaterial,
    SecurityAssociation,
    aes_ctr_transform,
    esp_header_for,
    generate_key_material,
    get_suite,
    seeded_random,
    tunnel_decapsulate,
    tunnel_encapsulate,
)

VECTORS = load_json(FIXTURES / 'rfc3686.json')
ETH = EthernetHeader(dst_mac='02:00:00:00:02:02', src_mac='02:00:00:00:01:02')


def ctr_oracle(key: bytes, nonce: bytes, iv: bytes, data: bytes) -> bytes:
    """Counter mode spelled out block by block on top of raw AES."""
    ecb = AES.new(key, AES.MODE_ECB)
    out = bytearray()
    for block, start in enumerate(range(0, len(data), 16), start=1):
        stream = ecb.encrypt(nonce + iv + block.to_bytes(4, 'big'))
        out += bytes(a ^ b for a, b in zip(data[start:start + 16], stream))
    return bytes(out)


def make_sa(suite: CipherSuiteId, seed: int = 0, **kwargs) -> SecurityAssociation:
    return SecurityAssociation(
        spi=0x1000 + seed, tunnel_src='192.0.2.1', tunnel_dst='192.0.2.2', suite=suite,
        keys=generate_key_material(suite, seeded_random(seed)), **kwargs,
    )


def inner_packet(rng: np.random.Generator) -> bytes:
    payload = rng.bytes(int(rng.integers(0, 300)))
    p = make_packet('02:00:00:00:00:01', '02:00:00:00:01:01', '10.0.1.1', '10.0.2.1',
                    protocol=17, payload=payload, identification=int(rng.integers(0, 1 << 16)))
    return serialize_packet(p)[ETH_LEN:]


@pytest.mark.parametrize('vector', VECTORS, ids=[v['name'] for v in VECTORS])
def test_aes_ctr_known_answers(vector):
    key, nonce, iv = (bytes.fromhex(vector[k]) for k in ('key', 'nonce', 'iv'))
    pt, ct = bytes.fromhex(vector['plaintext']), bytes.fromhex(vector['ciphertext'])
    assert aes_ctr_transform(key, nonce, iv, pt) == ct
    assert aes_ctr_transform(key, nonce, iv, ct) == pt
    assert ctr_oracle(key, nonce, iv, pt) == ct


def test_aes_ctr_agrees_with_oracle_on_odd_lengths():
    rng = np.random.default_rng(5)
    for length in (1, 15, 17, 33, 100):
        key, nonce, iv, data = rng.bytes(16), rng.bytes(4), rng.bytes(8), rng.bytes(length)
        assert aes_ctr_transform(key, nonce, iv, data) == ctr_oracle(key, nonce, iv, data)


@pytest.mark.parametrize('suite', list(CipherSuiteId))
def test_tunnel_roundtrip(suite):
    rng = np.random.default_rng(42)
    impl = get_suite(suite)
    for i in range(1000):
        sa = make_sa(suite, seed=i % 17)
        inner_ip = inner_packet(rng)
        outer = tunnel_encapsulate(sa, i + 1, inner_ip, ETH)
        assert outer.esp.seq == i + 1
        assert (len(outer.body) - impl.iv_len - impl.icv_len) % ESP_ALIGNMENT == 0
        received = parse_packet(serialize_packet(outer))
        inner = tunnel_decapsulate(sa, received)
        assert serialize_ipv4(inner.ipv4, None, inner.body) == inner_ip


def test_aes_iv_is_the_sequence_number():
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5)
    outer = tunnel_encapsulate(sa, 0x0102, b'x' * 20, ETH)
    assert outer.body[:8] == bytes.fromhex('0000000000000102')


def test_aes_ciphertext_hides_the_inner_packet():
    rng = np.random.default_rng(1)
    inner_ip = inner_packet(rng)
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5)
    null = make_sa(CipherSuiteId.NULL)
    assert inner_ip in tunnel_encapsulate(null, 1, inner_ip, ETH).body
    assert inner_ip not in tunnel_encapsulate(sa, 1, inner_ip, ETH).body


def test_bit_flips_fail_the_integrity_check():
    rng = np.random.default_rng(2026)
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5)
    suite = get_suite(sa.suite)
    for trial in range(10_000):
        outer = tunnel_encapsulate(sa, trial + 1, inner_packet(rng), ETH)
        if trial % 10 == 0:
            # the sequence number is covered by the ICV as well
            bit = int(rng.integers(0, 31))
            tampered = replace(outer, esp=replace(outer.esp, seq=outer.esp.seq ^ (1 << bit)))
        else:
            body = bytearray(outer.body)
            pos = int(rng.integers(0, len(body) * 8))
            body[pos // 8] ^= 1 << (pos % 8)
            tampered = replace(outer, body=bytes(body))
        with pytest.raises(IcvMismatch):
            tunnel_decapsulate(sa, tampered)
    assert suite.icv_len == 12


def test_short_esp_payload_is_rejected():
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5)
    outer = tunnel_encapsulate(sa, 1, b'y' * 20, ETH)
    with pytest.raises(IcvMismatch):
        tunnel_decapsulate(sa, replace(outer, body=outer.body[:10]))


def test_wrong_key_fails_the_integrity_check():
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5, seed=1)
    other = replace(sa, keys=generate_key_material(sa.suite, seeded_random(2)))
    outer = tunnel_encapsulate(sa, 1, b'z' * 40, ETH)
    with pytest.raises(IcvMismatch):
        tunnel_decapsulate(other, outer)


def test_sequence_numbers():
    sa = make_sa(CipherSuiteId.NULL)
    assert esp_header_for(sa, MAX_SEQ).seq == MAX_SEQ
    with pytest.raises(SequenceOverflow):
        esp_header_for(sa, MAX_SEQ + 1)
    with pytest.raises(ValueError):
        esp_header_for(sa, 0)


def test_sa_validation():
    with pytest.raises(ValueError):
        SecurityAssociation(spi=255, tunnel_src='192.0.2.1', tunnel_dst='192.0.2.2', suite='NULL')
    with pytest.raises(ValueError):
        make_sa(CipherSuiteId.NULL, soft_limit=10, hard_limit=10)
    with pytest.raises(MissingKeyMaterial):
        SecurityAssociation(spi=300, tunnel_src='192.0.2.1', tunnel_dst='192.0.2.2',
                            suite='AES_CTR_HMAC_MD5', keys=SaKeyMaterial(aes_key=bytes(16)))


def test_action_params_roundtrip_and_redaction():
    sa = make_sa(CipherSuiteId.AES_CTR_HMAC_MD5, register_index=7, soft_limit=10, hard_limit=20)
    assert SecurityAssociation.from_action_params(sa.suite, sa.to_action_params()) == sa
    redacted = sa.redacted()
    assert redacted['register_index'] == 7
    assert not {'aes_key', 'ctr_nonce', 'hmac_key'} & set(redacted)
    assert 'aes_key' not in repr(sa.keys)


def test_seeded_key_material_is_deterministic():
    a = generate_key_material('AES_CTR_HMAC_MD5', seeded_random(9))
    b = generate_key_material('AES_CTR_HMAC_MD5', seeded_random(9))
    c = generate_key_material('AES_CTR_HMAC_MD5', seeded_random(10))
    assert a == b != c
    assert a.is_complete
    assert generate_key_material('NULL', seeded_random(None)).is_empty
