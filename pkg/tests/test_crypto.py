import hashlib
import random

import pytest

from centralarp.crypto import (
    AuthMaterial,
    Certificate,
    KeyPair,
    SharedKey,
    issue_certificate,
    sign,
    tag_message,
    trust_root_of,
    verify,
    verify_tag,
)
from oracles import sha256

ZERO_KEY = SharedKey(bytes(32))
# recorded from the pure-Python oracle before the implementation was run
GOLDEN_IP_SEND_TAG = "1da865a8f5de2f98f7bf5d9d2ce4f37448282adef0b3e90415fafc8a6d41db9c"


def test_sha256_oracle_agrees_with_hashlib():
    rng = random.Random(7)
    for n in (0, 1, 55, 56, 63, 64, 65, 127, 128, 1000):
        data = rng.randbytes(n)
        assert sha256(data) == hashlib.sha256(data).digest()
    assert sha256(b"abc").hex().startswith("ba7816bf8f01cfea")


def test_golden_tag():
    assert sha256(bytes(32) + b"IP_send").hex() == GOLDEN_IP_SEND_TAG
    assert tag_message(ZERO_KEY, b"IP_send").hex() == GOLDEN_IP_SEND_TAG


def test_tag_matches_oracle_on_random_inputs():
    rng = random.Random(3)
    for _ in range(50):
        key = SharedKey(rng.randbytes(32))
        msg = rng.randbytes(rng.randint(0, 200))
        assert tag_message(key, msg) == sha256(key.key_bytes + msg)


def test_distinct_keys_give_distinct_tags():
    rng = random.Random(11)
    msg = b"IP_send 10.0.0.5"
    tags = {tag_message(SharedKey(rng.randbytes(32)), msg) for _ in range(1000)}
    assert len(tags) == 1000


def test_verify_tag_basics():
    tag = tag_message(ZERO_KEY, b"m")
    assert verify_tag(ZERO_KEY, b"m", tag)
    assert not verify_tag(ZERO_KEY, b"m\x00", tag)
    assert not verify_tag(SharedKey.derive("other"), b"m", tag)


def test_every_tag_bit_flip_rejected():
    tag = tag_message(ZERO_KEY, b"IP_send")
    for bit in range(256):
        flipped = bytearray(tag)
        flipped[bit // 8] ^= 1 << (bit % 8)
        assert not verify_tag(ZERO_KEY, b"IP_send", bytes(flipped))


def test_shared_key_length_and_repr():
    with pytest.raises(ValueError):
        SharedKey(b"short")
    assert "redacted" in repr(SharedKey.generate())


@pytest.fixture(scope="module")
def pki():
    root = KeyPair.from_seed(b"root")
    central = KeyPair.from_seed(b"central")
    cert = issue_certificate(root, "central-server", central.public)
    return root, central, cert


def test_sign_verify(pki):
    root, central, cert = pki
    sig = sign(central, b"hello")
    assert len(sig) == 64
    assert verify(cert, b"hello", sig, trust_root_of(root))
    assert verify(cert.to_bytes(), b"hello", sig, trust_root_of(root))


def test_message_substitution_rejected(pki):
    root, central, cert = pki
    rng = random.Random(5)
    for _ in range(200):
        m = rng.randbytes(rng.randint(1, 64))
        m2 = bytearray(m)
        m2[rng.randrange(len(m))] ^= 1 << rng.randrange(8)
        assert not verify(cert, bytes(m2), sign(central, m), trust_root_of(root))


def test_wrong_trust_root_rejected(pki):
    _, central, _ = pki
    other = KeyPair.from_seed(b"other-root")
    rogue = issue_certificate(other, "central-server", central.public)
    sig = sign(central, b"m")
    assert verify(rogue, b"m", sig, trust_root_of(other))
    assert not verify(rogue, b"m", sig, trust_root_of(pki[0]))


def test_self_signed_cert_rejected(pki):
    root = pki[0]
    mallory = KeyPair.from_seed(b"mallory")
    cert = issue_certificate(mallory, "central-server", mallory.public)
    assert not verify(cert, b"m", sign(mallory, b"m"), trust_root_of(root))


def test_cert_byte_flip_sweep(pki):
    root, central, cert = pki
    sig = sign(central, b"m")
    raw = cert.to_bytes()
    for pos in range(len(raw)):
        tampered = bytearray(raw)
        tampered[pos] ^= 0x01
        assert not verify(bytes(tampered), b"m", sig, trust_root_of(root)), pos


def test_cert_serialization_round_trip(pki):
    cert = pki[2]
    raw = cert.to_bytes()
    assert Certificate.from_bytes(raw) == cert
    assert int.from_bytes(raw[:2], "big") == len("central-server")
    with pytest.raises(ValueError):
        Certificate.from_bytes(raw[:-1])


def test_issuance_is_deterministic(pki):
    root, central, cert = pki
    assert issue_certificate(root, "central-server", central.public) == cert
    assert sign(central, b"x") == sign(central, b"x")


def test_malformed_signature_is_false(pki):
    root, _, cert = pki
    assert not verify(cert, b"m", b"", trust_root_of(root))
    assert not verify(b"\x00", b"m", bytes(64), trust_root_of(root))


def test_auth_material_derivation_is_stable():
    a, b = AuthMaterial.derive(1), AuthMaterial.derive(1)
    assert a.shared_key == b.shared_key
    assert a.central_cert == b.central_cert
    assert AuthMaterial.derive(2).trust_root != a.trust_root
