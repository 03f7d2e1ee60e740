"""Keyed tags for DHCP<->Central traffic and certificate-backed signatures.

Tags are ``SHA-256(key || message)``.  Signatures are Ed25519 (64 bytes,
deterministic).  A certificate binds a subject name to a public key and is
signed by a local trust root; its serialized form is::

    subject_len(2) | subject | key_len(2) | key | issuer_signature(64)

all lengths big-endian.
"""

from __future__ import annotations

import functools
import hashlib
import hmac
import os
from dataclasses import dataclass

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives.asymmetric.ed25519 import (
    Ed25519PrivateKey,
    Ed25519PublicKey,
)
from cryptography.hazmat.primitives.serialization import Encoding, PublicFormat

KEY_LEN = 32
TAG_LEN = 32
SIGNATURE_LEN = 64


@dataclass(frozen=True)
class SharedKey:
    key_bytes: bytes

    def __post_init__(self):
        if len(self.key_bytes) != KEY_LEN:
            raise ValueError(f"shared key must be {KEY_LEN} bytes")

    def __repr__(self) -> str:
        return "SharedKey(<redacted>)"

    @classmethod
    def generate(cls) -> SharedKey:
        return cls(os.urandom(KEY_LEN))

    @classmethod
    def derive(cls, label: str) -> SharedKey:
        return cls(hashlib.sha256(b"shared-key:" + label.encode()).digest())


def tag_message(key: SharedKey, msg: bytes) -> bytes:
    return hashlib.sha256(key.key_bytes + msg).digest()


def verify_tag(key: SharedKey, msg: bytes, tag: bytes) -> bool:
    return hmac.compare_digest(tag_message(key, msg), bytes(tag))


class KeyPair:
    """Ed25519 signing key with its serialized public half."""

    def __init__(self, private: Ed25519PrivateKey):
        self._private = private
        self.public = private.public_key().public_bytes(Encoding.Raw, PublicFormat.Raw)

    @classmethod
    def generate(cls) -> KeyPair:
        return cls(Ed25519PrivateKey.generate())

    @classmethod
    def from_seed(cls, seed: bytes) -> KeyPair:
        return cls(Ed25519PrivateKey.from_private_bytes(hashlib.sha256(seed).digest()))

    def __repr__(self) -> str:
        return f"KeyPair(public={self.public.hex()[:16]}...)"


def sign(kp: KeyPair, msg: bytes) -> bytes:
    return _sign_cached(kp, bytes(msg))


@functools.lru_cache(maxsize=1024)
def _sign_cached(kp: KeyPair, msg: bytes) -> bytes:
    # Ed25519 signing is deterministic, so memoizing is observationally pure
    return kp._private.sign(msg)


@dataclass(frozen=True)
class TrustRoot:
    public_key: bytes


@dataclass(frozen=True)
class Certificate:
    subject: str
    subject_public_key: bytes
    issuer_signature: bytes

    def tbs(self) -> bytes:
        """The to-be-signed portion (everything but the issuer signature)."""
        subject = self.subject.encode()
        return (
            len(subject).to_bytes(2, "big")
            + subject
            + len(self.subject_public_key).to_bytes(2, "big")
            + self.subject_public_key
        )

    def to_bytes(self) -> bytes:
        return self.tbs() + self.issuer_signature

    @classmethod
    def from_bytes(cls, data: bytes) -> Certificate:
        data = bytes(data)
        try:
            n = int.from_bytes(data[0:2], "big")
            subject = data[2 : 2 + n].decode()
            pos = 2 + n
            k = int.from_bytes(data[pos : pos + 2], "big")
            key = data[pos + 2 : pos + 2 + k]
            sig = data[pos + 2 + k :]
        except UnicodeDecodeError as exc:
            raise ValueError("certificate subject is not UTF-8") from exc
        if len(data) < 4 or len(key) != k or len(sig) != SIGNATURE_LEN:
            raise ValueError("malformed certificate")
        return cls(subject, key, sig)


def issue_certificate(root: KeyPair, subject: str, subject_public_key: bytes) -> Certificate:
    unsigned = Certificate(subject, bytes(subject_public_key), b"")
    cert = Certificate(subject, bytes(subject_public_key), sign(root, unsigned.tbs()))
    if len(cert.to_bytes()) > 0xFFFF:
        raise ValueError("certificate too large for the cert_len field")
    return cert


def trust_root_of(root: KeyPair) -> TrustRoot:
    return TrustRoot(root.public)


def _ed25519_ok(public: bytes, msg: bytes, sig: bytes) -> bool:
    if len(sig) != SIGNATURE_LEN:
        return False
    try:
        Ed25519PublicKey.from_public_bytes(public).verify(sig, msg)
    except (InvalidSignature, ValueError):
        return False
    return True


@functools.lru_cache(maxsize=4096)
def _verify_cached(root_key: bytes, cert: Certificate, msg: bytes, sig: bytes) -> bool:
    return _ed25519_ok(root_key, cert.tbs(), cert.issuer_signature) and _ed25519_ok(
        cert.subject_public_key, msg, sig
    )


def verify(cert: Certificate | bytes, msg: bytes, sig: bytes, root: TrustRoot) -> bool:
    """True iff ``cert`` chains to ``root`` and ``sig`` is valid for ``msg`` under it.

    Accepts a serialized certificate; malformed bytes verify as False.
    Results are memoized (the check is a pure function of its inputs).
    """
    if not isinstance(cert, Certificate):
        try:
            cert = Certificate.from_bytes(cert)
        except ValueError:
            return False
    return _verify_cached(root.public_key, cert, bytes(msg), bytes(sig))


@dataclass(frozen=True)
class AuthMaterial:
    """Everything a scenario distributes at setup."""

    shared_key: SharedKey
    central_keys: KeyPair
    central_cert: Certificate
    trust_root: TrustRoot

    @classmethod
    def derive(cls, seed: int | str) -> AuthMaterial:
        root = KeyPair.from_seed(f"root:{seed}".encode())
        central = KeyPair.from_seed(f"central:{seed}".encode())
        return cls(
            shared_key=SharedKey.derive(f"dhcp-central:{seed}"),
            central_keys=central,
            central_cert=issue_certificate(root, "central-server", central.public),
            trust_root=trust_root_of(root),
        )
