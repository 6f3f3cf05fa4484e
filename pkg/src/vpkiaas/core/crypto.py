"""ECDSA P-256 keys, signatures and randomness."""

from __future__ import annotations

import functools
import os
import secrets
from dataclasses import dataclass, field

from cryptography.exceptions import InvalidSignature
from cryptography.hazmat.primitives import hashes, serialization
from cryptography.hazmat.primitives.asymmetric import ec

SIG_ALG = "ecdsa-p256-sha256"
HASH_ALG = "sha256"
RND_SIZE = 32
SERIAL_SIZE = 16

_CURVE = ec.SECP256R1()
_ECDSA = ec.ECDSA(hashes.SHA256())


@dataclass(frozen=True)
class KeyPair:
    private: ec.EllipticCurvePrivateKey = field(repr=False)
    public: bytes  # uncompressed SEC1 point, 65 bytes

    @classmethod
    def from_private(cls, private: ec.EllipticCurvePrivateKey) -> "KeyPair":
        pub = private.public_key().public_bytes(
            serialization.Encoding.X962, serialization.PublicFormat.UncompressedPoint
        )
        return cls(private, pub)

    def private_pem(self) -> bytes:
        return self.private.private_bytes(
            serialization.Encoding.PEM,
            serialization.PrivateFormat.PKCS8,
            serialization.NoEncryption(),
        )

    @classmethod
    def from_pem(cls, pem: bytes) -> "KeyPair":
        key = serialization.load_pem_private_key(pem, password=None)
        if not isinstance(key, ec.EllipticCurvePrivateKey):
            raise ValueError("not an EC private key")
        return cls.from_private(key)


def keygen() -> KeyPair:
    return KeyPair.from_private(ec.generate_private_key(_CURVE))


def sign(private: ec.EllipticCurvePrivateKey, msg: bytes) -> bytes:
    return private.sign(msg, _ECDSA)


@functools.lru_cache(maxsize=4096)
def _load_public(public: bytes) -> ec.EllipticCurvePublicKey:
    return ec.EllipticCurvePublicKey.from_encoded_point(_CURVE, public)


def valid_public_key(public: bytes) -> bool:
    try:
        _load_public(bytes(public))
    except (ValueError, TypeError):
        return False
    return True


def verify(public: bytes, msg: bytes, signature: bytes) -> bool:
    """Never raises: malformed keys or signatures simply fail."""
    try:
        key = _load_public(bytes(public))
        key.verify(bytes(signature), bytes(msg), _ECDSA)
    except (InvalidSignature, ValueError, TypeError):
        return False
    return True


def gen_rnd() -> bytes:
    return secrets.token_bytes(RND_SIZE)


def gen_serial() -> bytes:
    return os.urandom(SERIAL_SIZE)


def gen_id() -> int:
    """64-bit request/response identifier or nonce, kept below 2^63."""
    return secrets.randbits(63)
