"""Canonical byte encoding and hashing.

Every hashed or signed structure is built from an ordered list of byte
fields, each written as a 4-byte big-endian length followed by the bytes.
Length prefixing makes the encoding injective, so ``[b"A", b"B"]`` and
``[b"AB"]`` can never collide.
"""

from __future__ import annotations

import hashlib
import struct
from typing import Iterable, Sequence

from ..errors import EncodingError

DIGEST_SIZE = 32
MAX_FIELD = 2**32 - 1

_LEN = struct.Struct(">I")
_I64 = struct.Struct(">q")


def canonical_encode(fields: Iterable[bytes]) -> bytes:
    parts = []
    for f in fields:
        f = bytes(f)
        if len(f) > MAX_FIELD:
            raise EncodingError(f"field of {len(f)} bytes exceeds 2^32-1")
        parts.append(_LEN.pack(len(f)))
        parts.append(f)
    return b"".join(parts)


def canonical_decode(data: bytes) -> list[bytes]:
    """Inverse of :func:`canonical_encode`; raises on truncated input."""
    out = []
    pos, end = 0, len(data)
    while pos < end:
        if pos + 4 > end:
            raise EncodingError("truncated length prefix")
        (n,) = _LEN.unpack_from(data, pos)
        pos += 4
        if pos + n > end:
            raise EncodingError("truncated field")
        out.append(bytes(data[pos : pos + n]))
        pos += n
    return out


def int_field(value: int) -> bytes:
    """Signed 64-bit big-endian, used for every timestamp and counter."""
    try:
        return _I64.pack(value)
    except struct.error as exc:
        raise EncodingError(f"integer out of range: {value}") from exc


def field_int(data: bytes) -> int:
    if len(data) != 8:
        raise EncodingError("integer field must be 8 bytes")
    return _I64.unpack(data)[0]


def str_field(value: str) -> bytes:
    return value.encode("utf-8")


def hash(data: bytes) -> bytes:  # noqa: A001 - mirrors the protocol's H()
    return hashlib.sha256(data).digest()


def hash_fields(*fields: bytes) -> bytes:
    """H(f1 || f2 || ...) over the canonical encoding.

    This is the only place issuance code turns structured inputs into a
    digest; service modules must not call hashlib directly.
    """
    return hashlib.sha256(canonical_encode(fields)).digest()


def iterated_hash(seed: bytes, i: int) -> bytes:
    """H applied ``i`` times: H^1(s) = H(s), H^i(s) = H(H^{i-1}(s))."""
    if i < 1:
        raise EncodingError("iterated_hash needs i >= 1")
    d = seed
    for _ in range(i):
        d = hashlib.sha256(d).digest()
    return d


def check_digest(d: bytes, name: str = "digest") -> bytes:
    if len(d) != DIGEST_SIZE:
        raise EncodingError(f"{name} must be {DIGEST_SIZE} bytes, got {len(d)}")
    return bytes(d)


def encode_list(items: Sequence[bytes]) -> bytes:
    """Nested list as a single field."""
    return canonical_encode(items)
