"""Pure-Python pseudonym chain kernel (fallback for ``_chain_ext``).

For slot i (1-based) with hash h_i = H^i(rnd_v):

    ik_i = H(enc(ik_tkt, K_i, t_s_i, t_e_i, h_i))
    sn_1 = H(enc(ik_1, h_1))
    sn_i = H(enc(sn_{i-1}, h_i))

where ``enc`` is the canonical length-prefixed encoding and timestamps are
8-byte signed big-endian integers.
"""

from __future__ import annotations

import hashlib
from typing import Sequence

from .core.encoding import canonical_encode, int_field

_sha256 = hashlib.sha256


def derive_chain(
    ik_tkt: bytes,
    public_keys: Sequence[bytes],
    slot_start: int,
    tau: int,
    rnd_v: bytes,
) -> tuple[list[bytes], list[bytes], list[bytes]]:
    """Return (hashes, iks, serials), each of length ``len(public_keys)``."""
    hashes, iks, serials = [], [], []
    h = rnd_v
    prev = None
    t = slot_start
    for k in public_keys:
        h = _sha256(h).digest()
        ik = _sha256(
            canonical_encode([ik_tkt, k, int_field(t), int_field(t + tau), h])
        ).digest()
        link = ik if prev is None else prev
        sn = _sha256(canonical_encode([link, h])).digest()
        hashes.append(h)
        iks.append(ik)
        serials.append(sn)
        prev = sn
        t += tau
    return hashes, iks, serials


def chain_serials(first_serial: bytes, rnd_v: bytes, n: int) -> list[bytes]:
    """All serials of a batch from (SN^1, rnd_v) alone."""
    out = [first_serial]
    h = _sha256(rnd_v).digest()
    for _ in range(1, n):
        h = _sha256(h).digest()
        out.append(_sha256(canonical_encode([out[-1], h])).digest())
    return out
