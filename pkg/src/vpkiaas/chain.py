"""Pseudonym slot arithmetic and batch chain derivation.

The chain kernel comes from the compiled ``_chain_ext`` module when it was
built, otherwise from ``_chain_py``. Set ``VPKI_PURE_PYTHON=1`` to force the
fallback. ``BACKEND`` names the kernel in use.
"""

from __future__ import annotations

import os
from dataclasses import dataclass
from typing import Sequence

from . import _chain_py
from .core.types import Pseudonym

if os.environ.get("VPKI_PURE_PYTHON"):
    _ext = None
else:
    try:
        from . import _chain_ext as _ext
    except ImportError:
        _ext = None

if _ext is not None:
    derive_chain = _ext.derive_chain
    chain_serials = _ext.chain_serials
    BACKEND = "cython"
else:
    derive_chain = _chain_py.derive_chain
    chain_serials = _chain_py.chain_serials
    BACKEND = "python"

SECONDS_PER_DAY = 86_400


def align(t: int, tau: int, epoch: int = 0) -> int:
    """Smallest ``epoch + k*tau`` that is >= ``t``."""
    if tau <= 0:
        raise ValueError("tau must be positive")
    return epoch + -((epoch - t) // tau) * tau


def slots(t_s: int, tau: int, n: int, epoch: int = 0) -> list[tuple[int, int]]:
    start = align(t_s, tau, epoch)
    return [(start + i * tau, start + (i + 1) * tau) for i in range(n)]


def lifetime_for_daily_count(per_day: int) -> float:
    """Pseudonym lifetime giving ``per_day`` non-overlapping pseudonyms a day."""
    return SECONDS_PER_DAY / per_day


def max_slots(t_s: int, t_e: int, tau: int, epoch: int = 0) -> int:
    start = align(t_s, tau, epoch)
    return max(0, (t_e - start) // tau)


@dataclass(frozen=True)
class ChainCheck:
    ok: bool
    reason: str = ""
    index: int = 0


def verify_batch(
    pseudonyms: Sequence[Pseudonym],
    rnd_v: bytes,
    ik_tkt: bytes,
    tau: int,
    epoch: int = 0,
    expected_start: int | None = None,
) -> ChainCheck:
    """Recompute slot layout, identifiable keys and serials of a batch."""
    if not pseudonyms:
        return ChainCheck(False, "empty")
    start = pseudonyms[0].t_s
    if expected_start is not None and start != expected_start:
        return ChainCheck(False, "start", 1)
    for i, p in enumerate(pseudonyms, 1):
        if p.t_e - p.t_s != tau:
            return ChainCheck(False, "lifetime", i)
        if (p.t_s - epoch) % tau:
            return ChainCheck(False, "alignment", i)
        if p.t_s != start + (i - 1) * tau:
            return ChainCheck(False, "overlap", i)
    _, iks, sns = derive_chain(
        ik_tkt, [p.public_key for p in pseudonyms], start, tau, rnd_v
    )
    for i, (p, ik, sn) in enumerate(zip(pseudonyms, iks, sns), 1):
        if p.ik_p != ik:
            return ChainCheck(False, "ik", i)
        if p.serial != sn:
            return ChainCheck(False, "serial", i)
    return ChainCheck(True)
