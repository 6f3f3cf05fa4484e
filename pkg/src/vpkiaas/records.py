"""Asynchronous issuance record store.

Services enqueue records and return immediately; a single drainer thread
writes them to an append-only file in FIFO order. The pseudonym-serial
index is updated at enqueue time, so resolution works before the durable
write lands.

File layout: the magic ``VPKR1`` followed by frames, each a 4-byte
big-endian length and a canonical encoding of ``[kind, *fields]``.
"""

from __future__ import annotations

import logging
import os
import struct
import threading
import time
from collections import deque
from dataclasses import dataclass
from pathlib import Path
from typing import Iterator

from .core.encoding import canonical_decode, canonical_encode, field_int, int_field
from .errors import Backpressure, EncodingError, NotFound

logger = logging.getLogger(__name__)

MAGIC = b"VPKR1"
_FRAME = struct.Struct(">I")


@dataclass(frozen=True)
class TicketRecord:
    sn_tkt: bytes
    sn_ltc: bytes  # serial of the authenticating credential (LTC or f-tkt)
    ik_tkt: bytes
    rnd_ik_tkt: bytes
    t_s: int
    t_e: int
    exp_tkt: int
    issued_at: int
    flagged: bool = False

    kind = b"T"

    def fields(self) -> list[bytes]:
        return [
            self.sn_tkt,
            self.sn_ltc,
            self.ik_tkt,
            self.rnd_ik_tkt,
            int_field(self.t_s),
            int_field(self.t_e),
            int_field(self.exp_tkt),
            int_field(self.issued_at),
            b"\x01" if self.flagged else b"\x00",
        ]

    @classmethod
    def from_fields(cls, f: list[bytes]) -> "TicketRecord":
        return cls(
            f[0], f[1], f[2], f[3],
            field_int(f[4]), field_int(f[5]), field_int(f[6]), field_int(f[7]),
            f[8] == b"\x01",
        )


@dataclass(frozen=True)
class BatchRecord:
    sn_tkt: bytes
    rnd_v: bytes
    serials: tuple[bytes, ...]
    ticket: bytes  # encoded ticket as presented
    issued_at: int
    flagged: bool = False

    kind = b"B"

    def fields(self) -> list[bytes]:
        return [
            self.sn_tkt,
            self.rnd_v,
            canonical_encode(self.serials),
            self.ticket,
            int_field(self.issued_at),
            b"\x01" if self.flagged else b"\x00",
        ]

    @classmethod
    def from_fields(cls, f: list[bytes]) -> "BatchRecord":
        return cls(
            f[0], f[1], tuple(canonical_decode(f[2])), f[3],
            field_int(f[4]), f[5] == b"\x01",
        )


@dataclass(frozen=True)
class LtcRecord:
    serial: bytes
    public_key: bytes
    certificate: bytes
    issued_at: int

    kind = b"L"

    def fields(self) -> list[bytes]:
        return [self.serial, self.public_key, self.certificate, int_field(self.issued_at)]

    @classmethod
    def from_fields(cls, f: list[bytes]) -> "LtcRecord":
        return cls(f[0], f[1], f[2], field_int(f[3]))


_KINDS = {cls.kind: cls for cls in (TicketRecord, BatchRecord, LtcRecord)}


def _key(rec) -> tuple[bytes, bytes]:
    if isinstance(rec, LtcRecord):
        return rec.kind, rec.serial
    return rec.kind, rec.sn_tkt


def encode_record(rec) -> bytes:
    body = canonical_encode([rec.kind] + rec.fields())
    return _FRAME.pack(len(body)) + body


def iter_records(path: str | os.PathLike) -> Iterator[object]:
    """Yield records from a file; a truncated trailing frame is ignored."""
    data = Path(path).read_bytes()
    if not data:
        return
    if not data.startswith(MAGIC):
        raise EncodingError(f"{path}: not a record file")
    pos = len(MAGIC)
    while pos < len(data):
        if pos + 4 > len(data):
            logger.warning("%s: truncated frame header at %d", path, pos)
            return
        (n,) = _FRAME.unpack_from(data, pos)
        if pos + 4 + n > len(data):
            logger.warning("%s: truncated frame at %d", path, pos)
            return
        f = canonical_decode(data[pos + 4 : pos + 4 + n])
        pos += 4 + n
        yield _KINDS[f[0]].from_fields(f[1:])


class RecordStore:
    """FIFO write-behind store with an in-memory index.

    ``write_delay`` adds an artificial latency to every durable write (one
    write per drained chunk), to demonstrate that issuance never waits on it.
    """

    def __init__(
        self,
        path: str | os.PathLike | None = None,
        write_delay: float = 0.0,
        max_queue: int = 100_000,
        chunk: int = 256,
        fsync: bool = False,
    ):
        self.path = Path(path) if path is not None else None
        self.write_delay = write_delay
        self.max_queue = max_queue
        self.chunk = chunk
        self.fsync = fsync
        self.rejected = 0
        self.written = 0

        self._tickets: dict[bytes, TicketRecord] = {}
        self._batches: dict[bytes, BatchRecord] = {}
        self._ltcs: dict[bytes, LtcRecord] = {}
        self._serials: dict[bytes, tuple[bytes, int]] = {}
        self._durable: set[tuple[bytes, bytes]] = set()
        self._memory_rows: list[object] = []

        self._queue: deque = deque()
        self._busy = 0
        self._cv = threading.Condition()
        self._closed = False
        self._fh = None

        if self.path is not None and self.path.exists():
            for rec in iter_records(self.path):
                self._index(rec)
                self._durable.add(_key(rec))
        self._thread = threading.Thread(target=self._drain, name="record-drainer", daemon=True)
        self._thread.start()

    # --- enqueue side -------------------------------------------------

    def _index(self, rec) -> None:
        if isinstance(rec, TicketRecord):
            self._tickets.setdefault(rec.sn_tkt, rec)
        elif isinstance(rec, BatchRecord):
            if rec.sn_tkt not in self._batches:
                self._batches[rec.sn_tkt] = rec
                for i, sn in enumerate(rec.serials, 1):
                    self._serials.setdefault(sn, (rec.sn_tkt, i))
        elif isinstance(rec, LtcRecord):
            self._ltcs.setdefault(rec.serial, rec)

    def _enqueue(self, rec) -> None:
        with self._cv:
            if self._closed:
                raise RuntimeError("record store closed")
            if len(self._queue) >= self.max_queue:
                raise Backpressure("record queue full")
            self._index(rec)
            self._queue.append(rec)
            self._cv.notify_all()

    def append_ticket_record(self, rec: TicketRecord) -> None:
        self._enqueue(rec)

    def append_batch_record(self, rec: BatchRecord) -> None:
        if not rec.serials:
            raise ValueError("batch record needs at least one serial")
        self._enqueue(rec)

    def append_ltc_record(self, rec: LtcRecord) -> None:
        self._enqueue(rec)

    # --- drain side ---------------------------------------------------

    def _open(self):
        if self._fh is None and self.path is not None:
            self.path.parent.mkdir(parents=True, exist_ok=True)
            fresh = not self.path.exists() or self.path.stat().st_size == 0
            self._fh = open(self.path, "ab")
            if fresh:
                self._fh.write(MAGIC)
        return self._fh

    def _drain(self) -> None:
        while True:
            with self._cv:
                while not self._queue and not self._closed:
                    self._cv.wait()
                if not self._queue and self._closed:
                    return
                batch = [self._queue.popleft() for _ in range(min(self.chunk, len(self._queue)))]
                self._busy = len(batch)
            try:
                self._write(batch)
            except Exception:  # noqa: BLE001
                logger.exception("durable write failed; %d records lost", len(batch))
            finally:
                with self._cv:
                    self._busy = 0
                    self._cv.notify_all()

    def _write(self, batch: list) -> None:
        if self.write_delay:
            time.sleep(self.write_delay)
        out = []
        for rec in batch:
            key = _key(rec)
            if key in self._durable:
                self.rejected += 1
                logger.warning("duplicate %s record %s rejected", key[0].decode(), key[1].hex())
                continue
            self._durable.add(key)
            out.append(rec)
        fh = self._open()
        if fh is not None:
            fh.write(b"".join(encode_record(r) for r in out))
            fh.flush()
            if self.fsync:
                os.fsync(fh.fileno())
        else:
            self._memory_rows.extend(out)
        self.written += len(out)

    def flush(self, timeout: float | None = None) -> bool:
        """Block until every enqueued record has been written."""
        deadline = None if timeout is None else time.monotonic() + timeout
        with self._cv:
            while self._queue or self._busy:
                remaining = None if deadline is None else deadline - time.monotonic()
                if remaining is not None and remaining <= 0:
                    return False
                self._cv.wait(remaining)
        return True

    def close(self) -> None:
        self.flush()
        with self._cv:
            self._closed = True
            self._cv.notify_all()
        self._thread.join(timeout=5)
        if self._fh is not None:
            self._fh.close()
            self._fh = None

    # --- queries ------------------------------------------------------

    @property
    def pending(self) -> int:
        return len(self._queue) + self._busy

    def lookup_by_pseudonym_serial(self, sn: bytes) -> tuple[BatchRecord, int]:
        hit = self._serials.get(bytes(sn))
        if hit is None:
            raise NotFound("unknown pseudonym serial")
        sn_tkt, i = hit
        return self._batches[sn_tkt], i

    def ticket_record(self, sn_tkt: bytes) -> TicketRecord:
        try:
            return self._tickets[bytes(sn_tkt)]
        except KeyError:
            raise NotFound("unknown ticket") from None

    def batch_record(self, sn_tkt: bytes) -> BatchRecord:
        try:
            return self._batches[bytes(sn_tkt)]
        except KeyError:
            raise NotFound("unknown batch") from None

    def ltc_records(self) -> list[LtcRecord]:
        return list(self._ltcs.values())

    def rows(self) -> list[object]:
        """Durably written records in write order."""
        if self.path is not None:
            if self._fh is not None:
                self._fh.flush()
            return list(iter_records(self.path)) if self.path.exists() else []
        return list(self._memory_rows)

    def __len__(self) -> int:
        return len(self._tickets) + len(self._batches) + len(self._ltcs)


def purge(path: str | os.PathLike, before: int) -> tuple[int, int]:
    """Rewrite a record file without ticket/batch records issued before ``before``.

    Returns (kept, dropped). LTC registrations are always kept.
    """
    path = Path(path)
    kept, dropped = [], 0
    for rec in iter_records(path):
        if not isinstance(rec, LtcRecord) and rec.issued_at < before:
            dropped += 1
        else:
            kept.append(rec)
    tmp = path.with_suffix(path.suffix + ".tmp")
    with open(tmp, "wb") as fh:
        fh.write(MAGIC)
        for rec in kept:
            fh.write(encode_record(rec))
        fh.flush()
        os.fsync(fh.fileno())
    os.replace(tmp, path)
    return len(kept), dropped
