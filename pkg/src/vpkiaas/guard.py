"""Atomic check-and-set store guarding ticket intervals and ticket use.

Two logical namespaces share one store: ticket intervals keyed by the LTC
serial (value: expiry of the current ticket) and single-use flags keyed by
the ticket serial. Each operation is a query-check-write triple executed
under one lock, which gives a total order over all callers.

``GuardServer``/``RemoteGuardStore`` expose the same operations over a
line-based TCP protocol so that separate service processes can share one
store::

    CLAIMI <key> <start> <exp>   -> GRANTED [prev] | DENIED
    REVI <key> [prev]            -> GRANTED
    CLAIMO <key>                 -> GRANTED | DENIED
    REVO <key>                   -> GRANTED

Keys are hex encoded. Errors come back as ``ERR <message>``.
"""

from __future__ import annotations

import logging
import socket
import socketserver
import threading
from dataclasses import dataclass

from .errors import GuardUnavailable

logger = logging.getLogger(__name__)

INTERVAL_NS = b"i:"
ONCE_NS = b"o:"


@dataclass(frozen=True)
class Claim:
    granted: bool
    prev: int | None = None

    def __bool__(self) -> bool:
        return self.granted


class GuardStore:
    """In-memory backend."""

    def __init__(self):
        self._data: dict[bytes, object] = {}
        self._lock = threading.Lock()
        self.available = True

    def _check(self) -> None:
        if not self.available:
            raise GuardUnavailable("guard store unavailable")

    def claim_ticket_interval(self, sn_ltc: bytes, start: int, exp: int) -> Claim:
        if start >= exp:
            raise ValueError("interval start must precede expiry")
        key = INTERVAL_NS + bytes(sn_ltc)
        with self._lock:
            self._check()
            value = self._data.get(key)
            if value is None or value <= start:
                self._data[key] = exp
                return Claim(True, value)
            return Claim(False, value)

    def revert_ticket_interval(self, sn_ltc: bytes, prev: int | None) -> None:
        key = INTERVAL_NS + bytes(sn_ltc)
        with self._lock:
            self._check()
            if prev is None:
                self._data.pop(key, None)
            else:
                self._data[key] = prev

    def claim_ticket_once(self, sn_tkt: bytes) -> Claim:
        key = ONCE_NS + bytes(sn_tkt)
        with self._lock:
            self._check()
            if not self._data.get(key, False):
                self._data[key] = True
                return Claim(True)
            return Claim(False)

    def revert_ticket_once(self, sn_tkt: bytes) -> None:
        key = ONCE_NS + bytes(sn_tkt)
        with self._lock:
            self._check()
            self._data[key] = False

    def interval_value(self, sn_ltc: bytes) -> int | None:
        return self._data.get(INTERVAL_NS + bytes(sn_ltc))

    def once_value(self, sn_tkt: bytes) -> bool | None:
        return self._data.get(ONCE_NS + bytes(sn_tkt))

    def sweep(self, now: int, gamma: int) -> int:
        """Drop interval entries whose expiry is more than 2*gamma in the past."""
        cutoff = now - 2 * gamma
        with self._lock:
            stale = [
                k
                for k, v in self._data.items()
                if k.startswith(INTERVAL_NS) and v is not None and v < cutoff
            ]
            for k in stale:
                del self._data[k]
        return len(stale)

    def snapshot(self) -> dict[bytes, object]:
        with self._lock:
            return dict(self._data)

    def view(self, prefix: bytes) -> "GuardView":
        return GuardView(self, prefix)


class GuardView:
    """A key-prefixed namespace over a store (e.g. a health-check sandbox)."""

    def __init__(self, store, prefix: bytes):
        self.store = store
        self.prefix = bytes(prefix)

    def claim_ticket_interval(self, sn_ltc, start, exp):
        return self.store.claim_ticket_interval(self.prefix + sn_ltc, start, exp)

    def revert_ticket_interval(self, sn_ltc, prev):
        return self.store.revert_ticket_interval(self.prefix + sn_ltc, prev)

    def claim_ticket_once(self, sn_tkt):
        return self.store.claim_ticket_once(self.prefix + sn_tkt)

    def revert_ticket_once(self, sn_tkt):
        return self.store.revert_ticket_once(self.prefix + sn_tkt)

    def view(self, prefix: bytes) -> "GuardView":
        return GuardView(self.store, self.prefix + prefix)


def _execute(store: GuardStore, line: str) -> str:
    parts = line.split()
    if not parts:
        return "ERR empty"
    cmd, args = parts[0].upper(), parts[1:]
    try:
        if cmd == "CLAIMI" and len(args) == 3:
            c = store.claim_ticket_interval(bytes.fromhex(args[0]), int(args[1]), int(args[2]))
            if not c.granted:
                return "DENIED"
            return "GRANTED" if c.prev is None else f"GRANTED {c.prev}"
        if cmd == "REVI" and len(args) in (1, 2):
            prev = int(args[1]) if len(args) == 2 else None
            store.revert_ticket_interval(bytes.fromhex(args[0]), prev)
            return "GRANTED"
        if cmd == "CLAIMO" and len(args) == 1:
            return "GRANTED" if store.claim_ticket_once(bytes.fromhex(args[0])) else "DENIED"
        if cmd == "REVO" and len(args) == 1:
            store.revert_ticket_once(bytes.fromhex(args[0]))
            return "GRANTED"
    except GuardUnavailable:
        return "ERR unavailable"
    except ValueError as exc:
        return f"ERR {exc}"
    return f"ERR bad command {cmd}"


class _Handler(socketserver.StreamRequestHandler):
    def handle(self):
        for raw in self.rfile:
            line = raw.decode("ascii", "replace").strip()
            if not line:
                continue
            reply = _execute(self.server.store, line)
            self.wfile.write(reply.encode("ascii") + b"\n")
            self.wfile.flush()


class GuardServer(socketserver.ThreadingTCPServer):
    daemon_threads = True
    allow_reuse_address = True

    def __init__(self, address=("127.0.0.1", 0), store: GuardStore | None = None):
        self.store = store or GuardStore()
        super().__init__(address, _Handler)

    @property
    def port(self) -> int:
        return self.server_address[1]

    def start(self) -> threading.Thread:
        t = threading.Thread(target=self.serve_forever, name="guard-server", daemon=True)
        t.start()
        return t


class RemoteGuardStore:
    """Client for :class:`GuardServer`; one connection per calling thread."""

    def __init__(self, host: str, port: int, timeout: float = 5.0):
        self.host, self.port, self.timeout = host, port, timeout
        self._local = threading.local()

    def _conn(self):
        c = getattr(self._local, "conn", None)
        if c is None:
            sock = socket.create_connection((self.host, self.port), timeout=self.timeout)
            c = (sock, sock.makefile("rb"))
            self._local.conn = c
        return c

    def _call(self, line: str) -> list[str]:
        try:
            sock, rfile = self._conn()
            sock.sendall(line.encode("ascii") + b"\n")
            reply = rfile.readline().decode("ascii").split()
        except OSError as exc:
            self._local.conn = None
            raise GuardUnavailable(f"guard connection failed: {exc}") from exc
        if not reply:
            self._local.conn = None
            raise GuardUnavailable("guard closed connection")
        if reply[0] == "ERR":
            if reply[1:2] == ["unavailable"]:
                raise GuardUnavailable("guard store unavailable")
            raise ValueError(" ".join(reply[1:]))
        return reply

    def claim_ticket_interval(self, sn_ltc: bytes, start: int, exp: int) -> Claim:
        r = self._call(f"CLAIMI {bytes(sn_ltc).hex()} {start} {exp}")
        if r[0] == "DENIED":
            return Claim(False)
        return Claim(True, int(r[1]) if len(r) > 1 else None)

    def revert_ticket_interval(self, sn_ltc: bytes, prev: int | None) -> None:
        tail = "" if prev is None else f" {prev}"
        self._call(f"REVI {bytes(sn_ltc).hex()}{tail}")

    def claim_ticket_once(self, sn_tkt: bytes) -> Claim:
        return Claim(self._call(f"CLAIMO {bytes(sn_tkt).hex()}")[0] == "GRANTED")

    def revert_ticket_once(self, sn_tkt: bytes) -> None:
        self._call(f"REVO {bytes(sn_tkt).hex()}")

    def view(self, prefix: bytes) -> GuardView:
        return GuardView(self, prefix)

    def close(self) -> None:
        c = getattr(self._local, "conn", None)
        if c is not None:
            c[1].close()
            c[0].close()
            self._local.conn = None
