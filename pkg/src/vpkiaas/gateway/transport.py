"""Request transports: direct in-process dispatch or HTTP/1.1."""

from __future__ import annotations

import threading
import urllib.error
import urllib.request
from dataclasses import dataclass, field

from ..errors import TransportError


@dataclass
class Exchange:
    leg: str
    method: str
    path: str
    request: bytes
    status: int
    response: bytes


@dataclass
class Transcript:
    """Every byte exchanged on the transports that share it, tagged by leg."""

    exchanges: list[Exchange] = field(default_factory=list)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def add(self, ex: Exchange) -> None:
        with self._lock:
            self.exchanges.append(ex)

    def leg_bytes(self, leg: str) -> bytes:
        return b"\n".join(e.request + b"\n" + e.response for e in self.exchanges if e.leg == leg)

    def clear(self) -> None:
        with self._lock:
            self.exchanges.clear()


class InProcessTransport:
    def __init__(self, app, leg: str = "", transcript: Transcript | None = None):
        self.app = app
        self.leg = leg or app.name
        self.transcript = transcript

    def request(self, method: str, path: str, body: bytes = b"") -> tuple[int, bytes]:
        status, out = self.app.handle(method, path, body)
        if self.transcript is not None:
            self.transcript.add(Exchange(self.leg, method, path, body, status, out))
        return status, out


class HttpTransport:
    def __init__(self, base_url: str, timeout: float = 30.0, leg: str = "",
                 transcript: Transcript | None = None):
        self.base_url = base_url.rstrip("/")
        self.timeout = timeout
        self.leg = leg or self.base_url
        self.transcript = transcript

    def request(self, method: str, path: str, body: bytes = b"") -> tuple[int, bytes]:
        req = urllib.request.Request(
            self.base_url + path,
            data=body if method == "POST" else None,
            method=method,
            headers={"Content-Type": "application/json"},
        )
        try:
            with urllib.request.urlopen(req, timeout=self.timeout) as resp:
                status, out = resp.status, resp.read()
        except urllib.error.HTTPError as exc:
            status, out = exc.code, exc.read()
        except (urllib.error.URLError, OSError) as exc:
            raise TransportError(f"{self.base_url}{path}: {exc}") from exc
        if self.transcript is not None:
            self.transcript.add(Exchange(self.leg, method, path, body, status, out))
        return status, out
