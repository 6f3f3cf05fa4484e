"""Load and health gauges published by every service replica."""

from __future__ import annotations

import math
import threading
import time
from contextlib import contextmanager
from dataclasses import dataclass


@dataclass(frozen=True)
class Metrics:
    load: float
    in_flight: int
    health: bool

    def as_dict(self) -> dict:
        return {"load": self.load, "in_flight": self.in_flight, "health": self.health}


class LoadMeter:
    """Busy-time fraction of a worker pool, smoothed by an EWMA.

    The smoothing time constant is ``horizon`` seconds. Work still in
    progress counts as busy up to the sampling instant, so a pool that is
    stuck on long requests still reads as loaded.
    """

    def __init__(self, workers: int = 1, horizon: float = 10.0, clock=time.monotonic):
        if workers < 1:
            raise ValueError("workers must be >= 1")
        self.workers = workers
        self.horizon = horizon
        self.clock = clock
        self._lock = threading.Lock()
        self._busy_done = 0.0
        self._active: dict[int, float] = {}
        self._next = 0
        self._ewma = 0.0
        self._last_t = clock()
        self._last_busy = 0.0

    @property
    def in_flight(self) -> int:
        return len(self._active)

    def begin(self, now: float | None = None) -> int:
        now = self.clock() if now is None else now
        with self._lock:
            self._next += 1
            self._active[self._next] = now
            return self._next

    def end(self, token: int, now: float | None = None) -> None:
        now = self.clock() if now is None else now
        with self._lock:
            start = self._active.pop(token, None)
            if start is not None:
                self._busy_done += now - start

    def add_busy(self, seconds: float) -> None:
        """Account work that was executed outside begin/end."""
        with self._lock:
            self._busy_done += seconds

    @contextmanager
    def track(self):
        token = self.begin()
        try:
            yield
        finally:
            self.end(token)

    def _busy_at(self, now: float) -> float:
        return self._busy_done + sum(now - s for s in self._active.values() if s < now)

    def sample(self, now: float | None = None) -> float:
        now = self.clock() if now is None else now
        with self._lock:
            dt = now - self._last_t
            if dt <= 0:
                return self._ewma
            busy = self._busy_at(now)
            frac = (busy - self._last_busy) / (dt * self.workers)
            frac = min(1.0, max(0.0, frac))
            alpha = 1.0 - math.exp(-dt / self.horizon)
            self._ewma += alpha * (frac - self._ewma)
            self._last_t, self._last_busy = now, busy
            return self._ewma

    def load(self, now: float | None = None) -> float:
        return self.sample(now)


def metrics_for(service) -> Metrics:
    """Gauges for a service exposing ``meter`` and ``health_selfcheck``."""
    health = service.health_selfcheck()
    return Metrics(
        load=service.meter.load(),
        in_flight=service.meter.in_flight,
        health=bool(health),
    )
