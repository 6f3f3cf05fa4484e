"""Virtual-time model of autoscaled LTCA and PCA replica pools.

Service times come from real LTCA/PCA calls measured on this machine
(``MeasuredServiceTimes``); queueing, replica start-up and the scaling
controller run on a virtual clock, so a burst of a thousand vehicles
finishes in seconds of wall time.
"""

from __future__ import annotations

import heapq
import random
import time
from collections import deque
from dataclasses import dataclass, field
from typing import Callable

from ..gateway.metrics import LoadMeter
from .config import ClusterConfig, LoadConfig, ScalePolicy
from .report import OK, LatencyReport, Sample
from .scaler import ScalingController

TICKET, PSEUDONYMS, ACQUIRE = "ticket", "pseudonyms", "acquire"


class FixedServiceTimes:
    """Deterministic service times: ``ticket`` seconds and ``per_pseudonym`` * n."""

    def __init__(self, ticket: float = 0.001, per_pseudonym: float = 0.00015, base: float = 0.0005):
        self.ticket = ticket
        self.per_pseudonym = per_pseudonym
        self.base = base

    def draw(self, op: str, batch: int = 0) -> float:
        if op == TICKET:
            return self.ticket
        return self.base + self.per_pseudonym * batch


class MeasuredServiceTimes:
    """Empirical service times from real in-process LTCA and PCA calls.

    The first draw for each (op, batch size) runs ``calibration`` real
    requests against a private domain and keeps their durations; later draws
    resample those durations with a seeded RNG.
    """

    def __init__(self, calibration: int = 16, tau_p: int = 172, seed: int = 0, domain=None):
        from ..gateway.config import ServiceConfig
        from ..gateway.domain import Domain

        self.calibration = max(1, calibration)
        self.rng = random.Random(seed)
        self.domain = domain or Domain.create("calib", config=ServiceConfig(tau_p=tau_p))
        self.samples: dict[tuple[str, int], list[float]] = {}

    def _measure(self, op: str, batch: int) -> list[float]:
        from ..client import Vehicle

        d = self.domain
        out = []
        for _ in range(self.calibration):
            v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust)
            now = int(time.time())
            req, rnd = v.build_ticket_request(d.pca.id, now, now + d.config.gamma)
            t0 = time.perf_counter()
            resp = d.ltca.issue_ticket(req)
            t1 = time.perf_counter()
            if op == TICKET:
                out.append(t1 - t0)
                continue
            from ..client import TicketHandle

            preq, _ = v.build_pseudonym_request(TicketHandle(resp, rnd, d.pca.id), batch)
            t0 = time.perf_counter()
            d.pca.issue_pseudonyms(preq)
            out.append(time.perf_counter() - t0)
        return out

    def draw(self, op: str, batch: int = 0) -> float:
        key = (op, batch if op == PSEUDONYMS else 0)
        if key not in self.samples:
            self.samples[key] = self._measure(*key)
        return self.rng.choice(self.samples[key])


# --- discrete-event core ---------------------------------------------------


class _Clock:
    def __init__(self):
        self.t = 0.0

    def __call__(self) -> float:
        return self.t


@dataclass
class _Job:
    op: str
    vehicle: int
    submit: float
    service: float
    done: Callable[[float], None]
    token: int = 0


@dataclass
class _Pool:
    name: str
    policy: ScalePolicy
    workers: int
    clock: _Clock
    ready: int = 0
    busy: int = 0
    queue: deque = field(default_factory=deque)

    def __post_init__(self):
        self.ready = self.policy.min_replicas
        self.controller = ScalingController(self.policy, self.ready)
        self.meter = LoadMeter(workers=self.capacity, clock=self.clock)

    @property
    def capacity(self) -> int:
        return self.ready * self.workers


class Simulation:
    def __init__(self, config: LoadConfig, cluster: ClusterConfig, service_times, seed: int = 0):
        self.config = config
        self.cluster = cluster
        self.times = service_times
        self.seed = seed
        self.clock = _Clock()
        self._events: list = []
        self._seq = 0
        self.pools = {
            TICKET: _Pool("ltca", cluster.ltca, cluster.workers_per_replica, self.clock),
            PSEUDONYMS: _Pool("pca", cluster.pca, cluster.workers_per_replica, self.clock),
        }
        self.report = LatencyReport()
        self._completed = 0
        self.issued = 0

    # --- event plumbing ---

    def _at(self, t: float, fn: Callable[[], None]) -> None:
        self._seq += 1
        heapq.heappush(self._events, (t, self._seq, fn))

    def _start(self, pool: _Pool, job: _Job) -> None:
        pool.busy += 1
        job.token = pool.meter.begin(self.clock.t)
        self._at(self.clock.t + job.service, lambda: self._finish(pool, job))

    def _submit(self, pool: _Pool, job: _Job) -> None:
        self.issued += 1
        if pool.busy < pool.capacity and not pool.queue:
            self._start(pool, job)
        else:
            pool.queue.append(job)

    def _dispatch(self, pool: _Pool) -> None:
        while pool.queue and pool.busy < pool.capacity:
            self._start(pool, pool.queue.popleft())

    def _finish(self, pool: _Pool, job: _Job) -> None:
        now = self.clock.t
        pool.busy -= 1
        pool.meter.end(job.token, now)
        self._completed += 1
        self.report.record(Sample(job.op, job.submit * 1000, (now - job.submit) * 1000, OK, job.vehicle))
        self._dispatch(pool)
        job.done(now)

    def _resize(self, pool: _Pool, ready: int) -> None:
        pool.ready = ready
        pool.meter.workers = max(1, pool.capacity)
        self._dispatch(pool)

    def _tick(self, end: float) -> None:
        now = self.clock.t
        tick = self.cluster.pca.tick
        self.report.rps.append((now, self._completed / tick))
        self._completed = 0
        for pool in self.pools.values():
            util = pool.meter.sample(now)
            before = pool.controller.current
            want = pool.controller.tick(util)
            self.report.utilization.setdefault(pool.name, []).append((now, util))
            self.report.replicas.setdefault(pool.name, []).append((now, want))
            if want > before:
                delay = self.cluster.startup_delay
                self._at(now + delay, lambda p=pool, w=want:
                         self._resize(p, max(p.ready, min(w, p.controller.current))))
            elif want < before:
                self._resize(pool, want)
        if now + tick <= end:
            self._at(now + tick, lambda: self._tick(end))

    # --- vehicles ---

    def _vehicle(self, vid: int, start: float, stop: float, batches: tuple[int, ...]) -> None:
        rng = random.Random(f"{self.seed}/{vid}")
        lo, hi = self.config.think_time_ms
        seq = [0]

        def cycle(t: float) -> None:
            if t >= stop:
                return
            batch = rng.choice(batches)
            think = rng.uniform(lo, hi) / 1000.0
            self.report.schedule.append((vid, seq[0], round(t, 6), batch, round(think, 6)))
            seq[0] += 1
            t0 = t

            def after_pseudonyms(now: float) -> None:
                self.report.record(Sample(ACQUIRE, t0 * 1000, (now - t0) * 1000, OK, vid))
                nxt = now + think
                self._at(nxt, lambda: cycle(nxt))

            def after_ticket(now: float) -> None:
                self._submit(self.pools[PSEUDONYMS], _Job(
                    PSEUDONYMS, vid, now, self.times.draw(PSEUDONYMS, batch), after_pseudonyms))

            self._submit(self.pools[TICKET], _Job(TICKET, vid, t, self.times.draw(TICKET), after_ticket))

        self._at(start, lambda: cycle(start))

    def run(self) -> LatencyReport:
        cfg = self.config
        end = cfg.duration + cfg.cooldown
        for i in range(cfg.total_vehicles):
            start = i / cfg.hatch_rate
            if start < cfg.duration:
                self._vehicle(i, start, cfg.duration, cfg.batch_sizes)
        fc = cfg.flash_crowd
        if fc is not None:
            stop = min(cfg.duration, fc.start + fc.duration)
            for j in range(fc.vehicles):
                start = fc.start + j / fc.hatch_rate
                if start < stop:
                    self._vehicle(cfg.total_vehicles + j, start, stop, fc.batch_sizes)
        if end > 0:
            self._at(0.0, lambda: self._tick(end))
        while self._events:
            t, _, fn = heapq.heappop(self._events)
            self.clock.t = t
            fn()
        self.report.schedule.sort()
        self.report.meta.update(
            mode="simulated",
            seed=self.seed,
            duration=cfg.duration,
            cooldown=cfg.cooldown,
            issued=self.issued,
            burst=[fc.start, min(cfg.duration, fc.start + fc.duration)] if fc else None,
            policies={k: vars(p.policy) for k, p in self.pools.items()},
        )
        return self.report
