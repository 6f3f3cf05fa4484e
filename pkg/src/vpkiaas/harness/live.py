"""Real-time load against HTTP endpoints."""

from __future__ import annotations

import random
import threading
import time

from ..client import Vehicle
from ..core.trust import TrustStore
from ..errors import VpkiError
from ..gateway.clients import LtcaClient, PcaClient
from ..gateway.transport import HttpTransport
from .config import LoadConfig
from .report import OK, LatencyReport, Sample
from .sim import ACQUIRE, PSEUDONYMS, TICKET


def run_live(config: LoadConfig, descriptor, anchors, seed: int = 0, pca_id: str | None = None,
             timeout: float = 30.0) -> LatencyReport:
    """One thread per vehicle, each looping ticket -> pseudonyms -> think.

    ``descriptor`` is a DomainDescriptor with endpoints filled in; its
    certificates are checked against ``anchors`` before any request. Failed
    requests are recorded with their error code and the vehicle carries on.
    """
    trust = TrustStore(list(anchors))
    descriptor.verify(trust)
    entry = descriptor.pca(pca_id) if pca_id else descriptor.pcas[0]
    ltca = LtcaClient(HttpTransport(descriptor.ltca_endpoint, timeout))
    pca = PcaClient(HttpTransport(entry.endpoint, timeout))
    report = LatencyReport()
    t0 = time.monotonic()
    deadline = t0 + config.duration
    lo, hi = config.think_time_ms
    counts = {"issued": 0}
    lock = threading.Lock()

    def rel_ms() -> float:
        return (time.monotonic() - t0) * 1000

    def timed(op: str, vid: int, fn):
        with lock:
            counts["issued"] += 1
        start = rel_ms()
        try:
            out = fn()
            report.record(Sample(op, start, rel_ms() - start, OK, vid))
            return out
        except VpkiError as exc:
            report.record(Sample(op, start, rel_ms() - start, exc.code, vid))
            return None

    def vehicle(vid: int, start_at: float) -> None:
        rng = random.Random(f"{seed}/{vid}")
        time.sleep(max(0.0, start_at - time.monotonic()))
        try:
            v = Vehicle.enroll(ltca, descriptor.ltca_id, trust, tau_p=entry.tau_p,
                               epoch=descriptor.epoch)
        except VpkiError as exc:
            report.record(Sample("register", rel_ms(), 0.0, exc.code, vid))
            return
        seq = 0
        next_start = int(time.time())
        while time.monotonic() < deadline:
            batch = rng.choice(config.batch_sizes)
            think = rng.uniform(lo, hi) / 1000.0
            report.schedule.append((vid, seq, round(time.monotonic() - t0, 6), batch, round(think, 6)))
            seq += 1
            # consecutive windows abut, so the interval guard never refuses an honest vehicle
            t_s = max(int(time.time()), next_start)
            window = (t_s, t_s + entry.tau_p * (batch + 1))
            begin = rel_ms()
            handle = timed(TICKET, vid, lambda: v.request_ticket(ltca, entry.id, *window))
            if handle is not None:
                batch_out = timed(PSEUDONYMS, vid, lambda: v.acquire_pseudonyms(pca, entry.id, handle, batch))
                if batch_out is not None:
                    report.record(Sample(ACQUIRE, begin, rel_ms() - begin, OK, vid))
            if handle is not None:
                next_start = window[1]
            v.prune()
            time.sleep(think)

    threads = [
        threading.Thread(target=vehicle, args=(i, t0 + i / config.hatch_rate), daemon=True)
        for i in range(config.total_vehicles)
        if i / config.hatch_rate < config.duration
    ]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    report.schedule.sort()
    report.meta.update(mode="live", seed=seed, duration=config.duration, issued=counts["issued"])
    return report
