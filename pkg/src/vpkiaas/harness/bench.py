"""PCA processing latency for one batch size, measured in-process."""

from __future__ import annotations

import statistics
import time

from ..chain import lifetime_for_daily_count
from ..client import Vehicle
from ..gateway.config import ServiceConfig
from .report import percentile


def batch_latency(n: int, repeat: int = 20, domain=None) -> dict:
    """Time ``issue_pseudonyms`` only; key generation and the ticket leg are excluded."""
    from ..gateway.domain import Domain

    # the largest lifetime that still fits n slots in one day, as in the daily-count setting
    tau = min(300, int(lifetime_for_daily_count(max(n, 1))) - 1)
    d = domain or Domain.create("bench", config=ServiceConfig(tau_p=tau, max_batch=max(1000, n)))
    tau = d.config.tau_p
    times = []
    for _ in range(repeat):
        v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust, tau_p=tau)
        now = int(time.time())
        h = v.request_ticket(d.ltca, d.pca.id, now, now + tau * (n + 1))
        req, _ = v.build_pseudonym_request(h, n)
        t0 = time.perf_counter()
        d.pca.issue_pseudonyms(req)
        times.append((time.perf_counter() - t0) * 1000)
    return {"n": n, "tau_p": tau, "mean_ms": statistics.fmean(times),
            "p99_ms": percentile(times, 99), "samples": times}
