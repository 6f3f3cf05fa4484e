"""Concurrent duplicate-request races against replicas sharing one guard."""

from __future__ import annotations

import random
import threading
import time
from collections import Counter
from dataclasses import dataclass

from ..client import Vehicle
from ..errors import SybilDenied, TicketReused, VpkiError


@dataclass(frozen=True)
class RaceOutcome:
    granted: int
    denied: int
    failed: int = 0

    @property
    def total(self) -> int:
        return self.granted + self.denied + self.failed


def sybil_race(k: int, mode: str = "ticket", replicas: int = 4, seed: int = 0,
               domain=None, batch: int = 1) -> RaceOutcome:
    """Fire ``k`` simultaneous duplicate requests from one vehicle across replicas.

    ``ticket`` mode sends ``k`` ticket requests for the same window, each
    with its own nonce and target randomness. ``pseudonym`` mode redeems one
    ticket ``k`` times with fresh CSRs.
    """
    from ..gateway.domain import Domain

    if k < 1:
        raise ValueError("k must be >= 1")
    if mode not in ("ticket", "pseudonym"):
        raise ValueError(f"unknown mode {mode!r}")
    rng = random.Random(seed)
    d = domain or Domain.create(f"race{seed}")
    kind = "ltca" if mode == "ticket" else "pca"
    pool = [d.replica(kind) for _ in range(max(2, replicas))]
    v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust)
    now = int(time.time())
    t_s = now + rng.randrange(0, 3600)
    t_e = t_s + d.config.tau_p * batch + rng.randrange(d.config.tau_p, 4 * d.config.tau_p)

    if mode == "ticket":
        reqs = [v.build_ticket_request(d.pca.id, t_s, t_e)[0] for _ in range(k)]
        calls = [lambda r=r, s=pool[i % len(pool)]: s.issue_ticket(r) for i, r in enumerate(reqs)]
        denied_exc = SybilDenied
    else:
        handle = v.request_ticket(d.ltca, d.pca.id, t_s, t_e)
        reqs = [v.build_pseudonym_request(handle, batch)[0] for _ in range(k)]
        calls = [lambda r=r, s=pool[i % len(pool)]: s.issue_pseudonyms(r) for i, r in enumerate(reqs)]
        denied_exc = TicketReused

    barrier = threading.Barrier(k)
    results: list[str] = [""] * k

    def fire(i: int) -> None:
        barrier.wait()
        try:
            calls[i]()
            results[i] = "granted"
        except denied_exc:
            results[i] = "denied"
        except VpkiError:
            results[i] = "failed"

    threads = [threading.Thread(target=fire, args=(i,)) for i in range(k)]
    for t in threads:
        t.start()
    for t in threads:
        t.join()
    c = Counter(results)
    return RaceOutcome(c["granted"], c["denied"], c["failed"])
