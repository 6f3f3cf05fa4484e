"""Plumbing shared by the LTCA, PCA and RA services."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass
from typing import Callable

from .core.crypto import sign
from .core.types import CaIdentity
from .core.trust import TrustStore
from .errors import GuardUnavailable, StaleTimestamp
from .gateway.config import ServiceConfig
from .gateway.metrics import LoadMeter, Metrics, metrics_for

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class Health:
    healthy: bool
    stage: str | None = None
    reason: str = ""

    def __bool__(self) -> bool:
        return self.healthy


HEALTHY = Health(True)


class Service:
    """Base for CA services.

    ``fault`` is an optional hook called with a stage name at fixed points of
    every issuance; tests raise from it to inject failures.
    """

    kind = "service"

    def __init__(
        self,
        identity: CaIdentity,
        trust: TrustStore,
        config: ServiceConfig | None = None,
        clock: Callable[[], float] = time.time,
    ):
        if identity.keys is None:
            raise ValueError("service identity needs its key pair")
        self.identity = identity
        self.trust = trust
        self.config = config or ServiceConfig()
        self.clock = clock
        self.meter = LoadMeter(workers=self.config.workers)
        self.fault: Callable[[str], None] | None = None

    @property
    def id(self) -> str:
        return self.identity.id

    @property
    def certificate(self):
        return self.identity.certificate

    def now(self) -> int:
        return int(self.clock())

    def now_ms(self) -> int:
        return int(self.clock() * 1000)

    def _stage(self, name: str) -> None:
        if self.fault is not None:
            self.fault(name)

    def check_fresh(self, t_now_ms: int) -> None:
        skew = abs(t_now_ms - self.now_ms())
        if skew > self.config.freshness_window * 1000:
            raise StaleTimestamp(f"timestamp off by {skew} ms")

    def _claim(self, claim, denied_exc):
        """Run a guard claim under the configured failure policy.

        Returns (claimed, flagged): ``claimed`` means a revert is owed on
        failure, ``flagged`` marks a fail-open issuance.
        """
        try:
            granted = claim()
        except GuardUnavailable:
            if self.config.fail_open:
                logger.warning("%s: guard unavailable, issuing fail-open", self.id)
                return False, True
            raise
        if not granted:
            raise denied_exc
        return granted, False

    def _sign(self, data: bytes) -> bytes:
        return sign(self.identity.keys.private, data)

    def health_selfcheck(self) -> Health:
        return HEALTHY

    def metrics(self) -> Metrics:
        return metrics_for(self)
