"""Resolution authority: privacy-preserving pseudonym issuance validation.

The RA never learns who owns a pseudonym. It asks the issuing PCA for the
ticket and the per-pseudonym randomness used at issuance, checks both
signatures, and recomputes the pseudonym's identifiable key from the
ticket's IK_tkt. A mismatch means the PCA issued without a valid ticket.
"""

from __future__ import annotations

import threading
import time
from dataclasses import replace
from typing import Callable, Mapping

from .core import crypto
from .core.messages import INVALID, VALID, ResolveRequest, ValidationReport, ValidationRequest
from .errors import (
    BadPCASignature,
    BadReporterSignature,
    BadTicketSignature,
    PCARefused,
    RateLimited,
    UnknownPCA,
    VpkiError,
)
from .pca import pseudonym_ik
from .service import Service

Resolver = Callable[[ResolveRequest], object]


class TokenBucket:
    def __init__(self, rate_per_min: float, burst: float | None = None, clock=time.monotonic):
        self.rate = rate_per_min / 60.0
        self.burst = burst if burst is not None else rate_per_min
        self.clock = clock
        self._state: dict[bytes, tuple[float, float]] = {}
        self._lock = threading.Lock()

    def take(self, key: bytes) -> bool:
        now = self.clock()
        with self._lock:
            tokens, last = self._state.get(key, (self.burst, now))
            tokens = min(self.burst, tokens + (now - last) * self.rate)
            if tokens < 1:
                self._state[key] = (tokens, now)
                return False
            self._state[key] = (tokens - 1, now)
            return True


class RA(Service):
    kind = "ra"

    def __init__(self, identity, trust, pcas: Mapping[str, Resolver] | None = None,
                 config=None, clock=time.time):
        super().__init__(identity, trust, config, clock)
        self.pcas: dict[str, Resolver] = dict(pcas or {})
        self.limiter = TokenBucket(self.config.rate_limit_per_min)

    def add_pca(self, pca_id: str, resolver: Resolver) -> None:
        self.pcas[pca_id] = resolver

    def _check_reporter(self, req: ValidationRequest, now: int) -> None:
        rep = req.reporter
        key = self.trust.public_key(rep.issuer_id)
        if key is None or not rep.verify_signature(key):
            raise BadReporterSignature("reporter pseudonym not issued by a trusted PCA")
        if not rep.valid_at(now):
            raise BadReporterSignature("reporter pseudonym not currently valid")
        if not crypto.verify(rep.public_key, req.payload(), req.signature):
            raise BadReporterSignature("report signature")

    def validate_issuance(self, req: ValidationRequest) -> ValidationReport:
        with self.meter.track():
            now = self.now()
            self._check_reporter(req, now)
            self.check_fresh(req.t_now)
            if not self.limiter.take(req.reporter.public_key):
                raise RateLimited("too many validation requests from this reporter")

            suspect = req.suspect
            pca_id = suspect.issuer_id
            pca_key = self.trust.public_key(pca_id)
            resolver = self.pcas.get(pca_id)
            if pca_key is None or resolver is None:
                raise UnknownPCA(f"no trusted PCA {pca_id!r}")

            fwd = ResolveRequest(
                id_req=crypto.gen_id(),
                pseudonym=suspect,
                ra_cert=self.certificate,
                nonce=crypto.gen_id(),
                t_now=self.now_ms(),
            )
            fwd = replace(fwd, signature=self._sign(fwd.payload()))
            try:
                resp = resolver(fwd)
            except VpkiError as exc:
                raise PCARefused(f"{pca_id} refused resolution: {exc.code}") from exc

            if resp.nonce != fwd.nonce + 1 or not crypto.verify(pca_key, resp.payload(), resp.signature):
                raise BadPCASignature(f"response from {pca_id} does not verify")

            ticket = resp.ticket
            report = dict(serial=suspect.serial, ticket_serial=ticket.serial, pca_id=pca_id,
                          claimed_ik=suspect.ik_p)
            ltca_key = self.trust.public_key(ticket.issuer_id)
            if ltca_key is None or not ticket.verify_signature(ltca_key):
                raise BadTicketSignature(f"ticket from {pca_id} not signed by a trusted LTCA")
            if resp.serial != suspect.serial:
                return ValidationReport(verdict=INVALID, stage="serial", **report)
            if not (ticket.t_s <= suspect.t_s and suspect.t_e <= ticket.t_e):
                return ValidationReport(verdict=INVALID, stage="window", **report)

            ik = pseudonym_ik(ticket.ik_tkt, suspect.public_key, suspect.t_s, suspect.t_e,
                              resp.rnd_ik_p)
            if ik != suspect.ik_p:
                return ValidationReport(verdict=INVALID, stage="ik", recomputed_ik=ik, **report)
            return ValidationReport(verdict=VALID, recomputed_ik=ik, **report)
