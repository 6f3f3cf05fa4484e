"""On-board unit side of ticket and pseudonym acquisition.

Endpoints are duck-typed: anything with the service's method names works,
whether the service object itself or a wire client from
:mod:`vpkiaas.gateway.clients`.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field, replace

from . import chain
from .core import crypto
from .core.messages import (
    Csr,
    ForeignTicketRequest,
    PseudonymRequest,
    PseudonymResponse,
    TicketRequest,
    TicketResponse,
    ValidationRequest,
)
from .core.trust import TrustStore
from .core.types import Certificate, Pseudonym, Ticket
from .errors import ProviderMisbehavior
from .ltca import target_hash, ticket_ik


@dataclass
class PoolEntry:
    pseudonym: Pseudonym
    keys: crypto.KeyPair


@dataclass
class TicketHandle:
    """A ticket plus the secrets the vehicle keeps for the PCA leg."""

    response: TicketResponse
    rnd_tkt: bytes
    target_ca_id: str

    @property
    def ticket(self) -> Ticket:
        return self.response.ticket


@dataclass
class Batch:
    entries: list[PoolEntry]
    rnd_v: bytes
    ticket: Ticket
    response: PseudonymResponse


def coverage(pool: list[PoolEntry], now: float) -> float:
    """Seconds of uninterrupted pseudonym validity starting at ``now``."""
    end = now
    for e in sorted(pool, key=lambda e: e.pseudonym.t_s):
        p = e.pseudonym
        if p.t_s <= end < p.t_e:
            end = p.t_e
    return end - now


def refill_needed(pool: list[PoolEntry], now: float, trip_remaining: float,
                  threshold: float) -> bool:
    return coverage(pool, now) < max(trip_remaining, threshold)


@dataclass
class VehicleState:
    keys: crypto.KeyPair
    ltc: Certificate
    home_ltca_id: str
    trust: TrustStore
    pool: list[PoolEntry] = field(default_factory=list)
    tau_p: int = 300
    epoch: int = 0


class Vehicle:
    def __init__(self, state: VehicleState, clock=time.time):
        self.state = state
        self.clock = clock

    @classmethod
    def enroll(cls, ltca, home_ltca_id: str, trust: TrustStore, tau_p: int = 300,
               epoch: int = 0, clock=time.time, keys: crypto.KeyPair | None = None) -> "Vehicle":
        keys = keys or crypto.keygen()
        ltc = ltca.register_vehicle(keys.public)
        return cls(VehicleState(keys, ltc, home_ltca_id, trust, tau_p=tau_p, epoch=epoch), clock)

    def now_ms(self) -> int:
        return int(self.clock() * 1000)

    # --- tickets ------------------------------------------------------

    def build_ticket_request(self, target_ca_id: str, t_s: int, t_e: int) -> tuple[TicketRequest, bytes]:
        if not t_s < t_e:
            raise ValueError("t_s must precede t_e")
        rnd_tkt = crypto.gen_rnd()
        req = TicketRequest(
            id_req=crypto.gen_id(),
            target_hash=target_hash(target_ca_id, rnd_tkt),
            t_s=t_s,
            t_e=t_e,
            nonce=crypto.gen_id(),
            t_now=self.now_ms(),
            ltc=self.state.ltc,
        )
        req = replace(req, signature=crypto.sign(self.state.keys.private, req.payload()))
        return req, rnd_tkt

    def _check_ticket(self, resp: TicketResponse, nonce: int, target: bytes, t_s: int, t_e: int,
                      credential: bytes, issuer_id: str) -> None:
        tkt = resp.ticket
        key = self.state.trust.public_key(issuer_id)
        problems = []
        if resp.nonce != nonce + 1:
            problems.append("nonce")
        if tkt.issuer_id != issuer_id or key is None or not tkt.verify_signature(key):
            problems.append("signature")
        if tkt.target_hash != target or (tkt.t_s, tkt.t_e) != (t_s, t_e):
            problems.append("content")
        if tkt.ik_tkt != ticket_ik(credential, t_s, t_e, resp.rnd_ik_tkt):
            problems.append("ik_tkt")
        if problems:
            raise ProviderMisbehavior(f"ticket from {issuer_id} rejected: {', '.join(problems)}")

    def request_ticket(self, ltca, target_ca_id: str, t_s: int, t_e: int) -> TicketHandle:
        req, rnd_tkt = self.build_ticket_request(target_ca_id, t_s, t_e)
        resp = ltca.issue_ticket(req)
        self._check_ticket(resp, req.nonce, req.target_hash, t_s, t_e,
                           self.state.ltc.encode(), self.state.home_ltca_id)
        return TicketHandle(resp, rnd_tkt, target_ca_id)

    # --- pseudonyms ---------------------------------------------------

    def build_pseudonym_request(self, handle: TicketHandle, n: int):
        keys = [crypto.keygen() for _ in range(n)]
        sn_tkt = handle.ticket.serial
        csrs = tuple(
            Csr(k.public, crypto.sign(k.private, Csr.payload_for(k.public, sn_tkt))) for k in keys
        )
        req = PseudonymRequest(
            id_req=crypto.gen_id(),
            rnd_n_tkt=handle.rnd_tkt,
            ticket=handle.ticket,
            csrs=csrs,
            nonce=crypto.gen_id(),
            t_now=self.now_ms(),
        )
        return req, keys

    def verify_batch(self, req: PseudonymRequest, keys, resp: PseudonymResponse,
                     pca_id: str) -> list[PoolEntry]:
        st = self.state
        pca_key = st.trust.public_key(pca_id)
        if pca_key is None:
            raise ProviderMisbehavior(f"PCA {pca_id!r} not in trust store")
        if resp.nonce != req.nonce + 1:
            raise ProviderMisbehavior("nonce echo mismatch")
        if len(resp.pseudonyms) != len(keys):
            raise ProviderMisbehavior("batch size mismatch")
        for p, k in zip(resp.pseudonyms, keys):
            if p.public_key != k.public:
                raise ProviderMisbehavior("pseudonym bound to a foreign key")
            if p.issuer_id != pca_id or not p.verify_signature(pca_key):
                raise ProviderMisbehavior("pseudonym signature")
        expected = chain.align(req.ticket.t_s, st.tau_p, st.epoch)
        check = chain.verify_batch(resp.pseudonyms, resp.rnd_v, req.ticket.ik_tkt,
                                   st.tau_p, st.epoch, expected)
        if not check.ok:
            raise ProviderMisbehavior(f"batch chain check failed: {check.reason} at {check.index}")
        return [PoolEntry(p, k) for p, k in zip(resp.pseudonyms, keys)]

    def acquire_pseudonyms(self, pca, pca_id: str, handle: TicketHandle, n: int) -> Batch:
        req, keys = self.build_pseudonym_request(handle, n)
        resp = pca.issue_pseudonyms(req)
        entries = self.verify_batch(req, keys, resp, pca_id)
        self.state.pool.extend(entries)
        return Batch(entries, resp.rnd_v, handle.ticket, resp)

    def acquire(self, ltca, pca, pca_id: str, t_s: int, t_e: int, n: int) -> Batch:
        return self.acquire_pseudonyms(pca, pca_id, self.request_ticket(ltca, pca_id, t_s, t_e), n)

    def acquire_foreign(self, h_ltca, f_ltca, f_ltca_id: str, pca, pca_id: str,
                        t_s: int, t_e: int, n: int) -> Batch:
        """f-tkt from the home LTCA, n-tkt from the foreign LTCA, then pseudonyms."""
        f_handle = self.request_ticket(h_ltca, f_ltca_id, t_s, t_e)
        rnd_tkt = crypto.gen_rnd()
        req = ForeignTicketRequest(
            id_req=crypto.gen_id(),
            f_ticket=f_handle.ticket,
            rnd_f_tkt=f_handle.rnd_tkt,
            target_hash=target_hash(pca_id, rnd_tkt),
            t_s=t_s,
            t_e=t_e,
            nonce=crypto.gen_id(),
            t_now=self.now_ms(),
        )
        resp = f_ltca.issue_foreign_ticket(req)
        self._check_ticket(resp, req.nonce, req.target_hash, t_s, t_e,
                           f_handle.ticket.encode(), f_ltca_id)
        return self.acquire_pseudonyms(pca, pca_id, TicketHandle(resp, rnd_tkt, pca_id), n)

    # --- pool ---------------------------------------------------------

    def current(self, now: float | None = None) -> PoolEntry | None:
        now = self.clock() if now is None else now
        for e in self.state.pool:
            if e.pseudonym.valid_at(now):
                return e
        return None

    def prune(self, now: float | None = None) -> None:
        now = self.clock() if now is None else now
        self.state.pool = [e for e in self.state.pool if e.pseudonym.t_e > now]

    def refill_needed(self, now: float, trip_remaining: float,
                      threshold: float | None = None) -> bool:
        if threshold is None:
            threshold = 2 * self.state.tau_p
        return refill_needed(self.state.pool, now, trip_remaining, threshold)

    def report(self, suspect: Pseudonym, now: float | None = None) -> ValidationRequest:
        """Validation request about ``suspect``, signed under the current pseudonym."""
        entry = self.current(now)
        if entry is None:
            raise ValueError("no currently valid pseudonym to sign the report")
        req = ValidationRequest(crypto.gen_id(), suspect, entry.pseudonym, self.now_ms())
        return replace(req, signature=crypto.sign(entry.keys.private, req.payload()))
