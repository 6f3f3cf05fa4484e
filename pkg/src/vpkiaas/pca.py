"""Pseudonym CA: single-use ticket redemption, batch issuance, resolution."""

from __future__ import annotations

import time
from dataclasses import replace

from . import chain
from .core import crypto
from .core.encoding import hash_fields, int_field, iterated_hash
from .core.messages import (
    Csr,
    PseudonymRequest,
    PseudonymResponse,
    ResolveRequest,
    ResolveResponse,
)
from .core.types import Pseudonym, Ticket
from .errors import (
    BadCSR,
    BadSignature,
    BatchTooLarge,
    ExpiredTicket,
    GuardUnavailable,
    NotFound,
    TargetMismatch,
    TicketReused,
    UnauthorizedCaller,
    UntrustedLTCA,
    WindowMisaligned,
)
from .guard import GuardStore
from .ltca import target_hash
from .records import BatchRecord, RecordStore
from .service import HEALTHY, Health, Service


def pseudonym_ik(ik_tkt: bytes, public_key: bytes, t_s: int, t_e: int, rnd_ik_p: bytes) -> bytes:
    """IK_P = H(IK_tkt || K || t_s || t_e || H^i(Rnd_v)); the RA recomputes this."""
    return hash_fields(ik_tkt, public_key, int_field(t_s), int_field(t_e), rnd_ik_p)


class PCA(Service):
    kind = "pca"

    def __init__(self, identity, trust, guard=None, records: RecordStore | None = None,
                 config=None, clock=time.time, ra_ids=()):
        super().__init__(identity, trust, config, clock)
        store = guard if guard is not None else GuardStore()
        ns = self.id.encode() + b"/"
        self.guard = store.view(ns)
        self._selfcheck_guard = store.view(ns + b"selfcheck/")
        self.records = records if records is not None else RecordStore()
        self.ra_ids = set(ra_ids)
        self.derive_chain = chain.derive_chain
        # a throwaway LTCA key trusted only inside health_selfcheck
        self._dummy_ltca = crypto.keygen()
        self._dummy_csr_keys = [crypto.keygen() for _ in range(2)]

    # --- issuance -----------------------------------------------------

    def _ticket_key(self, ticket: Ticket) -> bytes:
        key = self.trust.public_key(ticket.issuer_id)
        if key is None:
            raise UntrustedLTCA(f"ticket issuer {ticket.issuer_id!r} not trusted")
        return key

    def _layout(self, ticket: Ticket, n: int) -> int:
        """First slot start of an ``n``-pseudonym batch for this ticket."""
        if n < 1:
            raise BadCSR("no CSRs in request")
        if n > self.config.max_batch:
            raise BatchTooLarge(f"{n} > {self.config.max_batch}")
        tau = self.config.tau_p
        start = chain.align(ticket.t_s, tau, self.config.epoch)
        if start + n * tau > ticket.t_e:
            raise WindowMisaligned(
                f"{n} slots of {tau} s from {start} overrun ticket end {ticket.t_e}"
            )
        return start

    def _build_batch(self, ticket: Ticket, csrs, start: int, rnd_v: bytes) -> list[Pseudonym]:
        for i, csr in enumerate(csrs, 1):
            payload = Csr.payload_for(csr.public_key, ticket.serial)
            if not crypto.verify(csr.public_key, payload, csr.signature):
                raise BadCSR(f"proof of possession failed for CSR {i}")
        self._stage("chain")
        tau = self.config.tau_p
        keys = [c.public_key for c in csrs]
        _, iks, serials = self.derive_chain(ticket.ik_tkt, keys, start, tau, rnd_v)
        self._stage("sign")
        priv = self.identity.keys.private
        out = []
        for i, (k, ik, sn) in enumerate(zip(keys, iks, serials)):
            t_s = start + i * tau
            out.append(Pseudonym(sn, k, ik, t_s, t_s + tau, self.id).signed(priv))
        return out

    def issue_pseudonyms(self, req: PseudonymRequest) -> PseudonymResponse:
        with self.meter.track():
            now = self.now()
            self.check_fresh(req.t_now)
            ticket = req.ticket
            n = len(req.csrs)
            if n > self.config.max_batch:
                raise BatchTooLarge(f"{n} > {self.config.max_batch}")
            if not ticket.verify_signature(self._ticket_key(ticket)):
                raise UntrustedLTCA("ticket signature does not verify")
            if target_hash(self.id, req.rnd_n_tkt) != ticket.target_hash:
                raise TargetMismatch("ticket bound to another PCA")
            if now > ticket.exp_tkt:
                raise ExpiredTicket("ticket expired")
            start = self._layout(ticket, n)

            claim, flagged = self._claim(
                lambda: self.guard.claim_ticket_once(ticket.serial),
                TicketReused("ticket already redeemed"),
            )
            try:
                self._stage("post_guard")
                rnd_v = crypto.gen_rnd()
                batch = self._build_batch(ticket, req.csrs, start, rnd_v)
                self._stage("record")
                self.records.append_batch_record(
                    BatchRecord(ticket.serial, rnd_v, tuple(p.serial for p in batch),
                                ticket.encode(), now, flagged)
                )
            except BaseException:
                if claim:
                    self.guard.revert_ticket_once(ticket.serial)
                raise
            return PseudonymResponse(crypto.gen_id(), tuple(batch), rnd_v, req.nonce + 1,
                                     self.now_ms())

    # --- resolution ---------------------------------------------------

    def _authorize(self, req: ResolveRequest) -> None:
        cert = req.ra_cert
        trusted = self.trust.get(cert.subject_id)
        if cert.subject_id not in self.ra_ids or trusted is None or trusted != cert:
            raise UnauthorizedCaller(f"{cert.subject_id!r} is not an authorized RA")
        if not crypto.verify(cert.subject_public_key, req.payload(), req.signature):
            raise BadSignature("resolve request signature")

    def resolve_pseudonym(self, req: ResolveRequest) -> ResolveResponse:
        with self.meter.track():
            self.check_fresh(req.t_now)
            self._authorize(req)
            p = req.pseudonym
            if p.issuer_id != self.id or not p.verify_signature(self.certificate.subject_public_key):
                raise NotFound("pseudonym not issued here")
            batch, i = self.records.lookup_by_pseudonym_serial(p.serial)
            resp = ResolveResponse(
                id_res=crypto.gen_id(),
                serial=p.serial,
                ticket=Ticket.decode(batch.ticket),
                rnd_ik_p=iterated_hash(batch.rnd_v, i),
                nonce=req.nonce + 1,
                t_now=self.now_ms(),
            )
            return replace(resp, signature=self._sign(resp.payload()))

    # --- health -------------------------------------------------------

    def health_selfcheck(self) -> Health:
        """Issue a dummy batch against a dummy ticket, inside a sandbox."""
        stage = "ticket"
        try:
            rnd_tkt = crypto.gen_rnd()
            t_s = chain.align(self.now(), self.config.tau_p, self.config.epoch)
            n = len(self._dummy_csr_keys)
            ticket = Ticket(
                serial=crypto.gen_serial(),
                target_hash=target_hash(self.id, rnd_tkt),
                ik_tkt=crypto.gen_rnd(),
                t_s=t_s,
                t_e=t_s + n * self.config.tau_p,
                exp_tkt=t_s + n * self.config.tau_p,
                issuer_id="selfcheck",
            ).signed(self._dummy_ltca.private)
            if not ticket.verify_signature(self._dummy_ltca.public):
                raise BadSignature("dummy ticket")
            if target_hash(self.id, rnd_tkt) != ticket.target_hash:
                raise TargetMismatch("dummy ticket target")
            start = self._layout(ticket, n)

            stage = "guard"
            guard = self._selfcheck_guard
            try:
                claim = guard.claim_ticket_once(ticket.serial)
            except GuardUnavailable:
                if not self.config.fail_open:
                    raise
                claim = None
            if claim is not None and not claim:
                raise TicketReused("dummy ticket")
            try:
                stage = "csr"
                csrs = [
                    Csr(k.public, crypto.sign(k.private, Csr.payload_for(k.public, ticket.serial)))
                    for k in self._dummy_csr_keys
                ]
                rnd_v = crypto.gen_rnd()
                stage = "chain"
                batch = self._build_batch(ticket, csrs, start, rnd_v)
                check = chain.verify_batch(
                    batch, rnd_v, ticket.ik_tkt, self.config.tau_p, self.config.epoch, start
                )
                if not check.ok:
                    raise ValueError(f"chain check failed: {check.reason} at {check.index}")
                stage = "sign"
                for p in batch:
                    if not p.verify_signature(self.certificate.subject_public_key):
                        raise BadSignature("pseudonym does not verify under own certificate")
            finally:
                if claim:
                    guard.revert_ticket_once(ticket.serial)
        except Exception as exc:  # noqa: BLE001
            return Health(False, stage, f"{type(exc).__name__}: {exc}")
        return HEALTHY
