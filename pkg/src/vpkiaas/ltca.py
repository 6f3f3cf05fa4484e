"""Long-term CA: vehicle registration and anonymized ticket issuance."""

from __future__ import annotations

import logging
import threading
import time
from dataclasses import replace

from . import core
from .core import crypto
from .core.encoding import hash_fields, int_field, str_field
from .core.messages import ForeignTicketRequest, TicketRequest, TicketResponse
from .core.types import Certificate, Ticket
from .errors import (
    BadRequest,
    BadSignature,
    DuplicateRegistration,
    ExpiredTicket,
    GuardUnavailable,
    ReusedForeignTicket,
    SybilDenied,
    TargetMismatch,
    UnknownOrExpiredLTC,
    UntrustedIssuer,
)
from .guard import GuardStore
from .records import LtcRecord, RecordStore, TicketRecord
from .service import HEALTHY, Health, Service

logger = logging.getLogger(__name__)

LTC_LIFETIME = 365 * 86_400


def ticket_ik(credential: bytes, t_s: int, t_e: int, rnd_ik: bytes) -> bytes:
    """IK_tkt = H(credential || t_s || t_e || Rnd_IK_tkt)."""
    return hash_fields(credential, int_field(t_s), int_field(t_e), rnd_ik)


def target_hash(ca_id: str, rnd: bytes) -> bytes:
    """H(Id_CA || Rnd): hides which CA a ticket is meant for."""
    return hash_fields(str_field(ca_id), rnd)


class LTCA(Service):
    kind = "ltca"

    def __init__(self, identity, trust, guard=None, records: RecordStore | None = None,
                 config=None, clock=time.time):
        super().__init__(identity, trust, config, clock)
        store = guard if guard is not None else GuardStore()
        ns = self.id.encode() + b"/"
        self.guard = store.view(ns)
        self._selfcheck_guard = store.view(ns + b"selfcheck/")
        self.records = records if records is not None else RecordStore()
        self.revoked: set[bytes] = set()
        self._by_key: dict[bytes, Certificate] = {}
        self._reg_lock = threading.Lock()
        self._dummy_keys = crypto.keygen()
        # lives only in the selfcheck guard namespace, never registered
        self._dummy_ltc = self._make_ltc(self._dummy_keys.public, 0, 2**62)

    # --- registration -------------------------------------------------

    def _make_ltc(self, public_key: bytes, valid_from: int, valid_to: int) -> Certificate:
        cert = Certificate(
            serial=crypto.gen_serial(),
            subject_public_key=public_key,
            issuer_id=self.id,
            valid_from=valid_from,
            valid_to=valid_to,
        )
        return cert.signed(self.identity.keys.private)

    def register_vehicle(self, public_key: bytes, valid_from: int | None = None,
                         valid_to: int | None = None) -> Certificate:
        public_key = bytes(public_key)
        if not crypto.valid_public_key(public_key):
            raise BadRequest("malformed public key")
        now = self.now()
        valid_from = now if valid_from is None else valid_from
        valid_to = valid_from + LTC_LIFETIME if valid_to is None else valid_to
        if valid_from >= valid_to:
            raise BadRequest("empty validity period")
        with self._reg_lock:
            if public_key in self._by_key:
                raise DuplicateRegistration("public key already registered")
            ltc = self._make_ltc(public_key, valid_from, valid_to)
            self._by_key[public_key] = ltc
        self.records.append_ltc_record(LtcRecord(ltc.serial, public_key, ltc.encode(), now))
        return ltc

    def revoke(self, sn_ltc: bytes) -> None:
        self.revoked.add(bytes(sn_ltc))

    # --- tickets ------------------------------------------------------

    def _check_ltc(self, ltc: Certificate, now: int) -> None:
        if ltc.issuer_id != self.id or not ltc.verify_signature(self.certificate.subject_public_key):
            raise UnknownOrExpiredLTC("LTC not issued by this LTCA")
        if not ltc.valid_at(now):
            raise UnknownOrExpiredLTC("LTC outside its validity period")
        if ltc.serial in self.revoked:
            raise UnknownOrExpiredLTC("LTC revoked")

    def _check_window(self, t_s: int, t_e: int) -> None:
        if not t_s < t_e:
            raise BadRequest("ticket window must have t_s < t_e")
        if t_e - t_s > self.config.gamma:
            raise BadRequest(f"ticket window exceeds {self.config.gamma} s")

    def _mint(self, credential: bytes, target: bytes, t_s: int, t_e: int):
        rnd_ik = crypto.gen_rnd()
        ticket = Ticket(
            serial=crypto.gen_serial(),
            target_hash=target,
            ik_tkt=ticket_ik(credential, t_s, t_e, rnd_ik),
            t_s=t_s,
            t_e=t_e,
            exp_tkt=t_e + self.config.grace,
            issuer_id=self.id,
        )
        return ticket.signed(self.identity.keys.private), rnd_ik

    def issue_ticket(self, req: TicketRequest) -> TicketResponse:
        with self.meter.track():
            return self._issue_ticket(req, self.guard, persist=True)

    def _issue_ticket(self, req: TicketRequest, guard, persist: bool) -> TicketResponse:
        now = self.now()
        self.check_fresh(req.t_now)
        self._check_ltc(req.ltc, now)
        if not crypto.verify(req.ltc.subject_public_key, req.payload(), req.signature):
            raise BadSignature("ticket request signature")
        self._check_window(req.t_s, req.t_e)
        exp = req.t_e + self.config.grace
        sn_ltc = req.ltc.serial

        claim, flagged = self._claim(
            lambda: guard.claim_ticket_interval(sn_ltc, req.t_s, exp),
            SybilDenied("overlapping ticket already issued"),
        )
        try:
            self._stage("post_guard")
            ticket, rnd_ik = self._mint(req.ltc.encode(), req.target_hash, req.t_s, req.t_e)
            self._stage("sign")
            if persist:
                self.records.append_ticket_record(
                    TicketRecord(ticket.serial, sn_ltc, ticket.ik_tkt, rnd_ik,
                                 ticket.t_s, ticket.t_e, ticket.exp_tkt, now, flagged)
                )
        except BaseException:
            if claim:
                guard.revert_ticket_interval(sn_ltc, claim.prev)
            raise
        return TicketResponse(crypto.gen_id(), ticket, rnd_ik, req.nonce + 1, self.now_ms())

    def issue_foreign_ticket(self, req: ForeignTicketRequest) -> TicketResponse:
        """Issue a native ticket to a visitor holding an f-tkt for this LTCA."""
        with self.meter.track():
            now = self.now()
            self.check_fresh(req.t_now)
            f = req.f_ticket
            issuer_key = self.trust.public_key(f.issuer_id)
            if issuer_key is None or f.issuer_id == self.id:
                raise UntrustedIssuer(f"f-tkt issuer {f.issuer_id!r} not trusted")
            if not f.verify_signature(issuer_key):
                raise BadSignature("f-tkt signature")
            if target_hash(self.id, req.rnd_f_tkt) != f.target_hash:
                raise TargetMismatch("f-tkt bound to another LTCA")
            if now > f.exp_tkt:
                raise ExpiredTicket("f-tkt expired")
            self._check_window(req.t_s, req.t_e)
            if req.t_s < f.t_s or req.t_e > f.exp_tkt:
                raise BadRequest("requested window outside the f-tkt window")

            claim, flagged = self._claim(
                lambda: self.guard.claim_ticket_once(f.serial),
                ReusedForeignTicket("f-tkt already used"),
            )
            try:
                self._stage("post_guard")
                ticket, rnd_ik = self._mint(f.encode(), req.target_hash, req.t_s, req.t_e)
                self._stage("sign")
                self.records.append_ticket_record(
                    TicketRecord(ticket.serial, f.serial, ticket.ik_tkt, rnd_ik,
                                 ticket.t_s, ticket.t_e, ticket.exp_tkt, now, flagged)
                )
            except BaseException:
                if claim:
                    self.guard.revert_ticket_once(f.serial)
                raise
            return TicketResponse(crypto.gen_id(), ticket, rnd_ik, req.nonce + 1, self.now_ms())

    # --- health -------------------------------------------------------

    def health_selfcheck(self) -> Health:
        """Issue a dummy ticket in a sandboxed guard namespace, verify, discard."""
        stage = "request"
        try:
            now_ms = self.now_ms()
            t_s = self.now()
            req = TicketRequest(
                id_req=crypto.gen_id(),
                target_hash=core.hash(b"selfcheck"),
                t_s=t_s,
                t_e=t_s + 60,
                nonce=crypto.gen_id(),
                t_now=now_ms,
                ltc=self._dummy_ltc,
            )
            req = replace(req, signature=crypto.sign(self._dummy_keys.private, req.payload()))

            stage = "verify"
            self._check_ltc(req.ltc, t_s)
            if not crypto.verify(req.ltc.subject_public_key, req.payload(), req.signature):
                raise BadSignature("dummy request")

            stage = "guard"
            guard = self._selfcheck_guard
            exp = req.t_e + self.config.grace
            try:
                claim = guard.claim_ticket_interval(req.ltc.serial, req.t_s, exp)
            except GuardUnavailable:
                if not self.config.fail_open:
                    raise
                claim = None
            if claim is not None and not claim:
                raise SybilDenied("dummy namespace not clean")
            try:
                stage = "sign"
                ticket, rnd_ik = self._mint(req.ltc.encode(), req.target_hash, req.t_s, req.t_e)
                if not ticket.verify_signature(self.certificate.subject_public_key):
                    raise BadSignature("ticket does not verify under own certificate")
                if ticket.ik_tkt != ticket_ik(req.ltc.encode(), req.t_s, req.t_e, rnd_ik):
                    raise BadSignature("identifiable key mismatch")
            finally:
                if claim:
                    guard.revert_ticket_interval(req.ltc.serial, claim.prev)
        except Exception as exc:  # noqa: BLE001
            return Health(False, stage, f"{type(exc).__name__}: {exc}")
        return HEALTHY

