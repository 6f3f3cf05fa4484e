"""JSON binding of every envelope.

Byte fields travel as unpadded base64url. Credentials (certificates,
tickets, pseudonyms) travel as the base64url of their canonical encoding,
and every signature is checked against bytes re-derived from the decoded
fields, so JSON key order or whitespace never affects verification.
"""

from __future__ import annotations

import base64
import binascii
import json

from ..core.messages import (
    Csr,
    ForeignTicketRequest,
    PseudonymRequest,
    PseudonymResponse,
    ResolveRequest,
    ResolveResponse,
    TicketRequest,
    TicketResponse,
    ValidationReport,
    ValidationRequest,
)
from ..core.types import Certificate, Pseudonym, Ticket
from ..errors import BadRequest, EncodingError


_URLSAFE = str.maketrans("-_", "+/")


def b64e(data: bytes) -> str:
    return base64.urlsafe_b64encode(bytes(data)).rstrip(b"=").decode("ascii")


def b64d(text: str) -> bytes:
    if not isinstance(text, str):
        raise BadRequest("expected base64url string")
    try:
        std = text.translate(_URLSAFE) + "=" * (-len(text) % 4)
        return base64.b64decode(std, validate=True)
    except (binascii.Error, ValueError) as exc:
        raise BadRequest(f"bad base64url: {exc}") from exc


def dumps(obj: dict) -> bytes:
    return json.dumps(obj, separators=(",", ":")).encode()


def loads(data: bytes) -> dict:
    try:
        obj = json.loads(data or b"{}")
    except json.JSONDecodeError as exc:
        raise BadRequest(f"bad JSON: {exc}") from exc
    if not isinstance(obj, dict):
        raise BadRequest("JSON body must be an object")
    return obj


def _get(d: dict, key: str):
    try:
        return d[key]
    except KeyError:
        raise BadRequest(f"missing field {key!r}") from None


def _int(d: dict, key: str) -> int:
    v = _get(d, key)
    if not isinstance(v, int) or isinstance(v, bool):
        raise BadRequest(f"field {key!r} must be an integer")
    return v


def _bytes(d: dict, key: str) -> bytes:
    return b64d(_get(d, key))


def _decode(cls, d: dict, key: str):
    try:
        return cls.decode(_bytes(d, key))
    except EncodingError as exc:
        raise BadRequest(f"field {key!r}: {exc}") from exc


# --- ticket leg -----------------------------------------------------------


def ticket_request_to_json(r: TicketRequest) -> dict:
    return {
        "id_req": r.id_req,
        "target_hash": b64e(r.target_hash),
        "t_s": r.t_s,
        "t_e": r.t_e,
        "nonce": r.nonce,
        "t_now": r.t_now,
        "ltc": b64e(r.ltc.encode()),
        "signature": b64e(r.signature),
    }


def ticket_request_from_json(d: dict) -> TicketRequest:
    return TicketRequest(
        id_req=_int(d, "id_req"),
        target_hash=_bytes(d, "target_hash"),
        t_s=_int(d, "t_s"),
        t_e=_int(d, "t_e"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
        ltc=_decode(Certificate, d, "ltc"),
        signature=_bytes(d, "signature"),
    )


def foreign_ticket_request_to_json(r: ForeignTicketRequest) -> dict:
    return {
        "id_req": r.id_req,
        "f_ticket": b64e(r.f_ticket.encode()),
        "rnd_f_tkt": b64e(r.rnd_f_tkt),
        "target_hash": b64e(r.target_hash),
        "t_s": r.t_s,
        "t_e": r.t_e,
        "nonce": r.nonce,
        "t_now": r.t_now,
    }


def foreign_ticket_request_from_json(d: dict) -> ForeignTicketRequest:
    return ForeignTicketRequest(
        id_req=_int(d, "id_req"),
        f_ticket=_decode(Ticket, d, "f_ticket"),
        rnd_f_tkt=_bytes(d, "rnd_f_tkt"),
        target_hash=_bytes(d, "target_hash"),
        t_s=_int(d, "t_s"),
        t_e=_int(d, "t_e"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
    )


def ticket_response_to_json(r: TicketResponse) -> dict:
    return {
        "id_res": r.id_res,
        "ticket": b64e(r.ticket.encode()),
        "rnd_ik_tkt": b64e(r.rnd_ik_tkt),
        "nonce": r.nonce,
        "t_now": r.t_now,
    }


def ticket_response_from_json(d: dict) -> TicketResponse:
    return TicketResponse(
        id_res=_int(d, "id_res"),
        ticket=_decode(Ticket, d, "ticket"),
        rnd_ik_tkt=_bytes(d, "rnd_ik_tkt"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
    )


# --- pseudonym leg --------------------------------------------------------


def pseudonym_request_to_json(r: PseudonymRequest) -> dict:
    return {
        "id_req": r.id_req,
        "rnd_n_tkt": b64e(r.rnd_n_tkt),
        "ticket": b64e(r.ticket.encode()),
        "csrs": [{"public_key": b64e(c.public_key), "signature": b64e(c.signature)} for c in r.csrs],
        "nonce": r.nonce,
        "t_now": r.t_now,
    }


def pseudonym_request_from_json(d: dict) -> PseudonymRequest:
    csrs = _get(d, "csrs")
    if not isinstance(csrs, list):
        raise BadRequest("csrs must be a list")
    return PseudonymRequest(
        id_req=_int(d, "id_req"),
        rnd_n_tkt=_bytes(d, "rnd_n_tkt"),
        ticket=_decode(Ticket, d, "ticket"),
        csrs=tuple(Csr(_bytes(c, "public_key"), _bytes(c, "signature")) for c in csrs),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
    )


def pseudonym_response_to_json(r: PseudonymResponse) -> dict:
    return {
        "id_res": r.id_res,
        "pseudonyms": [b64e(p.encode()) for p in r.pseudonyms],
        "rnd_v": b64e(r.rnd_v),
        "nonce": r.nonce,
        "t_now": r.t_now,
    }


def pseudonym_response_from_json(d: dict) -> PseudonymResponse:
    items = _get(d, "pseudonyms")
    if not isinstance(items, list):
        raise BadRequest("pseudonyms must be a list")
    try:
        batch = tuple(Pseudonym.decode(b64d(x)) for x in items)
    except EncodingError as exc:
        raise BadRequest(f"pseudonyms: {exc}") from exc
    return PseudonymResponse(
        id_res=_int(d, "id_res"),
        pseudonyms=batch,
        rnd_v=_bytes(d, "rnd_v"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
    )


# --- resolution and validation --------------------------------------------


def resolve_request_to_json(r: ResolveRequest) -> dict:
    return {
        "id_req": r.id_req,
        "pseudonym": b64e(r.pseudonym.encode()),
        "ra_cert": b64e(r.ra_cert.encode()),
        "nonce": r.nonce,
        "t_now": r.t_now,
        "signature": b64e(r.signature),
    }


def resolve_request_from_json(d: dict) -> ResolveRequest:
    return ResolveRequest(
        id_req=_int(d, "id_req"),
        pseudonym=_decode(Pseudonym, d, "pseudonym"),
        ra_cert=_decode(Certificate, d, "ra_cert"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
        signature=_bytes(d, "signature"),
    )


def resolve_response_to_json(r: ResolveResponse) -> dict:
    return {
        "id_res": r.id_res,
        "serial": b64e(r.serial),
        "ticket": b64e(r.ticket.encode()),
        "rnd_ik_p": b64e(r.rnd_ik_p),
        "nonce": r.nonce,
        "t_now": r.t_now,
        "signature": b64e(r.signature),
    }


def resolve_response_from_json(d: dict) -> ResolveResponse:
    return ResolveResponse(
        id_res=_int(d, "id_res"),
        serial=_bytes(d, "serial"),
        ticket=_decode(Ticket, d, "ticket"),
        rnd_ik_p=_bytes(d, "rnd_ik_p"),
        nonce=_int(d, "nonce"),
        t_now=_int(d, "t_now"),
        signature=_bytes(d, "signature"),
    )


def validation_request_to_json(r: ValidationRequest) -> dict:
    return {
        "id_req": r.id_req,
        "suspect": b64e(r.suspect.encode()),
        "reporter": b64e(r.reporter.encode()),
        "t_now": r.t_now,
        "signature": b64e(r.signature),
    }


def validation_request_from_json(d: dict) -> ValidationRequest:
    return ValidationRequest(
        id_req=_int(d, "id_req"),
        suspect=_decode(Pseudonym, d, "suspect"),
        reporter=_decode(Pseudonym, d, "reporter"),
        t_now=_int(d, "t_now"),
        signature=_bytes(d, "signature"),
    )


def _opt(b: bytes | None) -> str | None:
    return None if b is None else b64e(b)


def report_to_json(r: ValidationReport) -> dict:
    return {
        "serial": b64e(r.serial),
        "verdict": r.verdict,
        "stage": r.stage,
        "ticket_serial": _opt(r.ticket_serial),
        "pca_id": r.pca_id,
        "recomputed_ik": _opt(r.recomputed_ik),
        "claimed_ik": _opt(r.claimed_ik),
    }


def report_from_json(d: dict) -> ValidationReport:
    def opt(key):
        v = d.get(key)
        return None if v is None else b64d(v)

    return ValidationReport(
        serial=_bytes(d, "serial"),
        verdict=_get(d, "verdict"),
        stage=d.get("stage"),
        ticket_serial=opt("ticket_serial"),
        pca_id=d.get("pca_id", ""),
        recomputed_ik=opt("recomputed_ik"),
        claimed_ik=opt("claimed_ik"),
    )


# --- registration ---------------------------------------------------------


def certificate_to_json(c: Certificate) -> dict:
    return {"certificate": b64e(c.encode())}


def certificate_from_json(d: dict) -> Certificate:
    return _decode(Certificate, d, "certificate")
