"""Wire clients exposing the same method names as the service objects.

A :class:`vpkiaas.client.Vehicle` or the RA can use these interchangeably
with in-process services.
"""

from __future__ import annotations

from .. import errors
from . import wire


class _Client:
    def __init__(self, transport):
        self.transport = transport

    def _call(self, method: str, path: str, payload: dict | None = None) -> dict:
        body = wire.dumps(payload) if payload is not None else b""
        status, out = self.transport.request(method, path, body)
        try:
            data = wire.loads(out)
        except errors.BadRequest as exc:
            raise errors.TransportError(f"unparseable response ({status})") from exc
        if status != 200:
            raise errors.from_code(data.get("error", "VpkiError"), data.get("message", ""))
        return data

    def health(self) -> dict:
        return self._call("GET", "/v1/health")

    def metrics(self) -> dict:
        return self._call("GET", "/v1/metrics")


class LtcaClient(_Client):
    def register_vehicle(self, public_key: bytes):
        d = self._call("POST", "/v1/register", {"public_key": wire.b64e(public_key)})
        return wire.certificate_from_json(d)

    def issue_ticket(self, req):
        return wire.ticket_response_from_json(
            self._call("POST", "/v1/ticket", wire.ticket_request_to_json(req)))

    def issue_foreign_ticket(self, req):
        return wire.ticket_response_from_json(
            self._call("POST", "/v1/foreign-ticket", wire.foreign_ticket_request_to_json(req)))


class PcaClient(_Client):
    def issue_pseudonyms(self, req):
        return wire.pseudonym_response_from_json(
            self._call("POST", "/v1/pseudonyms", wire.pseudonym_request_to_json(req)))

    def resolve_pseudonym(self, req):
        return wire.resolve_response_from_json(
            self._call("POST", "/v1/resolve", wire.resolve_request_to_json(req)))


class RaClient(_Client):
    def validate_issuance(self, req):
        return wire.report_from_json(
            self._call("POST", "/v1/validate", wire.validation_request_to_json(req)))


class DiscoveryClient(_Client):
    def discover(self, domain_id: str):
        from .discovery import DomainDescriptor

        return DomainDescriptor.from_json(self._call("GET", f"/v1/discovery/{domain_id}"))
