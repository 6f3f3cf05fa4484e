"""Exception types shared by every service.

Each class carries a stable ``code`` used on the wire, so a client can map an
HTTP error body back to the same exception it would have seen in-process.
"""

from __future__ import annotations


class VpkiError(Exception):
    code = "VpkiError"
    status = 400
    retryable = False

    def __init__(self, message: str = "", **detail):
        super().__init__(message or self.code)
        self.detail = detail


class EncodingError(VpkiError):
    code = "EncodingError"


class BadRequest(VpkiError):
    code = "BadRequest"


class StaleTimestamp(VpkiError):
    code = "StaleTimestamp"


class BadSignature(VpkiError):
    code = "BadSignature"
    status = 401


class UnknownOrExpiredLTC(VpkiError):
    code = "UnknownOrExpiredLTC"
    status = 401


class DuplicateRegistration(VpkiError):
    code = "DuplicateRegistration"
    status = 409


class SybilDenied(VpkiError):
    code = "SybilDenied"
    status = 409


class GuardUnavailable(VpkiError):
    code = "GuardUnavailable"
    status = 503
    retryable = True


class UntrustedIssuer(VpkiError):
    code = "UntrustedIssuer"
    status = 401


class ReusedForeignTicket(VpkiError):
    code = "ReusedForeignTicket"
    status = 409


class UntrustedLTCA(VpkiError):
    code = "UntrustedLTCA"
    status = 401


class TargetMismatch(VpkiError):
    code = "TargetMismatch"
    status = 403


class ExpiredTicket(VpkiError):
    code = "ExpiredTicket"
    status = 403


class TicketReused(VpkiError):
    code = "TicketReused"
    status = 409


class BadCSR(VpkiError):
    code = "BadCSR"


class BatchTooLarge(VpkiError):
    code = "BatchTooLarge"


class WindowMisaligned(VpkiError):
    code = "WindowMisaligned"


class NotFound(VpkiError):
    code = "NotFound"
    status = 404


class UnauthorizedCaller(VpkiError):
    code = "UnauthorizedCaller"
    status = 401


class BadReporterSignature(VpkiError):
    code = "BadReporterSignature"
    status = 401


class UnknownPCA(VpkiError):
    code = "UnknownPCA"
    status = 404


class PCARefused(VpkiError):
    code = "PCARefused"
    status = 502


class BadPCASignature(VpkiError):
    code = "BadPCASignature"
    status = 502


class BadTicketSignature(VpkiError):
    code = "BadTicketSignature"
    status = 502


class RateLimited(VpkiError):
    code = "RateLimited"
    status = 429
    retryable = True


class ProviderMisbehavior(VpkiError):
    code = "ProviderMisbehavior"
    status = 502


class UnknownDomain(VpkiError):
    code = "UnknownDomain"
    status = 404


class Backpressure(VpkiError):
    """Record queue is full; the caller may retry later."""

    code = "Backpressure"
    status = 503
    retryable = True


class TransportError(VpkiError):
    code = "TransportError"
    status = 502
    retryable = True


_BY_CODE = {
    cls.code: cls
    for cls in list(globals().values())
    if isinstance(cls, type) and issubclass(cls, VpkiError)
}


def from_code(code: str, message: str = "") -> VpkiError:
    return _BY_CODE.get(code, VpkiError)(message)
