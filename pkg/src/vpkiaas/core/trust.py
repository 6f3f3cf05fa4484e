from __future__ import annotations

import threading

from ..errors import UntrustedIssuer
from . import crypto
from .types import Certificate


def self_signed(keys: crypto.KeyPair, ca_id: str, valid_from: int, valid_to: int) -> Certificate:
    cert = Certificate(
        serial=crypto.gen_serial(),
        subject_public_key=keys.public,
        issuer_id=ca_id,
        valid_from=valid_from,
        valid_to=valid_to,
        subject_id=ca_id,
    )
    return cert.signed(keys.private)


def certify(
    issuer_id: str,
    issuer_keys: crypto.KeyPair,
    subject_public_key: bytes,
    subject_id: str,
    valid_from: int,
    valid_to: int,
) -> Certificate:
    """Sign a CA certificate for ``subject_id`` (RCA or cross-certification)."""
    cert = Certificate(
        serial=crypto.gen_serial(),
        subject_public_key=subject_public_key,
        issuer_id=issuer_id,
        valid_from=valid_from,
        valid_to=valid_to,
        subject_id=subject_id,
    )
    return cert.signed(issuer_keys.private)


class TrustStore:
    """Trusted CA certificates indexed by CA id.

    A certificate is only admitted if its issuer is already trusted (or it is
    an explicitly installed anchor), so every entry chains to an anchor.
    """

    def __init__(self, anchors: list[Certificate] = ()):
        self._certs: dict[str, Certificate] = {}
        self._lock = threading.Lock()
        for a in anchors:
            self.add_anchor(a)

    def add_anchor(self, cert: Certificate) -> None:
        if not cert.subject_id:
            raise UntrustedIssuer("anchor certificate has no subject id")
        if not cert.verify_signature(cert.subject_public_key):
            raise UntrustedIssuer(f"anchor {cert.subject_id} is not self-signed")
        with self._lock:
            self._certs[cert.subject_id] = cert

    def add(self, cert: Certificate, now: float | None = None) -> None:
        if not cert.subject_id:
            raise UntrustedIssuer("CA certificate has no subject id")
        issuer = self.get(cert.issuer_id)
        if issuer is None:
            raise UntrustedIssuer(f"issuer {cert.issuer_id!r} not trusted")
        if not cert.verify_signature(issuer.subject_public_key):
            raise UntrustedIssuer(f"bad signature on certificate of {cert.subject_id}")
        if now is not None and not cert.valid_at(now):
            raise UntrustedIssuer(f"certificate of {cert.subject_id} not valid now")
        with self._lock:
            self._certs[cert.subject_id] = cert

    def get(self, ca_id: str) -> Certificate | None:
        return self._certs.get(ca_id)

    def public_key(self, ca_id: str) -> bytes | None:
        cert = self._certs.get(ca_id)
        return cert.subject_public_key if cert else None

    def chain(self, ca_id: str) -> list[Certificate]:
        """Certificates from ``ca_id`` up to its anchor."""
        out = []
        seen = set()
        cur = self._certs.get(ca_id)
        while cur is not None and cur.subject_id not in seen:
            out.append(cur)
            seen.add(cur.subject_id)
            if cur.issuer_id == cur.subject_id:
                break
            cur = self._certs.get(cur.issuer_id)
        return out

    def validates(self, ca_id: str) -> bool:
        chain = self.chain(ca_id)
        if not chain:
            return False
        for cert, parent in zip(chain, chain[1:] + [chain[-1]]):
            if not cert.verify_signature(parent.subject_public_key):
                return False
        top = chain[-1]
        return top.issuer_id == top.subject_id

    def ids(self) -> list[str]:
        return sorted(self._certs)

    def __contains__(self, ca_id: str) -> bool:
        return ca_id in self._certs
