"""Credential types and their canonical byte forms.

Field order of every ``tbs_fields`` tuple is the contract for signatures:
certificates follow (serial, key, issuer, validity...), tickets follow
(SN, target hash, IK_tkt, t_s, t_e, Exp_tkt) and pseudonyms follow
(SN, K, IK_P, t_s, t_e). Issuer identifiers are appended last.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

from ..errors import EncodingError
from . import crypto
from .encoding import (
    canonical_decode,
    canonical_encode,
    check_digest,
    field_int,
    int_field,
    str_field,
)


def _expect(fields: list[bytes], n: int, what: str) -> list[bytes]:
    if len(fields) != n:
        raise EncodingError(f"{what}: expected {n} fields, got {len(fields)}")
    return fields


@dataclass(frozen=True)
class Certificate:
    """Long-term certificate of a vehicle, or a CA certificate.

    Vehicle LTCs leave ``subject_id`` empty; CA certificates carry the CA
    identifier there so a trust store can bind id to key.
    """

    serial: bytes
    subject_public_key: bytes
    issuer_id: str
    valid_from: int
    valid_to: int
    subject_id: str = ""
    sig_alg: str = crypto.SIG_ALG
    signature: bytes = b""

    def tbs_fields(self) -> list[bytes]:
        return [
            self.serial,
            self.subject_public_key,
            str_field(self.issuer_id),
            int_field(self.valid_from),
            int_field(self.valid_to),
            str_field(self.subject_id),
            str_field(self.sig_alg),
        ]

    def tbs(self) -> bytes:
        return canonical_encode(self.tbs_fields())

    def encode(self) -> bytes:
        return canonical_encode(self.tbs_fields() + [self.signature])

    @classmethod
    def decode(cls, data: bytes) -> "Certificate":
        f = _expect(canonical_decode(data), 8, "certificate")
        return cls(
            serial=f[0],
            subject_public_key=f[1],
            issuer_id=f[2].decode(),
            valid_from=field_int(f[3]),
            valid_to=field_int(f[4]),
            subject_id=f[5].decode(),
            sig_alg=f[6].decode(),
            signature=f[7],
        )

    def signed(self, private) -> "Certificate":
        return replace(self, signature=crypto.sign(private, self.tbs()))

    def verify_signature(self, issuer_public_key: bytes) -> bool:
        return crypto.verify(issuer_public_key, self.tbs(), self.signature)

    def valid_at(self, now: float) -> bool:
        return self.valid_from <= now < self.valid_to


# the protocol tables call the vehicle's certificate an LTC
LongTermCertificate = Certificate


@dataclass(frozen=True)
class Ticket:
    serial: bytes
    target_hash: bytes
    ik_tkt: bytes
    t_s: int
    t_e: int
    exp_tkt: int
    issuer_id: str
    signature: bytes = b""

    def __post_init__(self):
        check_digest(self.target_hash, "target_hash")
        check_digest(self.ik_tkt, "ik_tkt")

    def tbs_fields(self) -> list[bytes]:
        return [
            self.serial,
            self.target_hash,
            self.ik_tkt,
            int_field(self.t_s),
            int_field(self.t_e),
            int_field(self.exp_tkt),
            str_field(self.issuer_id),
        ]

    def tbs(self) -> bytes:
        return canonical_encode(self.tbs_fields())

    def encode(self) -> bytes:
        return canonical_encode(self.tbs_fields() + [self.signature])

    @classmethod
    def decode(cls, data: bytes) -> "Ticket":
        f = _expect(canonical_decode(data), 8, "ticket")
        return cls(
            serial=f[0],
            target_hash=f[1],
            ik_tkt=f[2],
            t_s=field_int(f[3]),
            t_e=field_int(f[4]),
            exp_tkt=field_int(f[5]),
            issuer_id=f[6].decode(),
            signature=f[7],
        )

    def signed(self, private) -> "Ticket":
        return replace(self, signature=crypto.sign(private, self.tbs()))

    def verify_signature(self, issuer_public_key: bytes) -> bool:
        return crypto.verify(issuer_public_key, self.tbs(), self.signature)


@dataclass(frozen=True)
class Pseudonym:
    serial: bytes
    public_key: bytes
    ik_p: bytes
    t_s: int
    t_e: int
    issuer_id: str
    signature: bytes = b""

    def tbs_fields(self) -> list[bytes]:
        return [
            self.serial,
            self.public_key,
            self.ik_p,
            int_field(self.t_s),
            int_field(self.t_e),
            str_field(self.issuer_id),
        ]

    def tbs(self) -> bytes:
        return canonical_encode(self.tbs_fields())

    def encode(self) -> bytes:
        return canonical_encode(self.tbs_fields() + [self.signature])

    @classmethod
    def decode(cls, data: bytes) -> "Pseudonym":
        f = _expect(canonical_decode(data), 7, "pseudonym")
        return cls(
            serial=f[0],
            public_key=f[1],
            ik_p=f[2],
            t_s=field_int(f[3]),
            t_e=field_int(f[4]),
            issuer_id=f[5].decode(),
            signature=f[6],
        )

    def signed(self, private) -> "Pseudonym":
        return replace(self, signature=crypto.sign(private, self.tbs()))

    def verify_signature(self, issuer_public_key: bytes) -> bool:
        return crypto.verify(issuer_public_key, self.tbs(), self.signature)

    def valid_at(self, now: float) -> bool:
        return self.t_s <= now < self.t_e


@dataclass(frozen=True)
class CaIdentity:
    """A CA's identifier, its certificate and (for the owner) its keys."""

    id: str
    certificate: Certificate
    keys: crypto.KeyPair | None = None

    @property
    def public_key(self) -> bytes:
        return self.certificate.subject_public_key
