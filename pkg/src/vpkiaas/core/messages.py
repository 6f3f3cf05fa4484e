"""Request/response envelopes exchanged between vehicles and services.

``payload()`` returns the exact bytes a signature covers. Timestamps named
``t_now`` are UTC milliseconds; validity windows are UTC seconds.
"""

from __future__ import annotations

from dataclasses import dataclass, field

from .encoding import canonical_encode, int_field, str_field
from .types import Certificate, Pseudonym, Ticket


@dataclass(frozen=True)
class TicketRequest:
    id_req: int
    target_hash: bytes
    t_s: int
    t_e: int
    nonce: int
    t_now: int
    ltc: Certificate
    signature: bytes = b""

    def payload(self) -> bytes:
        return canonical_encode(
            [
                int_field(self.id_req),
                self.target_hash,
                int_field(self.t_s),
                int_field(self.t_e),
                int_field(self.nonce),
                int_field(self.t_now),
            ]
        )


@dataclass(frozen=True)
class ForeignTicketRequest:
    """n-tkt request to a foreign LTCA, authenticated by an f-tkt.

    ``rnd_f_tkt`` opens the f-tkt's target hash, proving both possession and
    that the f-tkt was bound to this LTCA.
    """

    id_req: int
    f_ticket: Ticket
    rnd_f_tkt: bytes
    target_hash: bytes
    t_s: int
    t_e: int
    nonce: int
    t_now: int


@dataclass(frozen=True)
class TicketResponse:
    id_res: int
    ticket: Ticket
    rnd_ik_tkt: bytes
    nonce: int
    t_now: int


@dataclass(frozen=True)
class Csr:
    public_key: bytes
    signature: bytes

    @staticmethod
    def payload_for(public_key: bytes, sn_tkt: bytes) -> bytes:
        return canonical_encode([b"csr", public_key, sn_tkt])


@dataclass(frozen=True)
class PseudonymRequest:
    id_req: int
    rnd_n_tkt: bytes
    ticket: Ticket
    csrs: tuple[Csr, ...]
    nonce: int
    t_now: int


@dataclass(frozen=True)
class PseudonymResponse:
    id_res: int
    pseudonyms: tuple[Pseudonym, ...]
    rnd_v: bytes
    nonce: int
    t_now: int


@dataclass(frozen=True)
class ResolveRequest:
    id_req: int
    pseudonym: Pseudonym
    ra_cert: Certificate
    nonce: int
    t_now: int
    signature: bytes = b""

    def payload(self) -> bytes:
        return canonical_encode(
            [
                int_field(self.id_req),
                self.pseudonym.encode(),
                int_field(self.nonce),
                int_field(self.t_now),
            ]
        )


@dataclass(frozen=True)
class ResolveResponse:
    id_res: int
    serial: bytes
    ticket: Ticket
    rnd_ik_p: bytes
    nonce: int
    t_now: int
    signature: bytes = b""

    def payload(self) -> bytes:
        return canonical_encode(
            [self.serial, self.ticket.encode(), self.rnd_ik_p, int_field(self.nonce)]
        )


@dataclass(frozen=True)
class ValidationRequest:
    id_req: int
    suspect: Pseudonym
    reporter: Pseudonym
    t_now: int
    signature: bytes = b""

    def payload(self) -> bytes:
        return canonical_encode(
            [int_field(self.id_req), self.suspect.encode(), int_field(self.t_now)]
        )


VALID = "ValidIssuance"
INVALID = "InvalidIssuance"


@dataclass(frozen=True)
class ValidationReport:
    serial: bytes
    verdict: str
    stage: str | None = None
    ticket_serial: bytes | None = None
    pca_id: str = ""
    recomputed_ik: bytes | None = None
    claimed_ik: bytes | None = None
    notes: dict = field(default_factory=dict)

    @property
    def valid(self) -> bool:
        return self.verdict == VALID

    def encode(self) -> bytes:
        return canonical_encode(
            [
                self.serial,
                str_field(self.verdict),
                str_field(self.stage or ""),
                self.ticket_serial or b"",
                str_field(self.pca_id),
                self.recomputed_ik or b"",
                self.claimed_ik or b"",
            ]
        )
