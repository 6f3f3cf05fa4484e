"""Domain types, canonical encoding, hashing and signatures."""

from .crypto import KeyPair, gen_id, gen_rnd, gen_serial, keygen, sign, verify
from .encoding import (
    canonical_decode,
    canonical_encode,
    hash,
    hash_fields,
    int_field,
    iterated_hash,
    str_field,
)
from .trust import TrustStore, certify, self_signed
from .types import CaIdentity, Certificate, LongTermCertificate, Pseudonym, Ticket

__all__ = [
    "CaIdentity",
    "Certificate",
    "KeyPair",
    "LongTermCertificate",
    "Pseudonym",
    "Ticket",
    "TrustStore",
    "canonical_decode",
    "canonical_encode",
    "certify",
    "gen_id",
    "gen_rnd",
    "gen_serial",
    "hash",
    "hash_fields",
    "int_field",
    "iterated_hash",
    "keygen",
    "self_signed",
    "sign",
    "str_field",
    "verify",
]
