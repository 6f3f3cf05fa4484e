"""Trust bootstrap: an RCA certifying the CAs of one VPKI domain.

``Domain.create`` builds an in-process domain (RCA, LTCA, PCAs, RA) that
shares one guard store per service kind, the way replicas share one store.
"""

from __future__ import annotations

import time
from dataclasses import dataclass, field

from ..core import crypto
from ..core.trust import TrustStore, certify, self_signed
from ..core.types import CaIdentity, Certificate
from ..guard import GuardStore
from ..records import RecordStore
from .config import ServiceConfig

CA_LIFETIME = 10 * 365 * 86_400


def rca_certify(rca: CaIdentity, ca_public_key: bytes, ca_id: str,
                valid_from: int | None = None, lifetime: int = CA_LIFETIME) -> Certificate:
    """Offline certification of a lower-level CA by the root (or a peer CA)."""
    valid_from = int(time.time()) - 60 if valid_from is None else valid_from
    return certify(rca.id, rca.keys, ca_public_key, ca_id, valid_from, valid_from + lifetime)


def make_rca(rca_id: str, valid_from: int | None = None) -> CaIdentity:
    keys = crypto.keygen()
    valid_from = int(time.time()) - 60 if valid_from is None else valid_from
    cert = self_signed(keys, rca_id, valid_from, valid_from + CA_LIFETIME)
    return CaIdentity(rca_id, cert, keys)


def make_ca(issuer: CaIdentity, ca_id: str) -> CaIdentity:
    keys = crypto.keygen()
    cert = rca_certify(issuer, keys.public, ca_id, issuer.certificate.valid_from)
    return CaIdentity(ca_id, cert, keys)


@dataclass
class Domain:
    id: str
    rca: CaIdentity
    trust: TrustStore
    config: ServiceConfig
    ltca: object
    pcas: dict = field(default_factory=dict)
    ra: object = None
    ltca_guard: GuardStore | None = None
    pca_guard: GuardStore | None = None

    @property
    def pca(self):
        return next(iter(self.pcas.values()))

    @classmethod
    def create(cls, domain_id: str = "d1", pca_ids=("pca-1",), config: ServiceConfig | None = None,
               clock=time.time, ltca_records: RecordStore | None = None,
               pca_records: RecordStore | None = None, ltca_guard=None, pca_guard=None,
               with_ra: bool = True) -> "Domain":
        from ..ltca import LTCA
        from ..pca import PCA
        from ..ra import RA

        config = config or ServiceConfig()
        rca = make_rca(f"{domain_id}-rca", int(clock()) - 60)
        trust = TrustStore([rca.certificate])
        ltca_id = make_ca(rca, f"{domain_id}-ltca")
        ra_id = make_ca(rca, f"{domain_id}-ra")
        trust.add(ltca_id.certificate)
        trust.add(ra_id.certificate)
        pca_idents = [make_ca(rca, pid) for pid in pca_ids]
        for p in pca_idents:
            trust.add(p.certificate)

        ltca_guard = ltca_guard if ltca_guard is not None else GuardStore()
        pca_guard = pca_guard if pca_guard is not None else GuardStore()
        ltca = LTCA(ltca_id, trust, ltca_guard, ltca_records, config, clock)
        pcas = {
            p.id: PCA(p, trust, pca_guard, pca_records, config, clock, ra_ids=[ra_id.id])
            for p in pca_idents
        }
        ra = None
        if with_ra:
            ra = RA(ra_id, trust, {pid: pca.resolve_pseudonym for pid, pca in pcas.items()},
                    config, clock)
        return cls(domain_id, rca, trust, config, ltca, pcas, ra, ltca_guard, pca_guard)

    def replica(self, kind: str, pca_id: str | None = None):
        """Another instance of a service sharing keys, guard and records."""
        from ..ltca import LTCA
        from ..pca import PCA

        if kind == "ltca":
            src = self.ltca
            return LTCA(src.identity, self.trust, self.ltca_guard, src.records, self.config, src.clock)
        src = self.pcas[pca_id] if pca_id else self.pca
        return PCA(src.identity, self.trust, self.pca_guard, src.records, self.config, src.clock,
                   ra_ids=src.ra_ids)

    def cross_certify(self, other: "Domain") -> None:
        """Trust ``other``'s CAs here, via a certificate from this domain's RCA."""
        for ident in [other.ltca.identity, *[p.identity for p in other.pcas.values()]]:
            self.trust.add(rca_certify(self.rca, ident.public_key, ident.id,
                                       self.rca.certificate.valid_from))
