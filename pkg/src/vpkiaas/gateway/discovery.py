"""Static domain registry standing in for the directory service.

Vehicles fetch a descriptor without authenticating, then verify every
certificate in it against their own trust anchors.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field
from pathlib import Path

from ..core.trust import TrustStore
from ..core.types import Certificate
from ..errors import UnknownDomain, UntrustedIssuer
from .wire import b64d, b64e


@dataclass(frozen=True)
class PcaEntry:
    id: str
    endpoint: str
    certificate: Certificate
    tau_p: int
    gamma: int


@dataclass(frozen=True)
class DomainDescriptor:
    domain_id: str
    ltca_id: str
    ltca_endpoint: str
    ltca_certificate: Certificate
    pcas: tuple[PcaEntry, ...] = ()
    epoch: int = 0
    ra_endpoint: str = ""

    def pca(self, pca_id: str) -> PcaEntry:
        for p in self.pcas:
            if p.id == pca_id:
                return p
        raise KeyError(pca_id)

    def certificates(self) -> list[Certificate]:
        return [self.ltca_certificate, *[p.certificate for p in self.pcas]]

    def verify(self, trust: TrustStore) -> None:
        """Add every CA certificate to ``trust``; raises UntrustedIssuer if one fails to chain."""
        for cert in self.certificates():
            trust.add(cert)
            if not trust.validates(cert.subject_id):
                raise UntrustedIssuer(f"{cert.subject_id!r} does not chain to an anchor")

    def to_json(self) -> dict:
        return {
            "domain_id": self.domain_id,
            "ltca": {"id": self.ltca_id, "endpoint": self.ltca_endpoint,
                     "certificate": b64e(self.ltca_certificate.encode())},
            "pcas": [
                {"id": p.id, "endpoint": p.endpoint, "certificate": b64e(p.certificate.encode()),
                 "tau_p": p.tau_p, "gamma": p.gamma}
                for p in self.pcas
            ],
            "epoch": self.epoch,
            "ra_endpoint": self.ra_endpoint,
        }

    @classmethod
    def from_json(cls, d: dict) -> "DomainDescriptor":
        lt = d["ltca"]
        return cls(
            domain_id=d["domain_id"],
            ltca_id=lt["id"],
            ltca_endpoint=lt["endpoint"],
            ltca_certificate=Certificate.decode(b64d(lt["certificate"])),
            pcas=tuple(
                PcaEntry(p["id"], p["endpoint"], Certificate.decode(b64d(p["certificate"])),
                         int(p["tau_p"]), int(p["gamma"]))
                for p in d.get("pcas", [])
            ),
            epoch=int(d.get("epoch", 0)),
            ra_endpoint=d.get("ra_endpoint", ""),
        )


@dataclass
class Registry:
    domains: dict[str, DomainDescriptor] = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    def register(self, desc: DomainDescriptor) -> None:
        with self._lock:
            self.domains[desc.domain_id] = desc

    def discover(self, domain_id: str) -> DomainDescriptor:
        with self._lock:
            desc = self.domains.get(domain_id)
        if desc is None:
            raise UnknownDomain(f"no domain {domain_id!r}")
        return desc

    def save(self, path) -> None:
        with self._lock:
            data = {"domains": [d.to_json() for d in self.domains.values()]}
        Path(path).write_text(json.dumps(data, indent=2))

    @classmethod
    def load(cls, path) -> "Registry":
        data = json.loads(Path(path).read_text())
        reg = cls()
        for d in data.get("domains", []):
            reg.register(DomainDescriptor.from_json(d))
        return reg


def descriptor_for(domain, endpoints: dict[str, str] | None = None) -> DomainDescriptor:
    """Descriptor of an in-process :class:`~vpkiaas.gateway.domain.Domain`."""
    endpoints = endpoints or {}
    cfg = domain.config
    return DomainDescriptor(
        domain_id=domain.id,
        ltca_id=domain.ltca.id,
        ltca_endpoint=endpoints.get(domain.ltca.id, ""),
        ltca_certificate=domain.ltca.certificate,
        pcas=tuple(
            PcaEntry(pid, endpoints.get(pid, ""), p.certificate, cfg.tau_p, cfg.gamma)
            for pid, p in domain.pcas.items()
        ),
        epoch=cfg.epoch,
        ra_endpoint=endpoints.get(domain.ra.id, "") if domain.ra is not None else "",
    )
