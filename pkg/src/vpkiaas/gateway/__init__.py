"""Transport, discovery, trust bootstrap and metrics."""

from .apps import App, discovery_app, ltca_app, pca_app, ra_app
from .clients import DiscoveryClient, LtcaClient, PcaClient, RaClient
from .config import ServiceConfig, load_config
from .discovery import DomainDescriptor, PcaEntry, Registry, descriptor_for
from .metrics import LoadMeter, Metrics
from .transport import HttpTransport, InProcessTransport, Transcript

__all__ = [
    "App", "discovery_app", "ltca_app", "pca_app", "ra_app",
    "DiscoveryClient", "LtcaClient", "PcaClient", "RaClient",
    "ServiceConfig", "load_config",
    "DomainDescriptor", "PcaEntry", "Registry", "descriptor_for",
    "LoadMeter", "Metrics",
    "HttpTransport", "InProcessTransport", "Transcript",
]
