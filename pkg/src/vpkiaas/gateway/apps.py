"""Route tables binding each service's operations to JSON endpoints."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Callable

from ..errors import BadRequest, NotFound, VpkiError
from . import wire

logger = logging.getLogger(__name__)

Handler = Callable[[dict], dict]


@dataclass
class App:
    """A table of (method, path) -> handler taking and returning JSON objects."""

    name: str
    routes: dict[tuple[str, str], Handler] = field(default_factory=dict)
    prefixes: dict[tuple[str, str], Callable[[str], dict]] = field(default_factory=dict)

    def route(self, method: str, path: str, handler: Handler) -> None:
        self.routes[(method, path)] = handler

    def handle(self, method: str, path: str, body: bytes = b"") -> tuple[int, bytes]:
        try:
            handler = self.routes.get((method, path))
            if handler is not None:
                return 200, wire.dumps(handler(wire.loads(body) if method == "POST" else {}))
            for (m, prefix), fn in self.prefixes.items():
                if m == method and path.startswith(prefix):
                    return 200, wire.dumps(fn(path[len(prefix):]))
            raise NotFound(f"no route {method} {path}")
        except VpkiError as exc:
            return exc.status, wire.dumps({"error": exc.code, "message": str(exc)})
        except (TypeError, ValueError, KeyError, AttributeError) as exc:
            err = BadRequest(f"malformed request: {exc}")
            return err.status, wire.dumps({"error": err.code, "message": str(err)})
        except Exception as exc:  # noqa: BLE001
            logger.exception("%s: unhandled error on %s %s", self.name, method, path)
            return 500, wire.dumps({"error": "Internal", "message": type(exc).__name__})


def _health_route(app: App, service) -> None:
    def health(_):
        h = service.health_selfcheck()
        return {"healthy": h.healthy, "stage": h.stage, "reason": h.reason}

    app.route("GET", "/v1/health", health)
    app.route("GET", "/v1/metrics", lambda _: service.metrics().as_dict())


def ltca_app(ltca) -> App:
    app = App(ltca.id)

    def register(d):
        return wire.certificate_to_json(ltca.register_vehicle(wire.b64d(d.get("public_key", ""))))

    app.route("POST", "/v1/register", register)
    app.route("POST", "/v1/ticket", lambda d: wire.ticket_response_to_json(
        ltca.issue_ticket(wire.ticket_request_from_json(d))))
    app.route("POST", "/v1/foreign-ticket", lambda d: wire.ticket_response_to_json(
        ltca.issue_foreign_ticket(wire.foreign_ticket_request_from_json(d))))
    _health_route(app, ltca)
    return app


def pca_app(pca) -> App:
    app = App(pca.id)
    app.route("POST", "/v1/pseudonyms", lambda d: wire.pseudonym_response_to_json(
        pca.issue_pseudonyms(wire.pseudonym_request_from_json(d))))
    app.route("POST", "/v1/resolve", lambda d: wire.resolve_response_to_json(
        pca.resolve_pseudonym(wire.resolve_request_from_json(d))))
    _health_route(app, pca)
    return app


def ra_app(ra) -> App:
    app = App(ra.id)
    app.route("POST", "/v1/validate", lambda d: wire.report_to_json(
        ra.validate_issuance(wire.validation_request_from_json(d))))
    _health_route(app, ra)
    return app


def discovery_app(registry) -> App:
    app = App("discovery")
    app.prefixes[("GET", "/v1/discovery/")] = lambda domain_id: registry.discover(domain_id).to_json()
    return app
