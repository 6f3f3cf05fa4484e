import json
import random
import threading
import time

import pytest

from vpkiaas.client import Vehicle
from vpkiaas.core import crypto
from vpkiaas.core.trust import TrustStore
from vpkiaas.errors import (
    BadRequest,
    NotFound,
    SybilDenied,
    TransportError,
    UnknownDomain,
    UntrustedIssuer,
)
from vpkiaas.gateway import wire
from vpkiaas.gateway.apps import discovery_app, ltca_app, pca_app, ra_app
from vpkiaas.gateway.clients import DiscoveryClient, LtcaClient, PcaClient, RaClient
from vpkiaas.gateway.config import ServiceConfig, load_config
from vpkiaas.gateway.discovery import DomainDescriptor, Registry, descriptor_for
from vpkiaas.gateway.domain import Domain, make_ca, make_rca, rca_certify
from vpkiaas.gateway.http import AppServer
from vpkiaas.gateway.metrics import LoadMeter
from vpkiaas.gateway.transport import HttpTransport, InProcessTransport, Transcript

from conftest import T0, FakeClock

PAIRS = [
    ("ticket_request", "ticket_response"),
    ("pseudonym_request", "pseudonym_response"),
    ("resolve_request", "resolve_response"),
    ("validation_request", "report"),
]


def _shuffle(obj, rng):
    if isinstance(obj, dict):
        items = list(obj.items())
        rng.shuffle(items)
        return {k: _shuffle(v, rng) for k, v in items}
    if isinstance(obj, list):
        return [_shuffle(v, rng) for v in obj]
    return obj


@pytest.fixture
def envelopes(domain, vehicle):
    """One instance of every envelope, captured from a real flow."""
    out = {}
    req, rnd = vehicle.build_ticket_request("pca-1", T0, T0 + 1200)
    out["ticket_request"] = req
    resp = domain.ltca.issue_ticket(req)
    out["ticket_response"] = resp
    from vpkiaas.client import TicketHandle

    preq, keys = vehicle.build_pseudonym_request(TicketHandle(resp, rnd, "pca-1"), 3)
    out["pseudonym_request"] = preq
    presp = domain.pca.issue_pseudonyms(preq)
    out["pseudonym_response"] = presp
    vehicle.state.pool.extend(vehicle.verify_batch(preq, keys, presp, "pca-1"))
    vreq = vehicle.report(presp.pseudonyms[1])
    out["validation_request"] = vreq
    captured = {}
    honest = domain.pca.resolve_pseudonym

    def spy(r):
        captured["req"] = r
        captured["resp"] = honest(r)
        return captured["resp"]

    domain.ra.add_pca("pca-1", spy)
    out["report"] = domain.ra.validate_issuance(vreq)
    out["resolve_request"], out["resolve_response"] = captured["req"], captured["resp"]
    return out


@pytest.mark.parametrize("name", [n for pair in PAIRS for n in pair])
def test_wire_roundtrip_under_reordering(envelopes, name):
    obj = envelopes[name]
    to_json = getattr(wire, f"{name}_to_json")
    from_json = getattr(wire, f"{name}_from_json")
    data = wire.dumps(to_json(obj))
    rng = random.Random(name)
    for _ in range(5):
        reordered = json.dumps(_shuffle(json.loads(data), rng), indent=rng.choice([None, 2]))
        back = from_json(wire.loads(reordered.encode()))
        if name == "report":
            assert back.encode() == obj.encode()
        else:
            assert back == obj
        if hasattr(obj, "payload"):
            assert back.payload() == obj.payload()


def test_signatures_survive_wire(envelopes, domain):
    req = wire.ticket_request_from_json(json.loads(wire.dumps(
        wire.ticket_request_to_json(envelopes["ticket_request"]))))
    assert crypto.verify(req.ltc.subject_public_key, req.payload(), req.signature)
    resp = wire.pseudonym_response_from_json(json.loads(wire.dumps(
        wire.pseudonym_response_to_json(envelopes["pseudonym_response"]))))
    key = domain.pca.certificate.subject_public_key
    assert all(p.verify_signature(key) for p in resp.pseudonyms)


@pytest.mark.parametrize("text", ["!!!", 7, None])
def test_b64_rejects_garbage(text):
    with pytest.raises(BadRequest):
        wire.b64d(text)


def test_b64_unpadded():
    for n in range(6):
        s = wire.b64e(bytes(range(n)))
        assert "=" not in s and wire.b64d(s) == bytes(range(n))


def test_loads_rejects_non_objects():
    for body in (b"[1]", b"{", b'"x"'):
        with pytest.raises(BadRequest):
            wire.loads(body)


# --- apps and transports -------------------------------------------------


def _clients(domain, transcript=None):
    t = transcript or Transcript()
    ltca = LtcaClient(InProcessTransport(ltca_app(domain.ltca), "ltca", t))
    pca = PcaClient(InProcessTransport(pca_app(domain.pca), "pca", t))
    ra = RaClient(InProcessTransport(ra_app(domain.ra), "ra", t))
    return ltca, pca, ra, t


def test_in_process_full_flow(domain, clock):
    ltca, pca, ra, t = _clients(domain)
    v = Vehicle.enroll(ltca, domain.ltca.id, domain.trust, clock=clock)
    batch = v.acquire(ltca, pca, "pca-1", T0, T0 + 1200, 3)
    assert ra.validate_issuance(v.report(batch.entries[1].pseudonym)).valid
    assert b"pca-1" not in t.leg_bytes("ltca")
    legs = {ex.leg for ex in t.exchanges}
    assert legs == {"ltca", "pca", "ra"}


def test_errors_map_to_codes(domain, clock):
    ltca, _, _, _ = _clients(domain)
    v = Vehicle.enroll(ltca, domain.ltca.id, domain.trust, clock=clock)
    v.request_ticket(ltca, "pca-1", T0, T0 + 1200)
    with pytest.raises(SybilDenied):
        v.request_ticket(ltca, "pca-1", T0 + 600, T0 + 1800)
    app = ltca_app(domain.ltca)
    status, body = app.handle("POST", "/v1/ticket", b"{}")
    assert status == 400 and json.loads(body)["error"] == "BadRequest"
    status, body = app.handle("GET", "/nope")
    assert status == 404 and json.loads(body)["error"] == NotFound.code
    status, _ = app.handle("POST", "/v1/ticket", b"not json")
    assert status == 400


def test_unexpected_exception_is_500(domain):
    app = pca_app(domain.pca)

    def explode(_):
        raise RuntimeError("boom")

    app.route("POST", "/v1/pseudonyms", explode)
    status, body = app.handle("POST", "/v1/pseudonyms", b"{}")
    assert status == 500 and json.loads(body)["error"] == "Internal"


def test_health_and_metrics_routes(domain):
    _, pca, _, _ = _clients(domain)
    assert pca.health() == {"healthy": True, "stage": None, "reason": ""} or pca.health()["healthy"]
    m = pca.metrics()
    assert set(m) == {"load", "in_flight", "health"} and m["health"] is True


def test_http_flow(domain, clock):
    servers = [AppServer(app) for app in (ltca_app(domain.ltca), pca_app(domain.pca), ra_app(domain.ra))]
    for s in servers:
        s.start()
    try:
        ltca, pca, ra = (cls(HttpTransport(s.url)) for cls, s in
                         zip((LtcaClient, PcaClient, RaClient), servers))
        v = Vehicle.enroll(ltca, domain.ltca.id, domain.trust, clock=clock)
        batch = v.acquire(ltca, pca, "pca-1", T0, T0 + 1200, 4)
        assert ra.validate_issuance(v.report(batch.entries[0].pseudonym)).valid
        with pytest.raises(SybilDenied):
            v.request_ticket(ltca, "pca-1", T0, T0 + 600)
    finally:
        for s in servers:
            s.shutdown()
            s.server_close()


def test_http_unreachable():
    t = HttpTransport("http://127.0.0.1:9", timeout=1)
    with pytest.raises(TransportError):
        LtcaClient(t).health()


# --- discovery and trust bootstrap ---------------------------------------


def test_discovery(domain, tmp_path):
    reg = Registry()
    reg.register(descriptor_for(domain, {domain.ltca.id: "http://ltca", "pca-1": "http://p1"}))
    server = AppServer(discovery_app(reg))
    server.start()
    try:
        client = DiscoveryClient(HttpTransport(server.url))  # no credentials at all
        desc = client.discover("d1")
        assert desc.ltca_endpoint == "http://ltca"
        assert desc.pca("pca-1").tau_p == domain.config.tau_p
        assert desc.pca("pca-1").gamma == domain.config.gamma
        with pytest.raises(UnknownDomain):
            client.discover("nowhere")
    finally:
        server.shutdown()
        server.server_close()
    reg.save(tmp_path / "r.json")
    again = Registry.load(tmp_path / "r.json").discover("d1")
    assert again.to_json() == desc.to_json()
    assert DomainDescriptor.from_json(desc.to_json()) == desc


def test_descriptor_verify(domain, clock):
    desc = descriptor_for(domain)
    trust = TrustStore([domain.rca.certificate])
    desc.verify(trust)
    assert trust.validates("pca-2") and trust.validates(domain.ltca.id)
    stranger = Domain.create("zz", clock=clock)
    with pytest.raises(UntrustedIssuer):
        descriptor_for(stranger).verify(TrustStore([domain.rca.certificate]))


def test_rca_certify_chains():
    rca = make_rca("root", T0)
    ltca, p1, p2 = (make_ca(rca, n) for n in ("ltca", "p1", "p2"))
    trust = TrustStore([rca.certificate])
    for ca in (ltca, p1, p2):
        trust.add(ca.certificate)
    assert all(trust.validates(n) for n in ("ltca", "p1", "p2"))
    assert trust.chain("p1")[-1] == trust.chain("p2")[-1] == rca.certificate


def test_cross_certification():
    b_rca = make_rca("b-root", T0)
    b_ltca = make_ca(b_rca, "b-ltca")
    c_rca = make_rca("c-root", T0)
    c_pca = make_ca(c_rca, "c-pca")
    trust_b = TrustStore([b_rca.certificate])
    trust_b.add(b_ltca.certificate)
    with pytest.raises(UntrustedIssuer):
        trust_b.add(c_pca.certificate)
    cross = rca_certify(b_ltca, c_pca.public_key, "c-pca", T0)
    trust_b.add(cross)
    assert trust_b.validates("c-pca")
    assert trust_b.public_key("c-pca") == c_pca.public_key


# --- metrics and config ---------------------------------------------------


def test_idle_load_near_zero():
    clock = FakeClock(0)
    m = LoadMeter(workers=4, clock=clock)
    clock.advance(30)
    assert m.load() < 0.01


def test_saturated_load_fake_clock():
    clock = FakeClock(0)
    m = LoadMeter(workers=2, clock=clock)
    a, b = m.begin(), m.begin()
    for _ in range(12):
        clock.advance(5)
        load = m.load()
    assert load >= 0.9
    m.end(a)
    m.end(b)
    for _ in range(12):
        clock.advance(5)
    assert m.load() < 0.01


def test_saturated_load_busy_loop():
    """Real busy loops on every worker drive the gauge to saturation."""
    m = LoadMeter(workers=2, horizon=0.05)
    stop = time.monotonic() + 0.6

    def spin():
        with m.track():
            while time.monotonic() < stop:
                pass

    ts = [threading.Thread(target=spin) for _ in range(2)]
    for t in ts:
        t.start()
    samples = []
    while time.monotonic() < stop - 0.05:
        time.sleep(0.05)
        samples.append(m.load())
    for t in ts:
        t.join()
    assert max(samples[2:]) >= 0.9


def test_failed_selfcheck_reports_unhealthy(domain):
    domain.pca_guard.available = False
    assert domain.pca.metrics().health is False
    m = domain.ltca.metrics()
    assert m.health is True and 0.0 <= m.load <= 1.0


def test_load_config(tmp_path):
    p = tmp_path / "vpki.toml"
    p.write_text('tau_p = 600\nfail_policy = "open"\nunknown = 1\n')
    cfg = load_config(p, env={})
    assert cfg.tau_p == 600 and cfg.fail_open and cfg.gamma == 86_400
    cfg = load_config(p, env={"VPKI_TAU_P": "120", "VPKI_FAIL_POLICY": "close"})
    assert cfg.tau_p == 120 and not cfg.fail_open
    assert load_config(None, env={}) == ServiceConfig()
    with pytest.raises(ValueError):
        load_config(None, env={"VPKI_FAIL_POLICY": "maybe"})
