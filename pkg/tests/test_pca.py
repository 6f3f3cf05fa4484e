import threading
from dataclasses import replace

import pytest

import reference as ref
from vpkiaas.client import Vehicle
from vpkiaas.core import crypto
from vpkiaas.core.encoding import iterated_hash
from vpkiaas.core.messages import Csr, ResolveRequest
from vpkiaas.errors import (
    BadCSR,
    BatchTooLarge,
    ExpiredTicket,
    GuardUnavailable,
    NotFound,
    StaleTimestamp,
    TargetMismatch,
    TicketReused,
    UnauthorizedCaller,
    UntrustedLTCA,
    WindowMisaligned,
)
from vpkiaas.gateway.config import ServiceConfig
from vpkiaas.gateway.domain import Domain
from vpkiaas.records import RecordStore

from conftest import T0, FakeClock, guard_state


def _request(vehicle, domain, n=3, t_s=T0, t_e=None, pca="pca-1"):
    t_e = t_e if t_e is not None else t_s + (n + 1) * domain.config.tau_p
    h = vehicle.request_ticket(domain.ltca, pca, t_s, t_e)
    req, keys = vehicle.build_pseudonym_request(h, n)
    return h, req, keys


def test_three_slots_from_epoch_zero():
    clock = FakeClock(0)
    d = Domain.create(config=ServiceConfig(tau_p=300), clock=clock)
    v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust, clock=clock)
    h = v.request_ticket(d.ltca, d.pca.id, 0, 900)
    batch = v.acquire_pseudonyms(d.pca, d.pca.id, h, 3)
    ps = [e.pseudonym for e in batch.entries]
    assert [(p.t_s, p.t_e) for p in ps] == [(0, 300), (300, 600), (600, 900)]
    expected = ref.chain(h.ticket.ik_tkt, [p.public_key for p in ps], 0, 300, batch.rnd_v)
    assert [p.ik_p for p in ps] == [e[3] for e in expected]
    assert [p.serial for p in ps] == [e[4] for e in expected]


def test_issue_records_batch(domain, vehicle):
    h, req, keys = _request(vehicle, domain, n=4)
    resp = domain.pca.issue_pseudonyms(req)
    assert resp.nonce == req.nonce + 1
    assert all(p.verify_signature(domain.pca.certificate.subject_public_key) for p in resp.pseudonyms)
    rec, i = domain.pca.records.lookup_by_pseudonym_serial(resp.pseudonyms[2].serial)
    assert (rec.sn_tkt, i, rec.rnd_v) == (h.ticket.serial, 3, resp.rnd_v)


def test_concurrent_replicas_issue_one_batch(domain, vehicle):
    h = vehicle.request_ticket(domain.ltca, "pca-1", T0, T0 + 1200)
    replicas = [domain.pca, domain.replica("pca", "pca-1")]
    reqs = [vehicle.build_pseudonym_request(h, 2)[0] for _ in range(2)]
    barrier = threading.Barrier(2)
    out = []

    def go(i):
        barrier.wait()
        try:
            replicas[i].issue_pseudonyms(reqs[i])
            out.append("ok")
        except TicketReused:
            out.append("reused")

    ts = [threading.Thread(target=go, args=(i,)) for i in range(2)]
    for t in ts:
        t.start()
    for t in ts:
        t.join()
    assert sorted(out) == ["ok", "reused"]


def test_ticket_for_other_pca(domain, vehicle):
    _, req, _ = _request(vehicle, domain, pca="pca-1")
    with pytest.raises(TargetMismatch):
        domain.pcas["pca-2"].issue_pseudonyms(req)


def test_reuse_refused(domain, vehicle):
    h, req, _ = _request(vehicle, domain)
    domain.pca.issue_pseudonyms(req)
    again, _ = vehicle.build_pseudonym_request(h, 3)
    with pytest.raises(TicketReused):
        domain.pca.issue_pseudonyms(again)


def test_untrusted_ltca(domain, clock):
    other = Domain.create("d2", pca_ids=("pca-1",), clock=clock)
    v = Vehicle.enroll(other.ltca, other.ltca.id, other.trust, clock=clock)
    _, req, _ = _request(v, other)
    with pytest.raises(UntrustedLTCA):
        domain.pca.issue_pseudonyms(req)


def test_forged_ticket_signature(domain, vehicle):
    _, req, _ = _request(vehicle, domain)
    forged = replace(req.ticket, t_e=req.ticket.t_e + 300)
    with pytest.raises(UntrustedLTCA):
        domain.pca.issue_pseudonyms(replace(req, ticket=forged))


def test_expired_ticket(domain, vehicle, clock):
    _, req, _ = _request(vehicle, domain, t_s=T0 - 3000, t_e=T0 - 1000)
    with pytest.raises(ExpiredTicket):
        domain.pca.issue_pseudonyms(req)


def test_stale(domain, vehicle, clock):
    _, req, _ = _request(vehicle, domain)
    clock.advance(1000)
    with pytest.raises(StaleTimestamp):
        domain.pca.issue_pseudonyms(req)


def test_bad_csr_rejects_whole_batch_and_reverts(domain, vehicle):
    h, req, keys = _request(vehicle, domain)
    bad = list(req.csrs)
    bad[1] = Csr(bad[1].public_key, crypto.sign(keys[0].private, b"wrong"))
    with pytest.raises(BadCSR):
        domain.pca.issue_pseudonyms(replace(req, csrs=tuple(bad)))
    # the ticket is still usable
    domain.pca.issue_pseudonyms(req)


def test_csr_bound_to_ticket(domain, vehicle):
    _, req1, _ = _request(vehicle, domain, t_s=T0)
    _, req2, _ = _request(vehicle, domain, t_s=T0 + 3600)
    with pytest.raises(BadCSR):
        domain.pca.issue_pseudonyms(replace(req2, csrs=req1.csrs))


def test_empty_and_oversized_batches(domain, vehicle):
    h = vehicle.request_ticket(domain.ltca, "pca-1", T0, T0 + 3600)
    req, _ = vehicle.build_pseudonym_request(h, 1)
    with pytest.raises(BadCSR):
        domain.pca.issue_pseudonyms(replace(req, csrs=()))
    big = replace(req, csrs=req.csrs * (domain.config.max_batch + 1))
    with pytest.raises(BatchTooLarge):
        domain.pca.issue_pseudonyms(big)


def test_window_too_short(domain, vehicle):
    h = vehicle.request_ticket(domain.ltca, "pca-1", T0, T0 + 600)
    req, _ = vehicle.build_pseudonym_request(h, 3)
    with pytest.raises(WindowMisaligned):
        domain.pca.issue_pseudonyms(req)


def test_hundred_per_day_lifetime(clock):
    d = Domain.create(config=ServiceConfig(tau_p=864), clock=clock)
    v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust, tau_p=864, clock=clock)
    start = T0 - T0 % 864
    h = v.request_ticket(d.ltca, d.pca.id, start, start + 86_400)
    batch = v.acquire_pseudonyms(d.pca, d.pca.id, h, 100)
    ps = [e.pseudonym for e in batch.entries]
    assert ps[0].t_s == start and ps[-1].t_e == start + 86_400
    assert all(p.t_e - p.t_s == 864 for p in ps)


@pytest.mark.parametrize("stage", ["post_guard", "chain", "sign", "record"])
def test_rollback_each_stage(domain, vehicle, stage):
    _, req, _ = _request(vehicle, domain)
    before = guard_state(domain.pca_guard)

    def boom(name):
        if name == stage:
            raise RuntimeError(name)

    domain.pca.fault = boom
    with pytest.raises(RuntimeError):
        domain.pca.issue_pseudonyms(req)
    assert guard_state(domain.pca_guard) == before
    domain.pca.fault = None
    domain.pca.issue_pseudonyms(req)


def test_guard_down_fail_close(domain, vehicle):
    _, req, _ = _request(vehicle, domain)
    domain.pca_guard.available = False
    with pytest.raises(GuardUnavailable):
        domain.pca.issue_pseudonyms(req)


def test_guard_down_fail_open_flags(clock):
    d = Domain.create(config=ServiceConfig(fail_policy="open"), clock=clock)
    v = Vehicle.enroll(d.ltca, d.ltca.id, d.trust, clock=clock)
    h, req, _ = _request(v, d, pca=d.pca.id)
    d.pca_guard.available = False
    d.pca.issue_pseudonyms(req)
    assert d.pca.records.batch_record(h.ticket.serial).flagged


# --- resolution ----------------------------------------------------------


def _resolve_request(domain, pseudonym, ident=None):
    ra = domain.ra
    ident = ident or ra.identity
    req = ResolveRequest(crypto.gen_id(), pseudonym, ident.certificate, crypto.gen_id(),
                         int(domain.pca.clock() * 1000))
    return replace(req, signature=crypto.sign(ident.keys.private, req.payload()))


def test_resolve_second_pseudonym(domain, vehicle):
    h, req, _ = _request(vehicle, domain)
    resp = domain.pca.issue_pseudonyms(req)
    p2 = resp.pseudonyms[1]
    out = domain.pca.resolve_pseudonym(_resolve_request(domain, p2))
    assert out.ticket == h.ticket
    assert out.rnd_ik_p == iterated_hash(resp.rnd_v, 2)
    assert out.serial == p2.serial and out.nonce
    assert crypto.verify(domain.pca.certificate.subject_public_key, out.payload(), out.signature)
    assert ref.H(ref.enc(h.ticket.ik_tkt, p2.public_key, ref.i64(p2.t_s), ref.i64(p2.t_e), out.rnd_ik_p)) == p2.ik_p


def test_resolve_unknown_serial(domain, vehicle):
    _, req, _ = _request(vehicle, domain)
    p = domain.pca.issue_pseudonyms(req).pseudonyms[0]
    ghost = replace(p, serial=bytes(32)).signed(domain.pca.identity.keys.private)
    with pytest.raises(NotFound):
        domain.pca.resolve_pseudonym(_resolve_request(domain, ghost))


def test_resolve_needs_authorized_ra(domain, vehicle):
    _, req, _ = _request(vehicle, domain)
    p = domain.pca.issue_pseudonyms(req).pseudonyms[0]
    with pytest.raises(UnauthorizedCaller):
        domain.pca.resolve_pseudonym(_resolve_request(domain, p, ident=domain.ltca.identity))


# --- health -------------------------------------------------------------


def test_health_nominal_leaves_no_trace(domain):
    assert domain.pca.health_selfcheck().healthy
    assert all(v is False for v in domain.pca_guard.snapshot().values())
    domain.pca.records.flush()
    assert domain.pca.records.rows() == []


def test_health_broken_chain(domain):
    pca = domain.pca
    good = pca.derive_chain

    def broken(*args):
        hashes, iks, sns = good(*args)
        return hashes, iks, [bytes(32)] + sns[1:]

    pca.derive_chain = broken
    h = pca.health_selfcheck()
    assert not h.healthy and h.stage == "chain"


def test_health_ignores_full_record_queue(clock):
    records = RecordStore(max_queue=0)
    d = Domain.create(clock=clock, pca_records=records)
    assert d.pca.health_selfcheck().healthy
    records.close()


def test_health_guard_down(domain):
    domain.pca_guard.available = False
    h = domain.pca.health_selfcheck()
    assert not h.healthy and h.stage == "guard"
