"""``vpki`` command line: domain setup, services, vehicle and harness."""

from __future__ import annotations

import argparse
import json
import logging
import math
import signal
import sys
import threading
import time
from pathlib import Path

from .client import PoolEntry, TicketHandle, Vehicle, VehicleState, coverage
from .core import crypto
from .core.trust import TrustStore
from .core.types import CaIdentity, Certificate, Pseudonym
from .errors import VpkiError
from .gateway import wire
from .gateway.apps import discovery_app, ltca_app, pca_app, ra_app
from .gateway.clients import DiscoveryClient, LtcaClient, PcaClient
from .gateway.config import load_config
from .gateway.discovery import Registry, descriptor_for
from .gateway.domain import CA_LIFETIME, make_ca, make_rca, rca_certify
from .gateway.http import AppServer
from .gateway.transport import HttpTransport
from .guard import GuardServer, GuardStore, RemoteGuardStore
from .records import RecordStore, purge

log = logging.getLogger("vpki")


# --- key and certificate files ----------------------------------------------


def save_identity(directory: Path, ident: CaIdentity) -> None:
    (directory / f"{ident.id}.key").write_bytes(ident.keys.private_pem())
    (directory / f"{ident.id}.cert").write_text(wire.b64e(ident.certificate.encode()) + "\n")


def load_cert(path) -> Certificate:
    return Certificate.decode(wire.b64d(Path(path).read_text().strip()))


def load_identity(directory: Path, ca_id: str) -> CaIdentity:
    keys = crypto.KeyPair.from_pem((directory / f"{ca_id}.key").read_bytes())
    return CaIdentity(ca_id, load_cert(directory / f"{ca_id}.cert"), keys)


def _layout(directory: Path) -> dict:
    return json.loads((directory / "domain.json").read_text())


# --- domain setup and services ---------------------------------------------


def cmd_init_domain(args) -> int:
    out = Path(args.dir)
    out.mkdir(parents=True, exist_ok=True)
    rca = make_rca(f"{args.domain}-rca")
    save_identity(out, rca)
    ltca = make_ca(rca, f"{args.domain}-ltca")
    ra = make_ca(rca, f"{args.domain}-ra")
    pcas = [make_ca(rca, f"{args.domain}-pca-{i}") for i in range(1, args.pcas + 1)]
    for ident in (ltca, ra, *pcas):
        save_identity(out, ident)
    layout = {"domain": args.domain, "rca": rca.id, "ltca": ltca.id, "ra": ra.id,
              "pcas": [p.id for p in pcas]}
    (out / "domain.json").write_text(json.dumps(layout, indent=2))
    cfg = out / "vpki.toml"
    if not cfg.exists():
        cfg.write_text(f"tau_p = {args.tau_p}\ngamma = 86400\nfreshness_window = 300\n"
                       f'fail_policy = "close"\nworkers = 4\n')
    print(f"domain {args.domain} written to {out} (anchor: {rca.id}.cert)")
    return 0


def cmd_rca_certify(args) -> int:
    rca = CaIdentity(args.rca_id, load_cert(args.rca_cert),
                     crypto.KeyPair.from_pem(Path(args.rca_key).read_bytes()))
    public = bytes.fromhex(args.public_key)
    if not crypto.valid_public_key(public):
        print("error: not an uncompressed P-256 point", file=sys.stderr)
        return 2
    cert = rca_certify(rca, public, args.ca_id, lifetime=args.days * 86_400 or CA_LIFETIME)
    text = wire.b64e(cert.encode())
    if args.out:
        Path(args.out).write_text(text + "\n")
    else:
        print(text)
    return 0


def cmd_keygen(args) -> int:
    keys = crypto.keygen()
    Path(args.out).write_bytes(keys.private_pem())
    print(keys.public.hex())
    return 0


def _guard(args):
    if args.guard:
        host, _, port = args.guard.rpartition(":")
        return RemoteGuardStore(host or "127.0.0.1", int(port))
    return GuardStore()


def cmd_serve(args) -> int:
    from .ltca import LTCA
    from .pca import PCA
    from .ra import RA

    d = Path(args.dir)
    layout = _layout(d)
    config = load_config(d / "vpki.toml" if (d / "vpki.toml").exists() else None)
    rca_cert = load_cert(d / f"{layout['rca']}.cert")
    trust = TrustStore([rca_cert])
    ids = [layout["ltca"], layout["ra"], *layout["pcas"]]
    idents = {i: load_identity(d, i) for i in ids}
    for ident in idents.values():
        trust.add(ident.certificate)

    def records(ca_id):
        return RecordStore(d / f"records-{ca_id}.log")

    guard = _guard(args)
    ltca = LTCA(idents[layout["ltca"]], trust, guard, records(layout["ltca"]), config)
    pcas = {pid: PCA(idents[pid], trust, guard, records(pid), config, ra_ids=[layout["ra"]])
            for pid in layout["pcas"]}
    ra = RA(idents[layout["ra"]], trust, {pid: p.resolve_pseudonym for pid, p in pcas.items()},
            config)

    port = args.port
    servers = {}
    for ca_id, app in [(ltca.id, ltca_app(ltca)), (ra.id, ra_app(ra)),
                       *[(pid, pca_app(p)) for pid, p in pcas.items()]]:
        port += 1
        servers[ca_id] = AppServer(app, args.host, port)

    class _Dom:  # the attributes descriptor_for reads
        id = layout["domain"]
    _Dom.ltca, _Dom.pcas, _Dom.ra, _Dom.config = ltca, pcas, ra, config
    desc = descriptor_for(_Dom, {k: s.url for k, s in servers.items()})
    registry = Registry()
    registry.register(desc)
    registry.save(d / "registry.json")
    servers["discovery"] = AppServer(discovery_app(registry), args.host, args.port)
    for name, s in servers.items():
        s.start()
        print(f"{name}: {s.url}", flush=True)

    stop = threading.Event()
    signal.signal(signal.SIGTERM, lambda *_: stop.set())
    try:
        while not stop.wait(60):
            guard_store = guard if isinstance(guard, GuardStore) else None
            if guard_store is not None:
                guard_store.sweep(int(time.time()), config.gamma)
    except KeyboardInterrupt:
        pass
    for s in servers.values():
        s.shutdown()
    ltca.records.close()
    for p in pcas.values():
        p.records.close()
    return 0


def cmd_guard_serve(args) -> int:
    srv = GuardServer((args.host, args.port))
    print(f"guard listening on {args.host}:{srv.port}", flush=True)
    try:
        srv.serve_forever()
    except KeyboardInterrupt:
        pass
    return 0


def cmd_records_purge(args) -> int:
    kept, dropped = purge(args.path, args.before)
    print(f"kept {kept}, dropped {dropped}")
    return 0


# --- vehicle ---------------------------------------------------------------


def _save_vehicle(path, v: Vehicle, extra: dict) -> None:
    st = v.state
    data = {
        "key": st.keys.private_pem().decode(),
        "ltc": wire.b64e(st.ltc.encode()),
        "home_ltca_id": st.home_ltca_id,
        "tau_p": st.tau_p,
        "epoch": st.epoch,
        "pool": [{"pseudonym": wire.b64e(e.pseudonym.encode()), "key": e.keys.private_pem().decode()}
                 for e in st.pool],
        **extra,
    }
    Path(path).write_text(json.dumps(data, indent=2))


def _load_vehicle(path) -> tuple[Vehicle, dict, object]:
    data = json.loads(Path(path).read_text())
    trust = TrustStore([load_cert(data["anchor"])])
    desc = DiscoveryClient(HttpTransport(data["discovery"])).discover(data["domain"])
    desc.verify(trust)
    pool = [PoolEntry(Pseudonym.decode(wire.b64d(e["pseudonym"])),
                      crypto.KeyPair.from_pem(e["key"].encode())) for e in data["pool"]]
    state = VehicleState(crypto.KeyPair.from_pem(data["key"].encode()),
                         Certificate.decode(wire.b64d(data["ltc"])), data["home_ltca_id"], trust,
                         pool, data["tau_p"], data["epoch"])
    extra = {k: data[k] for k in ("anchor", "discovery", "domain", "next_start", "ticket") if k in data}
    return Vehicle(state), extra, desc


def _pca_entry(desc, pca_id):
    return desc.pca(pca_id) if pca_id else desc.pcas[0]


def cmd_vehicle_register(args) -> int:
    trust = TrustStore([load_cert(args.anchor)])
    desc = DiscoveryClient(HttpTransport(args.discovery)).discover(args.domain)
    desc.verify(trust)
    ltca = LtcaClient(HttpTransport(desc.ltca_endpoint))
    tau = desc.pcas[0].tau_p if desc.pcas else 300
    v = Vehicle.enroll(ltca, desc.ltca_id, trust, tau_p=tau, epoch=desc.epoch)
    _save_vehicle(args.state, v, {"anchor": str(Path(args.anchor).resolve()),
                                  "discovery": args.discovery, "domain": args.domain})
    print(f"registered, LTC serial {v.state.ltc.serial.hex()}")
    return 0


def _ticket(v: Vehicle, desc, entry, t_s: int, t_e: int) -> TicketHandle:
    return v.request_ticket(LtcaClient(HttpTransport(desc.ltca_endpoint)), entry.id, t_s, t_e)


def _handle_to_json(h: TicketHandle) -> dict:
    return {"response": wire.ticket_response_to_json(h.response), "rnd": wire.b64e(h.rnd_tkt),
            "target": h.target_ca_id}


def _handle_from_json(d: dict) -> TicketHandle:
    return TicketHandle(wire.ticket_response_from_json(d["response"]), wire.b64d(d["rnd"]), d["target"])


def cmd_vehicle_ticket(args) -> int:
    v, extra, desc = _load_vehicle(args.state)
    entry = _pca_entry(desc, args.pca)
    t_s = args.t_s if args.t_s is not None else max(int(time.time()), extra.get("next_start", 0))
    t_e = args.t_e if args.t_e is not None else t_s + entry.tau_p * (args.n + 1)
    h = _ticket(v, desc, entry, t_s, t_e)
    extra["ticket"] = _handle_to_json(h)
    extra["next_start"] = t_e
    _save_vehicle(args.state, v, extra)
    print(f"ticket {h.ticket.serial.hex()} for [{t_s}, {t_e})")
    return 0


def _acquire(v: Vehicle, desc, entry, h: TicketHandle, n: int):
    pca = PcaClient(HttpTransport(entry.endpoint))
    return v.acquire_pseudonyms(pca, entry.id, h, n)


def cmd_vehicle_pseudonyms(args) -> int:
    v, extra, desc = _load_vehicle(args.state)
    if "ticket" not in extra:
        print("error: no ticket in state; run 'vehicle ticket' first", file=sys.stderr)
        return 2
    h = _handle_from_json(extra.pop("ticket"))
    entry = desc.pca(h.target_ca_id)
    batch = _acquire(v, desc, entry, h, args.n)
    _save_vehicle(args.state, v, extra)
    first, last = batch.entries[0].pseudonym, batch.entries[-1].pseudonym
    print(f"{len(batch.entries)} pseudonyms covering [{first.t_s}, {last.t_e})")
    return 0


def cmd_vehicle_trip(args) -> int:
    v, extra, desc = _load_vehicle(args.state)
    entry = _pca_entry(desc, args.pca)
    now = int(time.time())
    v.prune(now)
    if v.refill_needed(now, args.duration):
        # start at the current slot boundary so the first pseudonym covers now
        slot_floor = now - (now - desc.epoch) % entry.tau_p
        t_s = max(slot_floor, extra.get("next_start", 0))
        n = math.ceil((now + args.duration - t_s) / entry.tau_p) + 1
        t_e = t_s + entry.tau_p * (n + 1)
        h = _ticket(v, desc, entry, t_s, t_e)
        extra["next_start"] = t_e
        batch = _acquire(v, desc, entry, h, n)
        print(f"refilled with {len(batch.entries)} pseudonyms")
    print(f"coverage from now: {coverage(v.state.pool, now):.0f} s, pool size {len(v.state.pool)}")
    _save_vehicle(args.state, v, extra)
    return 0


# --- harness ---------------------------------------------------------------


def cmd_harness_run(args) -> int:
    from .harness import ClusterConfig, LoadConfig, run_load
    from .harness.config import load_run_config

    load, cluster = load_run_config(args.config) if args.config else (LoadConfig(), ClusterConfig())
    endpoints, anchors = None, ()
    if args.discovery:
        endpoints = DiscoveryClient(HttpTransport(args.discovery)).discover(args.domain)
        anchors = [load_cert(args.anchor)]
    report = run_load(load, endpoints, seed=args.seed, cluster=cluster, anchors=anchors)
    paths = report.write_all(args.out)
    for op, s in report.summary().items():
        print(f"{op:11s} n={s['count']:6d} p50={s['p50']:.1f} ms p99={s['p99']:.1f} ms "
              f"p99.9={s['p99.9']:.1f} ms")
    print("wrote " + ", ".join(str(p) for p in paths))
    return 0


def cmd_harness_race(args) -> int:
    from .harness import sybil_race

    out = sybil_race(args.k, args.mode, replicas=args.replicas, seed=args.seed)
    print(f"granted={out.granted} denied={out.denied} failed={out.failed}")
    return 0 if out.granted == 1 else 1


def cmd_bench(args) -> int:
    from .harness.bench import batch_latency

    for n in args.n:
        r = batch_latency(n, args.repeat)
        print(f"batch {n:4d}: mean {r['mean_ms']:.1f} ms, p99 {r['p99_ms']:.1f} ms "
              f"over {args.repeat} requests (tau_p={r['tau_p']})")
    return 0


# --- parser ----------------------------------------------------------------


def build_parser() -> argparse.ArgumentParser:
    p = argparse.ArgumentParser(prog="vpki", description=__doc__)
    p.add_argument("-v", "--verbose", action="store_true")
    sub = p.add_subparsers(dest="cmd", required=True)

    s = sub.add_parser("init-domain", help="generate RCA, LTCA, PCA and RA keys and certificates")
    s.add_argument("--dir", required=True)
    s.add_argument("--domain", default="d1")
    s.add_argument("--pcas", type=int, default=1)
    s.add_argument("--tau-p", type=int, default=300)
    s.set_defaults(fn=cmd_init_domain)

    s = sub.add_parser("keygen", help="new P-256 key; prints the public point in hex")
    s.add_argument("--out", required=True)
    s.set_defaults(fn=cmd_keygen)

    rca = sub.add_parser("rca", help="offline root CA operations").add_subparsers(dest="rca_cmd", required=True)
    s = rca.add_parser("certify", help="certify a CA public key")
    s.add_argument("--rca-key", required=True)
    s.add_argument("--rca-cert", required=True)
    s.add_argument("--rca-id", required=True)
    s.add_argument("--public-key", required=True, help="hex uncompressed point")
    s.add_argument("--ca-id", required=True)
    s.add_argument("--days", type=int, default=0)
    s.add_argument("--out")
    s.set_defaults(fn=cmd_rca_certify)

    s = sub.add_parser("serve", help="serve a domain directory over HTTP")
    s.add_argument("--dir", required=True)
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8400, help="discovery port; services use the next ones")
    s.add_argument("--guard", help="host:port of a shared guard server")
    s.set_defaults(fn=cmd_serve)

    s = sub.add_parser("guard", help="run a standalone guard store server")
    s.add_argument("--host", default="127.0.0.1")
    s.add_argument("--port", type=int, default=8390)
    s.set_defaults(fn=cmd_guard_serve)

    rec = sub.add_parser("records").add_subparsers(dest="rec_cmd", required=True)
    s = rec.add_parser("purge", help="drop ticket and batch records issued before a time")
    s.add_argument("path")
    s.add_argument("--before", type=int, required=True)
    s.set_defaults(fn=cmd_records_purge)

    veh = sub.add_parser("vehicle").add_subparsers(dest="veh_cmd", required=True)
    s = veh.add_parser("register")
    s.add_argument("--discovery", required=True)
    s.add_argument("--domain", default="d1")
    s.add_argument("--anchor", required=True, help="root certificate file")
    s.add_argument("--state", required=True)
    s.set_defaults(fn=cmd_vehicle_register)
    s = veh.add_parser("ticket")
    s.add_argument("--state", required=True)
    s.add_argument("--pca")
    s.add_argument("--t-s", type=int)
    s.add_argument("--t-e", type=int)
    s.add_argument("--n", type=int, default=10, help="size the window for n pseudonyms")
    s.set_defaults(fn=cmd_vehicle_ticket)
    s = veh.add_parser("pseudonyms")
    s.add_argument("--state", required=True)
    s.add_argument("--n", type=int, default=10)
    s.set_defaults(fn=cmd_vehicle_pseudonyms)
    s = veh.add_parser("trip")
    s.add_argument("--state", required=True)
    s.add_argument("--pca")
    s.add_argument("--duration", type=int, default=3600, help="trip length, seconds")
    s.set_defaults(fn=cmd_vehicle_trip)

    har = sub.add_parser("harness").add_subparsers(dest="har_cmd", required=True)
    s = har.add_parser("run")
    s.add_argument("--config")
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", default="report.json")
    s.add_argument("--discovery", help="run live against this discovery URL")
    s.add_argument("--domain", default="d1")
    s.add_argument("--anchor")
    s.set_defaults(fn=cmd_harness_run)
    s = har.add_parser("race")
    s.add_argument("--k", type=int, default=64)
    s.add_argument("--mode", choices=["ticket", "pseudonym"], default="ticket")
    s.add_argument("--replicas", type=int, default=4)
    s.add_argument("--seed", type=int, default=0)
    s.set_defaults(fn=cmd_harness_race)
    s = har.add_parser("bench", help="PCA processing latency per batch size")
    s.add_argument("--n", type=int, nargs="+", default=[100, 500])
    s.add_argument("--repeat", type=int, default=20)
    s.set_defaults(fn=cmd_bench)
    return p


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(level=logging.DEBUG if args.verbose else logging.WARNING,
                        format="%(levelname)s %(name)s: %(message)s")
    if args.cmd == "harness" and args.har_cmd == "run" and args.discovery and not args.anchor:
        print("error: --anchor is required with --discovery", file=sys.stderr)
        return 2
    try:
        return args.fn(args)
    except VpkiError as exc:
        print(f"error: {exc.code}: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
