import json
import re
from pathlib import Path

import pytest

from vpkiaas.cli import build_parser, load_cert, main
from vpkiaas.core.trust import TrustStore
from vpkiaas.records import LtcRecord, RecordStore, TicketRecord, iter_records


def test_init_domain_and_certify(tmp_path, capsys):
    d = tmp_path / "dom"
    assert main(["init-domain", "--dir", str(d), "--domain", "x", "--pcas", "2"]) == 0
    layout = json.loads((d / "domain.json").read_text())
    assert layout["pcas"] == ["x-pca-1", "x-pca-2"]
    trust = TrustStore([load_cert(d / "x-rca.cert")])
    for ca in (layout["ltca"], layout["ra"], *layout["pcas"]):
        trust.add(load_cert(d / f"{ca}.cert"))
        assert (d / f"{ca}.key").exists()
    assert "tau_p = 300" in (d / "vpki.toml").read_text()

    capsys.readouterr()
    assert main(["keygen", "--out", str(tmp_path / "new.key")]) == 0
    pub = capsys.readouterr().out.strip()
    out = tmp_path / "new.cert"
    assert main(["rca", "certify", "--rca-key", str(d / "x-rca.key"), "--rca-cert", str(d / "x-rca.cert"),
                 "--rca-id", "x-rca", "--public-key", pub, "--ca-id", "x-pca-9",
                 "--days", "30", "--out", str(out)]) == 0
    cert = load_cert(out)
    trust.add(cert)
    assert trust.validates("x-pca-9") and cert.valid_to - cert.valid_from == 30 * 86_400
    assert main(["rca", "certify", "--rca-key", str(d / "x-rca.key"), "--rca-cert", str(d / "x-rca.cert"),
                 "--rca-id", "x-rca", "--public-key", "00ff", "--ca-id", "bad"]) == 2


def test_harness_race(capsys):
    assert main(["harness", "race", "--k", "16", "--mode", "pseudonym", "--seed", "4"]) == 0
    assert "granted=1 denied=15 failed=0" in capsys.readouterr().out


def test_harness_bench(capsys):
    assert main(["harness", "bench", "--n", "5", "--repeat", "2"]) == 0
    assert re.search(r"batch +5: mean [\d.]+ ms", capsys.readouterr().out)


def test_harness_run_simulated(tmp_path, capsys):
    cfg = tmp_path / "run.toml"
    cfg.write_text("[load]\ntotal_vehicles = 5\nhatch_rate = 5\nbatch_sizes = [10]\nduration = 10\n"
                   "[cluster]\ncalibration = 2\n")
    out = tmp_path / "r.json"
    assert main(["harness", "run", "--config", str(cfg), "--seed", "1", "--out", str(out)]) == 0
    assert out.exists() and out.with_suffix(".csv").exists() and out.with_suffix(".cdf.dat").exists()
    assert "p99.9=" in capsys.readouterr().out


def test_records_purge(tmp_path):
    path = tmp_path / "rec.log"
    store = RecordStore(path)
    store.append_ltc_record(LtcRecord(b"L" * 16, b"k", b"c", 5))
    store.append_ticket_record(TicketRecord(b"a" * 16, b"L" * 16, b"i", b"r", 0, 1, 1, 10))
    store.append_ticket_record(TicketRecord(b"b" * 16, b"L" * 16, b"i", b"r", 0, 1, 1, 100))
    store.close()
    assert main(["records", "purge", str(path), "--before", "50"]) == 0
    kinds = [type(r).__name__ for r in iter_records(path)]
    assert kinds == ["LtcRecord", "TicketRecord"]


def test_live_needs_anchor():
    assert main(["harness", "run", "--discovery", "http://127.0.0.1:9"]) == 2


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
    assert Path(build_parser().prog).name == "vpki"
