import csv
import math
from dataclasses import replace

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from vpkiaas.gateway.apps import ltca_app, pca_app
from vpkiaas.gateway.config import ServiceConfig
from vpkiaas.gateway.discovery import descriptor_for
from vpkiaas.gateway.domain import Domain
from vpkiaas.gateway.http import AppServer
from vpkiaas.harness import (
    ClusterConfig,
    FixedServiceTimes,
    FlashCrowd,
    LatencyReport,
    LoadConfig,
    MeasuredServiceTimes,
    Sample,
    ScalePolicy,
    ScalingController,
    Simulation,
    cdf,
    load_run_config,
    percentile,
    run_controller,
    run_load,
    sybil_race,
)
from vpkiaas.harness.bench import batch_latency
from vpkiaas.harness.sim import ACQUIRE, PSEUDONYMS, TICKET

# --- controller -----------------------------------------------------------


def test_desired_formula():
    ctl = ScalingController(ScalePolicy(1, 10, 0.6), current=2)
    assert ctl.desired(0.9) == 3
    assert ctl.desired(0.6) == 2
    assert ctl.desired(0.0) == 1
    assert ScalingController(ScalePolicy(1, 4, 0.6), current=4).desired(1.0) == 4


def test_scale_in_hysteresis():
    policy = ScalePolicy(1, 10, 0.6, scale_in_ticks=3)
    timeline = run_controller(policy, [0.9, 0.9, 0.1, 0.1, 0.1, 0.1], current=2)
    assert timeline[:2] == [3, 5]
    assert timeline[2:4] == [5, 5]  # two low ticks: still waiting
    assert timeline[4] == 1 and timeline[5] == 1


def test_low_streak_resets():
    policy = ScalePolicy(1, 10, 0.6, scale_in_ticks=3)
    timeline = run_controller(policy, [0.3, 0.3, 0.6, 0.3, 0.3, 0.3], current=4)
    assert timeline == [4, 4, 4, 4, 4, 2]


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(0, 1), max_size=40), st.integers(1, 5), st.integers(0, 10))
def test_controller_stays_in_bounds(utils, lo, span):
    policy = ScalePolicy(lo, lo + span, 0.6)
    for n in run_controller(policy, utils):
        assert policy.min_replicas <= n <= policy.max_replicas


@pytest.mark.parametrize("bad", [dict(min_replicas=0), dict(min_replicas=3, max_replicas=2),
                                 dict(target_utilization=1.0), dict(tick=0)])
def test_policy_validation(bad):
    with pytest.raises(ValueError):
        ScalePolicy(**bad)


# --- statistics -----------------------------------------------------------


def test_percentile_nearest_rank():
    xs = list(range(1, 1001))
    assert percentile(xs, 50) == 500
    assert percentile(xs, 99.9) == 999
    assert percentile(xs, 100) == 1000
    assert math.isnan(percentile([], 50))


@settings(max_examples=200, deadline=None)
@given(st.lists(st.integers(0, 50), min_size=1, max_size=300))
def test_cdf_matches_independent_sort(xs):
    table = cdf(xs)
    n = len(xs)
    for x, f in table:
        assert f == sum(1 for y in xs if y <= x) / n
    assert [x for x, _ in table] == sorted(set(xs))
    assert table[-1][1] == 1.0


@settings(max_examples=100, deadline=None)
@given(st.lists(st.floats(0, 1e4, allow_nan=False), min_size=1, max_size=200))
def test_percentiles_monotone(xs):
    ps = [percentile(xs, p) for p in (50, 90, 99, 99.9)]
    assert ps == sorted(ps)


# --- simulation -----------------------------------------------------------

SMALL = LoadConfig(total_vehicles=20, hatch_rate=2, think_time_ms=(500, 1500),
                   batch_sizes=(50, 100), duration=30)


def _sim(config=SMALL, seed=3, cluster=None):
    return Simulation(config, cluster or ClusterConfig(), FixedServiceTimes(), seed).run()


def test_seeded_schedules_identical():
    a, b = _sim(seed=7), _sim(seed=7)
    assert a.schedule == b.schedule and len(a.schedule) > 20
    assert [s.latency_ms for s in a.samples] == [s.latency_ms for s in b.samples]
    assert _sim(seed=8).schedule != a.schedule


def test_zero_duration():
    r = _sim(replace(SMALL, duration=0))
    assert r.samples == [] and r.schedule == [] and r.meta["issued"] == 0
    assert math.isnan(r.percentiles(TICKET)["p99.9"])


def test_conservation():
    r = _sim(replace(SMALL, cooldown=20))
    served = [s for s in r.samples if s.op in (TICKET, PSEUDONYMS)]
    assert len(served) == r.meta["issued"]
    out = r.outcomes(TICKET) + r.outcomes(PSEUDONYMS)
    assert sum(out.values()) == r.meta["issued"]
    assert len(r.latencies(ACQUIRE)) == len(r.latencies(PSEUDONYMS))


def test_vehicles_follow_cycle():
    r = _sim()
    by_vehicle = {}
    for s in sorted(r.samples, key=lambda s: (s.t_submit_ms, s.op)):
        by_vehicle.setdefault(s.vehicle, []).append(s)
    for samples in by_vehicle.values():
        tickets = [s for s in samples if s.op == TICKET]
        acquires = [s for s in samples if s.op == ACQUIRE]
        assert [s.t_submit_ms for s in tickets] == [s.t_submit_ms for s in acquires]


def test_overload_scales_out_and_back():
    heavy = FixedServiceTimes(per_pseudonym=0.002)
    cfg = replace(SMALL, total_vehicles=60, hatch_rate=10, duration=60, cooldown=60)
    r = Simulation(cfg, ClusterConfig(), heavy, seed=1).run()
    pca = [n for _, n in r.replicas["pca"]]
    assert max(pca) > 1 and pca[-1] == 1
    util = [u for _, u in r.utilization["pca"]]
    assert all(0.0 <= u <= 1.0 for u in util)


def test_measured_service_times_are_real():
    st_ = MeasuredServiceTimes(calibration=3, tau_p=300, seed=0)
    t = st_.draw(TICKET)
    p = st_.draw(PSEUDONYMS, 20)
    assert 0 < t < 1 and 0 < p < 5
    assert st_.draw(PSEUDONYMS, 20) in st_.samples[(PSEUDONYMS, 20)]


def test_run_load_defaults_to_simulation():
    cfg = replace(SMALL, total_vehicles=4, duration=10, batch_sizes=(10,))
    r = run_load(cfg, seed=2, cluster=replace(ClusterConfig(), calibration=2))
    assert r.meta["mode"] == "simulated" and r.percentiles(ACQUIRE)["p50"] > 0


# --- report ---------------------------------------------------------------


def test_report_writers(tmp_path):
    r = _sim()
    paths = r.write_all(tmp_path / "run.json")
    assert all(p.exists() for p in paths)
    rows = list(csv.reader(open(paths[1])))
    assert rows[0] == ["op", "t_submit_ms", "latency_ms", "outcome"]
    assert len(rows) == len(r.samples) + 1
    blocks = paths[2].read_text().split("\n\n\n")
    assert {b.splitlines()[0] for b in blocks if b.strip()} == {f"# op={o}" for o in r.ops()}
    import json

    data = json.loads(paths[0].read_text())
    assert set(data["summary"]) == set(r.ops())
    s = data["summary"][TICKET]
    assert s["p50"] <= s["p90"] <= s["p99"] <= s["p99.9"]


def test_report_windows():
    r = LatencyReport()
    for i in range(10):
        r.record(Sample("x", i * 100.0, float(i)))
    r.record(Sample("x", 50.0, 99.0, outcome="TransportError"))
    assert r.latencies("x", window=(0, 300)) == [0.0, 1.0, 2.0]
    assert r.outcomes("x")["TransportError"] == 1
    assert 99.0 not in r.latencies("x")


def test_load_run_config(tmp_path):
    p = tmp_path / "run.toml"
    p.write_text("""
[load]
total_vehicles = 50
hatch_rate = 5
think_time_ms = [100, 200]
batch_sizes = [100, 200]
duration = 30

[load.flash_crowd]
start = 10
vehicles = 500
hatch_rate = 50
duration = 10

[cluster]
startup_delay = 1.0

[cluster.pca]
min_replicas = 2
max_replicas = 8
""")
    load, cluster = load_run_config(p)
    assert load.total_vehicles == 50 and load.think_time_ms == (100, 200)
    assert load.batch_sizes == (100, 200)
    assert load.flash_crowd == FlashCrowd(10, 500, 50, 10)
    assert cluster.pca == ScalePolicy(2, 8) and cluster.ltca == ScalePolicy(1, 4)
    assert cluster.startup_delay == 1.0


def test_load_config_validation():
    with pytest.raises(ValueError):
        LoadConfig(think_time_ms=(5, 1))
    with pytest.raises(ValueError):
        LoadConfig(hatch_rate=0)
    with pytest.raises(ValueError):
        LoadConfig(batch_sizes=())


# --- race and bench -------------------------------------------------------


@pytest.mark.parametrize("mode", ["ticket", "pseudonym"])
def test_race_64(mode):
    out = sybil_race(64, mode, seed=1)
    assert (out.granted, out.denied, out.failed) == (1, 63, 0)


@pytest.mark.parametrize("mode", ["ticket", "pseudonym"])
def test_race_single(mode):
    out = sybil_race(1, mode, seed=2)
    assert (out.granted, out.denied) == (1, 0)


def test_race_rejects_bad_args():
    with pytest.raises(ValueError):
        sybil_race(0)
    with pytest.raises(ValueError):
        sybil_race(2, mode="other")


def test_batch_latency():
    out = batch_latency(10, repeat=3)
    assert out["n"] == 10 and len(out["samples"]) == 3
    assert 0 < min(out["samples"]) <= out["mean_ms"] <= max(out["samples"])
    assert out["p99_ms"] == max(out["samples"])


# --- live mode ------------------------------------------------------------


@pytest.fixture
def live_domain():
    d = Domain.create("live", config=ServiceConfig(tau_p=60))
    servers = {d.ltca.id: AppServer(ltca_app(d.ltca)), d.pca.id: AppServer(pca_app(d.pca))}
    for s in servers.values():
        s.start()
    yield d, {k: s.url for k, s in servers.items()}
    for s in servers.values():
        s.shutdown()
        s.server_close()


def test_live_run(live_domain):
    d, urls = live_domain
    cfg = LoadConfig(total_vehicles=3, hatch_rate=10, think_time_ms=(50, 100),
                     batch_sizes=(5,), duration=1.0, tau_p=60)
    r = run_load(cfg, endpoints=descriptor_for(d, urls), anchors=[d.rca.certificate], seed=1)
    assert r.meta["mode"] == "live"
    assert r.outcomes(TICKET) == {"ok": len(r.latencies(TICKET))}
    assert len(r.latencies(PSEUDONYMS)) >= 3
    served = [s for s in r.samples if s.op in (TICKET, PSEUDONYMS)]
    assert len(served) == r.meta["issued"]


def test_live_run_records_failures(live_domain):
    d, urls = live_domain
    urls = dict(urls, **{d.pca.id: "http://127.0.0.1:9"})
    cfg = LoadConfig(total_vehicles=2, hatch_rate=10, think_time_ms=(50, 100),
                     batch_sizes=(3,), duration=0.6, tau_p=60)
    r = run_load(cfg, endpoints=descriptor_for(d, urls), anchors=[d.rca.certificate])
    assert r.outcomes(PSEUDONYMS)["TransportError"] >= 2
    assert r.outcomes(TICKET)["ok"] >= 2
    assert sum(r.outcomes(TICKET).values()) + sum(r.outcomes(PSEUDONYMS).values()) == r.meta["issued"]


def test_random_think_bounds():
    r = _sim()
    lo, hi = SMALL.think_time_ms
    assert all(lo / 1000 <= row[4] <= hi / 1000 for row in r.schedule)
    assert {row[3] for row in r.schedule} <= set(SMALL.batch_sizes)
