"""Load generation, latency reporting and replica autoscaling."""

from __future__ import annotations

from .config import ClusterConfig, FlashCrowd, LoadConfig, ScalePolicy, load_run_config
from .race import RaceOutcome, sybil_race
from .report import LatencyReport, Sample, cdf, percentile
from .scaler import ScalingController, run_controller
from .sim import FixedServiceTimes, MeasuredServiceTimes, Simulation


def run_load(config: LoadConfig, endpoints=None, seed: int = 0, cluster: ClusterConfig | None = None,
             service_times=None, anchors=()) -> LatencyReport:
    """Drive ``config`` and return the latency report.

    Without ``endpoints`` the run is a virtual-time simulation of autoscaled
    replica pools whose service times are measured from real in-process
    calls. With ``endpoints`` (a DomainDescriptor carrying URLs) vehicles
    hit the HTTP services in real time.
    """
    if endpoints is not None:
        from .live import run_live

        return run_live(config, endpoints, anchors, seed)
    cluster = cluster or ClusterConfig()
    if service_times is None:
        service_times = MeasuredServiceTimes(cluster.calibration, config.tau_p, seed)
    return Simulation(config, cluster, service_times, seed).run()


__all__ = [
    "ClusterConfig", "FlashCrowd", "LoadConfig", "ScalePolicy", "load_run_config",
    "RaceOutcome", "sybil_race", "LatencyReport", "Sample", "cdf", "percentile",
    "ScalingController", "run_controller", "FixedServiceTimes", "MeasuredServiceTimes",
    "Simulation", "run_load",
]
