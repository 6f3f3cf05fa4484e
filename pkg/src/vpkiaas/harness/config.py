"""Workload and autoscaling parameters."""

from __future__ import annotations

import sys
from dataclasses import dataclass, field

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib


@dataclass(frozen=True)
class FlashCrowd:
    start: float  # seconds after the run begins
    vehicles: int
    hatch_rate: float  # vehicles/s
    duration: float  # burst vehicles leave after this long
    batch_sizes: tuple[int, ...] = (100,)

    def __post_init__(self):
        if self.hatch_rate <= 0 or self.vehicles < 0 or self.duration < 0 or self.start < 0:
            raise ValueError("flash crowd rates and times must be non-negative, hatch rate positive")


@dataclass(frozen=True)
class LoadConfig:
    total_vehicles: int = 100
    hatch_rate: float = 1.0
    think_time_ms: tuple[int, int] = (1000, 5000)
    batch_sizes: tuple[int, ...] = (100,)
    duration: float = 120.0  # seconds of offered load
    cooldown: float = 0.0  # idle seconds simulated after the load stops
    flash_crowd: FlashCrowd | None = None
    tau_p: int = 172  # short enough for a 500-pseudonym batch inside one day

    def __post_init__(self):
        lo, hi = self.think_time_ms
        if self.hatch_rate <= 0 or self.total_vehicles < 0:
            raise ValueError("hatch_rate must be positive and total_vehicles non-negative")
        if not 0 <= lo <= hi:
            raise ValueError("think time needs 0 <= min <= max")
        if not self.batch_sizes or min(self.batch_sizes) < 1:
            raise ValueError("batch sizes must be positive")
        if self.duration < 0 or self.cooldown < 0:
            raise ValueError("duration and cooldown must be non-negative")


@dataclass(frozen=True)
class ScalePolicy:
    min_replicas: int = 1
    max_replicas: int = 10
    target_utilization: float = 0.6
    tick: float = 5.0
    scale_in_ticks: int = 3

    def __post_init__(self):
        if not 1 <= self.min_replicas <= self.max_replicas:
            raise ValueError("need 1 <= min_replicas <= max_replicas")
        if not 0 < self.target_utilization < 1:
            raise ValueError("target utilization must lie in (0, 1)")
        if self.tick <= 0 or self.scale_in_ticks < 1:
            raise ValueError("tick must be positive and scale_in_ticks >= 1")


@dataclass(frozen=True)
class ClusterConfig:
    ltca: ScalePolicy = field(default_factory=lambda: ScalePolicy(1, 4))
    pca: ScalePolicy = field(default_factory=lambda: ScalePolicy(1, 12))
    workers_per_replica: int = 1
    startup_delay: float = 2.0  # seconds before a new replica takes work
    calibration: int = 16  # real service calls measured per (op, batch size)


def _tuple(v):
    return tuple(v) if isinstance(v, (list, tuple)) else (v,)


def load_run_config(path) -> tuple[LoadConfig, ClusterConfig]:
    """Read ``[load]``, ``[load.flash_crowd]``, ``[cluster]``, ``[cluster.ltca]``, ``[cluster.pca]``."""
    with open(path, "rb") as fh:
        raw = tomllib.load(fh)
    load = dict(raw.get("load", {}))
    fc = load.pop("flash_crowd", None)
    if "think_time_ms" in load:
        load["think_time_ms"] = tuple(load["think_time_ms"])
    if "batch_sizes" in load:
        load["batch_sizes"] = _tuple(load["batch_sizes"])
    if fc is not None:
        if "batch_sizes" in fc:
            fc["batch_sizes"] = _tuple(fc["batch_sizes"])
        load["flash_crowd"] = FlashCrowd(**fc)
    cl = dict(raw.get("cluster", {}))
    for kind in ("ltca", "pca"):
        if kind in cl:
            cl[kind] = ScalePolicy(**cl[kind])
    return LoadConfig(**load), ClusterConfig(**cl)
