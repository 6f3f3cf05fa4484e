"""Latency samples, percentiles, CDF tables and report writers."""

from __future__ import annotations

import csv
import json
import math
import threading
from collections import Counter
from dataclasses import asdict, dataclass, field
from pathlib import Path

PERCENTILES = (50.0, 90.0, 99.0, 99.9)
OK = "ok"


@dataclass(frozen=True)
class Sample:
    op: str
    t_submit_ms: float
    latency_ms: float
    outcome: str = OK
    vehicle: int = -1


def percentile(values, p: float) -> float:
    """Nearest-rank percentile; NaN for an empty sample."""
    xs = sorted(values)
    if not xs:
        return math.nan
    k = max(1, math.ceil(p * len(xs) / 100.0 - 1e-9))
    return xs[k - 1]


def cdf(values) -> list[tuple[float, float]]:
    """(x, F(x)) at every distinct sample value, F = rank of last tie / count."""
    xs = sorted(values)
    n = len(xs)
    out = []
    for i, x in enumerate(xs, 1):
        if i < n and xs[i] == x:
            continue
        out.append((x, i / n))
    return out


@dataclass
class LatencyReport:
    samples: list[Sample] = field(default_factory=list)
    replicas: dict[str, list[tuple[float, int]]] = field(default_factory=dict)
    utilization: dict[str, list[tuple[float, float]]] = field(default_factory=dict)
    rps: list[tuple[float, float]] = field(default_factory=list)
    schedule: list[tuple] = field(default_factory=list)
    meta: dict = field(default_factory=dict)
    _lock: threading.Lock = field(default_factory=threading.Lock, repr=False, compare=False)

    def record(self, s: Sample) -> None:
        with self._lock:
            self.samples.append(s)

    def ops(self) -> list[str]:
        return sorted({s.op for s in self.samples})

    def latencies(self, op: str | None = None, outcome: str | None = OK,
                  window: tuple[float, float] | None = None) -> list[float]:
        out = []
        for s in self.samples:
            if op is not None and s.op != op:
                continue
            if outcome is not None and s.outcome != outcome:
                continue
            if window is not None and not window[0] <= s.t_submit_ms < window[1]:
                continue
            out.append(s.latency_ms)
        return out

    def percentiles(self, op: str | None = None, window=None) -> dict[str, float]:
        xs = self.latencies(op, window=window)
        return {f"p{p:g}": percentile(xs, p) for p in PERCENTILES}

    def outcomes(self, op: str | None = None) -> Counter:
        return Counter(s.outcome for s in self.samples if op is None or s.op == op)

    def summary(self) -> dict:
        out = {}
        for op in self.ops():
            xs = self.latencies(op)
            out[op] = {
                "count": len(xs),
                "mean": sum(xs) / len(xs) if xs else math.nan,
                **self.percentiles(op),
                "outcomes": dict(self.outcomes(op)),
            }
        return out

    # --- writers ------------------------------------------------------

    def to_json(self) -> dict:
        return {
            "meta": self.meta,
            "summary": self.summary(),
            "replicas": self.replicas,
            "utilization": self.utilization,
            "rps": self.rps,
            "schedule_length": len(self.schedule),
        }

    def write_json(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json(), indent=2, default=_nan_safe))

    def write_csv(self, path) -> None:
        with open(path, "w", newline="") as fh:
            w = csv.writer(fh)
            w.writerow(["op", "t_submit_ms", "latency_ms", "outcome"])
            for s in self.samples:
                w.writerow([s.op, f"{s.t_submit_ms:.3f}", f"{s.latency_ms:.3f}", s.outcome])

    def write_cdf(self, path) -> None:
        """gnuplot-ready: one indexed block per op, columns latency_ms and F."""
        with open(path, "w") as fh:
            for op in self.ops():
                fh.write(f"# op={op}\n")
                for x, f in cdf(self.latencies(op)):
                    fh.write(f"{x:.3f}\t{f:.6f}\n")
                fh.write("\n\n")

    def write_all(self, json_path) -> list[Path]:
        base = Path(json_path)
        paths = [base, base.with_suffix(".csv"), base.with_suffix(".cdf.dat")]
        self.write_json(paths[0])
        self.write_csv(paths[1])
        self.write_cdf(paths[2])
        return paths


def _nan_safe(obj):
    if isinstance(obj, Counter):
        return dict(obj)
    return asdict(obj) if hasattr(obj, "__dataclass_fields__") else str(obj)
