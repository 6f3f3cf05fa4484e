"""Replica-count controller driven by a utilization metric."""

from __future__ import annotations

import math

from .config import ScalePolicy


class ScalingController:
    """desired = ceil(current * utilization / target), clamped to [min, max].

    Scale-out is applied at once. Scale-in waits until utilization has been
    below target for ``policy.scale_in_ticks`` consecutive ticks.
    """

    def __init__(self, policy: ScalePolicy, current: int | None = None):
        self.policy = policy
        self.current = policy.min_replicas if current is None else current
        self._below = 0

    def desired(self, utilization: float) -> int:
        p = self.policy
        want = math.ceil(self.current * utilization / p.target_utilization - 1e-9)
        return max(p.min_replicas, min(p.max_replicas, want))

    def tick(self, utilization: float) -> int:
        want = self.desired(utilization)
        if utilization < self.policy.target_utilization:
            self._below += 1
        else:
            self._below = 0
        if want > self.current:
            self.current = want
        elif want < self.current and self._below >= self.policy.scale_in_ticks:
            self.current = want
            self._below = 0
        return self.current


def run_controller(policy: ScalePolicy, utilizations, current: int | None = None) -> list[int]:
    """Replica-count timeline for a stream of per-tick utilization samples."""
    ctl = ScalingController(policy, current)
    return [ctl.tick(u) for u in utilizations]
