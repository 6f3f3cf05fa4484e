"""Service configuration: ``key = value`` file plus ``VPKI_*`` env overrides."""

from __future__ import annotations

import dataclasses
import os
import sys
from dataclasses import dataclass, fields
from pathlib import Path

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

ENV_PREFIX = "VPKI_"


@dataclass
class ServiceConfig:
    tau_p: int = 300  # pseudonym lifetime, seconds
    gamma: int = 86_400  # longest window a single ticket may cover, seconds
    epoch: int = 0  # alignment origin for pseudonym slots
    freshness_window: int = 300  # accepted |t_now - clock|, seconds
    grace: int = 0  # exp_tkt = t_e + grace
    fail_policy: str = "close"  # "open" or "close" when the guard is down
    max_batch: int = 1000
    workers: int = 4
    rate_limit_per_min: int = 10

    def __post_init__(self):
        if self.fail_policy not in ("open", "close"):
            raise ValueError(f"fail_policy must be 'open' or 'close', not {self.fail_policy!r}")
        if self.tau_p <= 0 or self.gamma <= 0:
            raise ValueError("tau_p and gamma must be positive")

    @property
    def fail_open(self) -> bool:
        return self.fail_policy == "open"

    def replace(self, **changes) -> "ServiceConfig":
        return dataclasses.replace(self, **changes)


def _coerce(value, typ):
    if typ in (int, "int"):
        return int(value)
    if typ in (float, "float"):
        return float(value)
    if typ in (bool, "bool"):
        return str(value).lower() in ("1", "true", "yes", "on")
    return str(value)


def load_config(path: str | os.PathLike | None = None, env: dict | None = None) -> ServiceConfig:
    """Read a flat TOML file (unknown keys are ignored) then apply env overrides."""
    raw: dict = {}
    if path is not None:
        with open(Path(path), "rb") as fh:
            raw = tomllib.load(fh)
    env = os.environ if env is None else env
    values = {}
    for f in fields(ServiceConfig):
        if f.name in raw:
            values[f.name] = _coerce(raw[f.name], f.type)
        env_key = ENV_PREFIX + f.name.upper()
        if env_key in env:
            values[f.name] = _coerce(env[env_key], f.type)
    return ServiceConfig(**values)
