import pytest

from vpkiaas.client import Vehicle
from vpkiaas.gateway.config import ServiceConfig
from vpkiaas.gateway.domain import Domain

T0 = 1_800_000_000


class FakeClock:
    def __init__(self, t: float = T0):
        self.t = float(t)

    def __call__(self) -> float:
        return self.t

    def advance(self, dt: float) -> None:
        self.t += dt


@pytest.fixture
def clock():
    return FakeClock()


@pytest.fixture
def config():
    return ServiceConfig(tau_p=300)


@pytest.fixture
def domain(clock, config):
    return Domain.create("d1", pca_ids=("pca-1", "pca-2"), config=config, clock=clock)


@pytest.fixture
def enroll(domain, clock):
    def make():
        return Vehicle.enroll(domain.ltca, domain.ltca.id, domain.trust,
                              tau_p=domain.config.tau_p, clock=clock)
    return make


@pytest.fixture
def vehicle(enroll):
    return enroll()


def guard_state(store) -> dict:
    """Guard contents with reverted single-use flags (False) treated as absent."""
    return {k: v for k, v in store.snapshot().items() if v is not False}
