import pytest

from ethersim.engine import Engine, rng_stream
from ethersim.mac import EthernetBus, EthernetParams


class BusHarness:
    """A bare bus with recorded deliveries and drops."""

    def __init__(self, n=4, seed="test", **params):
        self.engine = Engine()
        self.params = EthernetParams(**params)
        self.delivered = []
        self.dropped = []
        self.bus = EthernetBus(
            self.engine,
            self.params,
            [rng_stream(seed, f"mac{i}") for i in range(n)],
            on_delivery=lambda f, t: self.delivered.append((t, f)),
            on_drop=lambda f, cause, t: self.dropped.append((t, f, cause)),
        )

    def station(self, i):
        return self.bus.stations[i]

    def success_intervals(self):
        return sorted((t - self.params.frame_duration(f.payload_bytes), t) for t, f in self.delivered)


@pytest.fixture
def harness():
    return BusHarness
