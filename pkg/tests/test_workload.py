import numpy as np
import pytest
from scipy.stats import chisquare

from ethersim.engine import NS_PER_S, Engine
from ethersim.mac import DROP_COLLISION, EthernetBus, EthernetParams, Frame
from ethersim.simulation import NetworkSimulation
from ethersim.workload import (
    Distribution,
    FileTransferWorkload,
    StationId,
    Transfer,
    TransferSpec,
    WorkloadConfig,
    calibrated_think_mean,
    segment_file,
)


@pytest.mark.parametrize(
    "size, expected",
    [(5120, [1024] * 5), (1, [1]), (5000, [1024] * 4 + [904]), (1024, [1024])],
)
def test_segment_file(size, expected):
    assert segment_file(size) == expected


def test_segment_file_rejects_empty():
    with pytest.raises(ValueError):
        segment_file(0)


@pytest.mark.parametrize(
    "text, kind, mean",
    [("exponential:65536", "exponential", 65536), ("constant:5120", "constant", 5120),
     ("uniform:2:4", "uniform", 3), ("pareto:1.5:65536", "pareto", 65536)],
)
def test_distribution_parse(text, kind, mean):
    d = Distribution.parse(text)
    assert d.kind == kind and d.mean == pytest.approx(mean)
    assert Distribution.parse(str(d)) == d


@pytest.mark.parametrize("text", ["normal:1", "exponential", "exponential:-1", "pareto:0.9:10", "constant:x"])
def test_distribution_parse_errors(text):
    with pytest.raises(ValueError):
        Distribution.parse(text)


def test_pareto_sample_mean():
    import random

    d = Distribution.parse("pareto:3:100")
    rng = random.Random(4)
    assert np.mean([d.sample(rng) for _ in range(200_000)]) == pytest.approx(100, rel=0.02)


def _workload(n_servers=2, **kw):
    cfg = WorkloadConfig(n_clients=4, n_servers=n_servers, **kw)
    eng = Engine()
    bus = EthernetBus(eng, EthernetParams(), [__import__("random").Random(i) for i in range(4 + n_servers)])
    wl = FileTransferWorkload(eng, bus, cfg, seed=11)
    bus.on_delivery, bus.on_drop = wl.on_delivery, wl.on_drop
    return eng, bus, wl


def test_server_choice_uniform():
    _, _, wl = _workload()
    client = wl.clients[0]
    picks = [wl.next_request(client).server.index for _ in range(100_000)]
    counts = np.bincount(picks)[4:]
    assert chisquare(counts).pvalue > 1e-3
    sigma = np.sqrt(100_000 * 0.25)
    assert abs(counts[0] - 50_000) < 5 * sigma


def test_single_server_always_chosen():
    _, _, wl = _workload(n_servers=1)
    assert {wl.next_request(wl.clients[1]).server.index for _ in range(1000)} == {4}


def test_constant_file_size():
    _, _, wl = _workload(file_size_dist=Distribution.parse("constant:5120"))
    assert {wl.next_request(wl.clients[2]).file_bytes for _ in range(100)} == {5120}


def test_request_reply_cycle_completes():
    eng, bus, wl = _workload(file_size_dist=Distribution.parse("constant:5120"),
                             think_time_dist=Distribution.parse("constant:1"))
    wl.keep_transfers = True
    wl.start()
    eng.run_until(3 * NS_PER_S)
    done = wl.completed
    assert len(done) >= 8
    for tr in done:
        assert tr.n_segments == 5 and tr.delivered_bytes + tr.dropped_bytes == 5120
    # strict alternation: per client, completions precede the next request
    for c in range(4):
        mine = [t for t in done if t.spec.client.index == c]
        for a, b in zip(mine, mine[1:]):
            assert a.completed_at <= b.spec.request_time


def test_zero_think_time_requests_immediately():
    eng, bus, wl = _workload(file_size_dist=Distribution.parse("constant:1024"),
                             think_time_dist=Distribution.parse("constant:0"))
    wl.keep_transfers = True
    wl.start()
    eng.run_until(NS_PER_S // 10)
    by_client = {}
    for tr in wl.completed:
        by_client.setdefault(tr.spec.client.index, []).append(tr)
    for trs in by_client.values():
        for a, b in zip(trs, trs[1:]):
            assert b.spec.request_time == a.completed_at


def test_dropped_segment_still_completes_transfer():
    eng, bus, wl = _workload()
    client = wl.clients[0]
    spec = TransferSpec(client.sid, StationId(4, "server"), 5 * 1024, 0)
    tr = Transfer(spec, n_segments=5)
    client.in_flight = tr
    for i in range(5):
        f = Frame(4, 0, 1024, tag=tr)
        if i == 2:
            wl.on_drop(f, DROP_COLLISION, 0)
        else:
            wl.on_delivery(f, 0)
    assert tr.completed_at == 0
    assert tr.delivered_bytes == 4096 and tr.dropped_bytes == 1024
    assert client.in_flight is None


def test_dropped_request_counts_whole_file():
    eng, bus, wl = _workload()
    client = wl.clients[1]
    tr = Transfer(TransferSpec(client.sid, StationId(5, "server"), 3000, 0))
    client.in_flight = tr
    wl.on_drop(Frame(1, 5, 64, tag=tr), DROP_COLLISION, 0)
    assert tr.request_dropped and tr.dropped_bytes == 3000 and client.in_flight is None


def test_calibrated_think_mean_targets_load():
    cfg = WorkloadConfig()
    think = calibrated_think_mean(cfg, EthernetParams())
    service = (64.5 * (819_200 + 9_600) + 51_200 + 9_600) / 1e9
    load = 32 * 65536 * 8 / ((think + service) * 10e6)
    assert load == pytest.approx(0.4)


def test_load_modulation_switches_think_time():
    cfg = WorkloadConfig(congestion_periods_s=(5.0, 5.0))
    sim = NetworkSimulation(EthernetParams(), cfg, seed=2)
    wl = sim.workload
    wl.start()
    assert wl.congested
    assert wl.think.mean == pytest.approx(calibrated_think_mean(cfg, EthernetParams(), 1.0))
    states = set()
    for t in range(1, 60):
        sim.engine.run_until(t * NS_PER_S)
        states.add(wl.congested)
    assert states == {True, False}
