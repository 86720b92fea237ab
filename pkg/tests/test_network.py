import math
import random

import pytest

from eatsss.network import NetworkState, Routing, serve_rate_bps, split_bytes
from eatsss.steering import WATS, SteeringMode

G, W, L = WATS
LB, SD = SteeringMode.LOAD_BALANCING, SteeringMode.SPLIT_DUPLICATE
MB = 1_000_000


def net_with(users=(1,), cap=50 * MB):
    net = NetworkState({(w, 1): cap for w in WATS})
    for u in users:
        for w in WATS:
            net.set_serving(u, w, (w, 1))
    return net


def lb(g, w, l):
    return Routing(LB, {G: g, W: w, L: l})


def test_serve_rate_examples():
    assert serve_rate_bps(-math.inf, 20e6) == 0.0
    assert serve_rate_bps(0.0, 20e6, 1.0) == pytest.approx(20e6)
    assert serve_rate_bps(29.0, 80e6, 0.6) == pytest.approx(0.6 * 80e6 * math.log2(1 + 10**2.9))
    assert serve_rate_bps(29.0, 80e6, 0.6, max_rate_bps=1e8) == 1e8
    with pytest.raises(ValueError):
        serve_rate_bps(10, 0.0)


def test_split_bytes_exact():
    assert split_bytes({G: 50, W: 0, L: 50}, MB) == {G: MB // 2, W: 0, L: MB // 2}
    parts = split_bytes({G: 1, W: 1, L: 1}, 10)
    assert sum(parts.values()) == 10 and max(parts.values()) - min(parts.values()) <= 1


def test_enqueue_examples():
    net = net_with()
    net.enqueue(1, lb(100, 0, 0), MB, 0.0)
    assert [net.queues[(w, 1)].total_queued_bytes for w in WATS] == [MB, 0, 0]
    net = net_with()
    net.enqueue(1, Routing(SD, {G: 100, W: 100, L: 100}), MB, 0.0)
    assert [net.queues[(w, 1)].total_queued_bytes for w in WATS] == [MB] * 3
    net = net_with()
    net.enqueue(1, lb(50, 0, 50), MB, 0.0)
    assert [net.queues[(w, 1)].total_queued_bytes for w in WATS] == [MB // 2, 0, MB // 2]


def test_overflow_is_dropped_and_counted():
    net = net_with(cap=MB)
    net.enqueue(1, lb(100, 0, 0), 3 * MB, 0.0)
    q = net.queues[(G, 1)]
    assert q.total_queued_bytes == MB and q.dropped_bytes == 2 * MB and q.buffer_pct == 100
    assert net.conservation_error() == 0


def test_advance_examples():
    net = net_with()
    assert net.advance(0.1, {}, 0.1) == {}
    net.enqueue(1, lb(100, 0, 0), 10 * MB, 0.0)
    served = net.advance(0.1, {(1, G): 80e6}, 0.1)
    assert served == {(1, G): 1_000_000}
    net = net_with(users=(1, 2))
    net.enqueue(1, lb(100, 0, 0), 10 * MB, 0.0)
    net.enqueue(2, lb(100, 0, 0), 10 * MB, 0.0)
    served = net.advance(0.1, {(1, G): 80e6, (2, G): 80e6}, 0.1)
    assert served == {(1, G): 500_000, (2, G): 500_000}
    with pytest.raises(ValueError):
        net.advance(0.0, {}, 0.0)


def test_delay_examples():
    net = net_with(users=(1, 2))
    assert net.user_delay_ms(1, G, {}) == 0.0
    net.enqueue(1, lb(100, 0, 0), 125_000, 0.0)  # 1 Mbit
    assert net.user_delay_ms(1, G, {(1, G): 100e6}) == pytest.approx(10.0)
    net.enqueue(2, lb(100, 0, 0), 40 * MB, 0.0)
    assert net.user_delay_ms(2, G, {(1, G): 100e6, (2, G): 100e6}) == 100.0
    # the other user drains first, so it only adds its own 10 ms
    assert net.user_delay_ms(1, G, {(1, G): 100e6, (2, G): 100e6}) == pytest.approx(20.0)
    net.set_serving(1, L, None)
    assert net.user_delay_ms(1, L, {}) is None


def test_handover_forwards_queue():
    net = NetworkState({(G, 1): 50 * MB, (G, 2): 50 * MB})
    net.set_serving(1, G, (G, 1))
    net.enqueue(1, lb(100, 0, 0), MB, 0.0)
    net.set_serving(1, G, (G, 2))
    assert net.queues[(G, 1)].total_queued_bytes == 0
    assert net.queues[(G, 2)].total_queued_bytes == MB
    assert net.queues[(G, 1)].forwarded_out == MB == net.queues[(G, 2)].forwarded_in
    net.set_serving(1, G, None)
    assert net.totals()["dropped"] == MB and net.conservation_error() == 0


def test_unrouted_bytes_are_lost():
    net = NetworkState({(G, 1): MB})
    fp = net.enqueue(1, lb(100, 0, 0), 1000, 0.0)
    assert fp.done and not fp.intact
    assert net.totals()["dropped"] == 1000 and net.conservation_error() == 0


def test_drains_to_zero_without_arrivals():
    net = net_with(users=(1, 2, 3))
    for u in (1, 2, 3):
        net.enqueue(u, lb(40, 30, 30), 3 * MB, 0.0)
    rates = {(u, w): 50e6 for u in (1, 2, 3) for w in WATS}
    t = 0.0
    for _ in range(100):
        t += 0.1
        net.advance(0.1, rates, t)
    assert net.totals()["queued"] == 0
    assert all(net.user_delay_ms(u, w, rates) == 0 for u in (1, 2, 3) for w in WATS)
    assert all(f.done and f.intact for f in net.iter_files())


def test_sd_first_copy_completes_and_flushes():
    net = net_with()
    fp = net.enqueue(1, Routing(SD, {G: 100, W: 100, L: 0}), MB, 0.0)
    net.advance(0.1, {(1, G): 80e6, (1, W): 8e6}, 0.1)
    assert fp.done and fp.intact and fp.completed_s == 0.1
    assert net.queues[(W, 1)].total_queued_bytes == 0
    # nodes are served in WAT order within a step, so the WiFi copy never started
    assert net.queues[(W, 1)].flushed_bytes == MB
    assert net.conservation_error() == 0


def _completion(routing, size, rates, background, seed_steps=400):
    net = net_with(users=(1, 2, 3))
    for u, wat, nbytes in background:
        net.enqueue(u, lb(*(100 if w is wat else 0 for w in WATS)), nbytes, 0.0)
    fp = net.enqueue(1, routing, size, 0.0)
    t = 0.0
    for k in range(1, seed_steps + 1):
        if fp.done:
            break
        t = round(k * 0.1, 9)
        net.advance(0.1, rates, t)
        assert net.conservation_error() == 0
    return fp.completed_s if fp.done else math.inf


@pytest.mark.parametrize("seed", range(25))
def test_sd_never_slower_than_best_single_wat(seed):
    rnd = random.Random(seed)
    selected = [w for w in WATS if rnd.random() < 0.7] or [G]
    rates = {(u, w): rnd.uniform(1e6, 2e8) for u in (1, 2, 3) for w in WATS}
    background = [(rnd.choice((2, 3)), rnd.choice(WATS), rnd.randint(1, 5 * MB)) for _ in range(rnd.randint(0, 4))]
    size = rnd.randint(1000, 8 * MB)
    sd = _completion(Routing(SD, {w: 100 if w in selected else 0 for w in WATS}), size, rates, background)
    singles = [_completion(Routing(SD, {w: 100 if w is s else 0 for w in WATS}), size, rates, background)
               for s in selected]
    assert sd == min(singles)


@pytest.mark.parametrize("seed", range(10))
def test_random_conservation(seed):
    rnd = random.Random(100 + seed)
    nodes = {(w, i): rnd.randint(MB, 20 * MB) for w in WATS for i in (1, 2)}
    net = NetworkState(nodes)
    users = range(5)
    t = 0.0
    for step in range(300):
        if step % 10 == 0:
            for u in users:
                for w in WATS:
                    net.set_serving(u, w, rnd.choice([(w, 1), (w, 2), None]))
        for u in users:
            if rnd.random() < 0.3:
                r = lb(rnd.random(), rnd.random(), rnd.random()) if rnd.random() < 0.5 else \
                    Routing(SD, {w: 100 * (rnd.random() < 0.5) for w in WATS})
                net.enqueue(u, r, rnd.randint(1, 3 * MB), t)
        t = round(t + 0.1, 9)
        net.advance(0.1, {(u, w): rnd.uniform(0, 1e8) for u in users for w in WATS}, t)
        assert net.conservation_error() == 0
        assert all(0 <= q.buffer_pct <= 100 for q in net.queues.values())
        assert all(q.total_queued_bytes == sum(q.user_bytes.values()) for q in net.queues.values())
