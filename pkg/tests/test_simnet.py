import pytest

from centralarp.simnet import (
    DeliveryPolicy,
    DuplicateMac,
    Simulation,
    TimeLimitExceeded,
)
from centralarp.wire import BROADCAST, ArpOp, Frame, IPv4Address, MacAddr, StdArp, ZERO_MAC, encode_frame


class Sink:
    def __init__(self):
        self.got = []

    def on_frame(self, sim, data):
        self.got.append((sim.now, data))


def mac(i):
    return MacAddr.from_int(0x020000000000 + i)


def arp_to(dest, src=mac(1)):
    body = StdArp(ArpOp.REQUEST, src, IPv4Address("10.0.0.1"), ZERO_MAC, IPv4Address("10.0.0.2"))
    return encode_frame(Frame(dest, src, body))


def net(n=3, **kw):
    sim = Simulation(**kw)
    sinks = [Sink() for _ in range(n)]
    ids = [sim.register_node(mac(i + 1), s) for i, s in enumerate(sinks)]
    return sim, sinks, ids


def test_broadcast_reaches_everyone_else():
    sim, sinks, ids = net()
    sim.send(ids[0], arp_to(BROADCAST))
    sim.run_until_quiescent()
    assert [len(s.got) for s in sinks] == [0, 1, 1]
    assert sim.messages_sent() == 1
    assert len(sim.trace) == 2


def test_unicast_delivery_and_delay():
    sim, sinks, ids = net(default_policy=DeliveryPolicy(delay=3))
    sim.send(ids[0], arp_to(mac(3)))
    sim.run_until_quiescent()
    assert sinks[2].got[0][0] == 3
    assert not sinks[1].got


def test_duplicate_mac():
    sim, _, _ = net(1)
    with pytest.raises(DuplicateMac):
        sim.register_node(mac(1), Sink())


def test_rebind_then_old_mac_unreachable():
    sim, sinks, ids = net()
    old = sim.rebind_mac(ids[2], mac(9))
    assert old == mac(3)
    sim.send(ids[0], arp_to(mac(3)))
    sim.run_until_quiescent()
    assert not sinks[2].got
    assert sim.trace[-1].recipient is None and not sim.trace[-1].delivered


def test_frame_in_flight_lost_on_rebind():
    sim, sinks, ids = net(default_policy=DeliveryPolicy(delay=5))
    sim.send(ids[0], arp_to(mac(3)))
    sim.schedule(2, lambda: sim.rebind_mac(ids[2], mac(9)))
    sim.run_until_quiescent()
    assert not sinks[2].got


def test_release_watcher_fires_once():
    sim, _, ids = net()
    fired = []
    sim.watch_release(mac(3), fired.append)
    sim.rebind_mac(ids[2], mac(9))
    sim.rebind_mac(ids[2], mac(3))
    sim.rebind_mac(ids[2], mac(10))
    assert fired == [mac(3)]


def test_drop_policy_is_seeded():
    def run(seed):
        sim, sinks, ids = net(seed=seed)
        sim.set_policy(ids[1], DeliveryPolicy(p_drop=0.5))
        sim.send(ids[0], arp_to(mac(2)), copies=200)
        sim.run_until_quiescent()
        return [e.delivered for e in sim.trace]

    a = run(4)
    assert a == run(4)
    assert a != run(5)
    assert 60 < sum(a) < 140


def test_copies_have_distinct_send_ids():
    sim, sinks, ids = net()
    sim.send(ids[0], arp_to(mac(2)), copies=50)
    sim.run_until_quiescent()
    assert sim.messages_sent() == 50
    assert len(sinks[1].got) == 50


def test_events_ordered_by_time_then_insertion():
    sim = Simulation()
    order = []
    sim.schedule(5, lambda: order.append("b"))
    sim.schedule(1, lambda: order.append("a"))
    sim.schedule(5, lambda: order.append("c"))
    sim.run_until_quiescent()
    assert order == ["a", "b", "c"]


def test_episode_inherited_by_scheduled_events():
    sim, sinks, ids = net()
    sim.schedule(1, lambda: sim.send(ids[0], arp_to(mac(2))), episode="ep")
    sim.run_until_quiescent()
    assert sim.trace[0].episode == "ep"
    assert sim.episode == ""


def test_time_limit():
    sim = Simulation()

    def tick():
        sim.schedule(10, tick)

    sim.schedule(0, tick)
    with pytest.raises(TimeLimitExceeded):
        sim.run_until_quiescent(max_time=100)


def test_policy_validation():
    with pytest.raises(ValueError):
        DeliveryPolicy(p_drop=1.5)
    with pytest.raises(ValueError):
        Simulation().schedule(-1, lambda: None)


def test_trace_line_format():
    sim, _, ids = net()
    sim.send(ids[0], arp_to(mac(2)))
    line = sim.trace[0].to_line()
    assert line.split("\t")[4] == "ARP_REQUEST"
    assert sim.trace[0].to_dict()["disposition"] == "delivered"
