from p4te.engine import NS_PER_SEC, EventLoop
from p4te.link import DROPPED, UNITS_PER_PACKET, Link
from p4te.packet import Packet, TrafficClass


def pkt(uid, payload=1000):
    return Packet(uid, 1, 2, 3, 4, TrafficClass.SHORT, payload + 40, payload=payload)


def make(pps=20, cap=4, prop=1000, unit_buffer=0):
    loop = EventLoop()
    link = Link("a->b", loop, pps * UNITS_PER_PACKET, prop, cap, bandwidth_pps=pps, unit_buffer=unit_buffer)
    got = []
    link.connect(lambda p, port: got.append((loop.now, p.uid, port)), rx_port=7)
    return loop, link, got


def test_single_packet_delay_is_serialization_plus_propagation():
    loop, link, got = make(pps=20, prop=1000)
    assert link.enqueue(pkt(1), 0, UNITS_PER_PACKET) == 0
    loop.run_until(NS_PER_SEC)
    assert got == [(NS_PER_SEC // 20 + 1000, 1, 7)]


def test_tail_drop_at_capacity():
    # 0.2 x 40 pps = 8 packets
    loop, link, got = make(pps=40, cap=8)
    depths = [link.enqueue(pkt(i), 0, UNITS_PER_PACKET) for i in range(10)]
    assert depths[:8] == list(range(8))
    assert depths[8:] == [DROPPED, DROPPED]
    assert link.drop == 2 and link.tx == 8
    assert link.check_conservation(0)
    loop.run_until(10 * NS_PER_SEC)
    assert [u for _, u, _ in got] == list(range(8))
    assert link.check_conservation(loop.now) and link.depth(loop.now) == 0


def test_fifo_back_to_back_spacing():
    loop, link, got = make(pps=10, prop=0)
    for i in range(3):
        link.enqueue(pkt(i), 0, UNITS_PER_PACKET)
    loop.run_until(NS_PER_SEC)
    assert [t for t, _, _ in got] == [100_000_000, 200_000_000, 300_000_000]


def test_control_packets_cost_fractional_slots():
    loop, link, got = make(pps=16, prop=0)
    ack = Packet(1, 1, 2, 3, 4, TrafficClass.SHORT, 64)
    link.enqueue(ack, 0, 1)
    loop.run_until(NS_PER_SEC)
    assert got[0][0] == NS_PER_SEC // 256


def test_unit_buffer_counts_cost_units():
    loop, link, _ = make(pps=20, cap=2, unit_buffer=UNITS_PER_PACKET)
    ack = lambda u: Packet(u, 1, 2, 3, 4, TrafficClass.SHORT, 64)
    assert link.enqueue(pkt(1), 0, UNITS_PER_PACKET) == 0
    # sixteen header-only packets fill exactly one more slot
    depths = [link.enqueue(ack(10 + i), 0, 1) for i in range(16)]
    assert depths[0] == 1 and depths[-1] == 2
    assert link.enqueue(ack(99), 0, 1) == DROPPED
    assert link.occupancy() == 2
    assert link.check_conservation(0)
