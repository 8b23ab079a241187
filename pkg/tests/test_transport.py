import itertools

import pytest

from p4te.engine import EventLoop
from p4te.packet import Flag, Packet, TrafficClass
from p4te.transport import FlowState, Receiver, Sender, TransportConfig

MSS = 1000
CFG = TransportConfig(mss=MSS, init_cwnd_segments=2, max_cwnd=200 * MSS, rto_initial=200_000_000,
                      rto_min=200_000_000, rto_max=2_000_000_000, header_bytes=40)


def make(size=100 * MSS, cfg=CFG):
    loop = EventLoop()
    out = []
    done = []
    uid = itertools.count(1)
    s = Sender(1, (1, 2, 3, 4, 5), size, TrafficClass.SHORT, cfg, loop, out.append, lambda: next(uid), done.append)
    return s, loop, out, done


def ack(n, flags=Flag.ACK, window=0):
    return Packet(0, 3, 1, 4, 2, TrafficClass.SHORT, 64, ack=n, flags=flags, window=window)


def test_initial_window_sends_two_segments():
    s, loop, out, _ = make()
    s.start(0)
    assert [p.seq for p in out] == [0, MSS]
    assert all(p.payload == MSS and p.echo == 0 and p.traffic_class is TrafficClass.SHORT for p in out)


def test_512kb_flow_is_512_packets():
    cfg = TransportConfig(mss=1024, max_cwnd=1024 * 1024)
    s, loop, out, done = make(size=512 * 1024, cfg=cfg)
    s.start(0)
    rx = Receiver(1, lambda a: s.on_ack(a, loop.now), lambda: 0, 64)
    i = 0
    while i < len(out):
        rx.receiver_on_data(out[i], 0)
        i += 1
    assert len(out) == 512 and s.retransmissions == 0
    assert s.state is FlowState.DONE and done == [s]
    assert s.sender_tick(0) == []


def test_slow_start_and_last_short_segment():
    s, loop, out, _ = make(size=2 * MSS + 10)
    s.start(0)
    s.on_ack(ack(MSS), 1)
    assert s.cwnd == 3 * MSS
    assert out[-1].seq == 2 * MSS and out[-1].payload == 10


def test_ecn_cut_once_per_window():
    s, loop, out, _ = make()
    s.cwnd = 40 * MSS
    s.ssthresh = 10 * MSS
    s.sender_tick(0)
    s.on_ack(ack(MSS, Flag.ACK | Flag.ECN_ECHO), 1)
    assert s.cwnd == 20 * MSS
    s.on_ack(ack(2 * MSS, Flag.ACK | Flag.ECN_ECHO), 2)
    assert s.cwnd > 20 * MSS - 1 and s.cwnd < 21 * MSS


def test_fack_clamps_window():
    cfg = TransportConfig(mss=1000, max_cwnd=100_000)
    s, loop, out, _ = make(cfg=cfg)
    s.cwnd = 64_000
    s.on_ack(ack(0, Flag.ACK | Flag.FACK, window=32_000), 0)
    assert s.cwnd == 32_000 and s.facks == 1
    s.on_ack(ack(0, Flag.ACK | Flag.FACK, window=10), 0)
    assert s.cwnd == MSS


def test_three_duplicate_facks_fast_retransmit():
    s, loop, out, _ = make()
    s.cwnd = 10 * MSS
    s.sender_tick(0)
    s.on_ack(ack(2 * MSS), 1)
    n = len(out)
    for _ in range(3):
        s.on_ack(ack(2 * MSS, Flag.ACK | Flag.FACK, window=64_000), 2)
    assert s.fast_retransmits == 1 and s.retransmissions == 1
    assert any(p.seq == 2 * MSS for p in out[n:])


def test_timeout_retransmits_from_highest_acked_and_backs_off():
    s, loop, out, _ = make()
    s.cwnd = 8 * MSS
    s.start(0)
    s.on_ack(ack(MSS), 10)
    loop.run_until(10 + 200_000_000)
    assert s.timeouts == 1 and s.cwnd == MSS and s.rto == 400_000_000
    assert out[-1].seq == MSS and s.retransmissions == 1
    loop.run_until(10**10)
    assert s.rto == CFG.rto_max


def test_done_flow_cancels_timer():
    s, loop, out, done = make(size=MSS)
    s.start(0)
    s.on_ack(ack(MSS), 5)
    assert s.state is FlowState.DONE
    loop.run_until(10**10)
    assert s.timeouts == 0 and len(out) == 1
    r = s.record()
    assert r.fct == 5 and r.retransmissions == 0


def test_record_before_completion_raises():
    s, _, _, _ = make()
    with pytest.raises(RuntimeError):
        s.record()


def test_receiver_cumulative_and_duplicate_acks():
    acks = []
    rx = Receiver(7, acks.append, lambda: 0, 64)

    def seg(seq, ce=False):
        return Packet(1, 1, 3, 2, 4, TrafficClass.SHORT, 1040, payload=MSS, seq=seq, flags=Flag.ECN_CE if ce else 0)

    rx.receiver_on_data(seg(0), 0)
    assert acks[-1].ack == MSS
    rx.receiver_on_data(seg(2 * MSS), 0)
    assert acks[-1].ack == MSS
    rx.receiver_on_data(seg(MSS, ce=True), 0)
    assert acks[-1].ack == 3 * MSS and acks[-1].flags & Flag.ECN_ECHO
    rx.receiver_on_data(seg(0), 0)
    assert rx.duplicates == 1 and rx.delivered == 3 * MSS
    assert (acks[-1].src_addr, acks[-1].dst_addr) == (3, 1)


def test_config_validation():
    with pytest.raises(ValueError):
        TransportConfig(mss=0)
    with pytest.raises(ValueError):
        TransportConfig(rto_min=5, rto_initial=1)
