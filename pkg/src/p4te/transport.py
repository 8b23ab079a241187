"""Window-based reliable transport at the hosts.

A NewReno-style sender with ECN response (once per window), duplicate-ack
fast retransmit, RFC 6298 timeouts with Karn's rule, and the FACK clamp:
a FACK caps ``cwnd`` at its window field and counts as a duplicate ack
whenever its ack number is not new.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass
from enum import Enum
from typing import Callable

from .engine import EventLoop
from .packet import HEADER_BYTES, Flag, Packet, TrafficClass

log = logging.getLogger(__name__)


class FlowState(Enum):
    ACTIVE = "active"
    DONE = "done"


@dataclass(frozen=True)
class TransportConfig:
    mss: int = 1024
    init_cwnd_segments: int = 2
    max_cwnd: int = 64 * 1024
    rto_initial: int = 200_000_000
    rto_min: int = 200_000_000
    rto_max: int = 2_000_000_000
    dupack_threshold: int = 3
    header_bytes: int = HEADER_BYTES

    def __post_init__(self) -> None:
        if self.mss < 1:
            raise ValueError("MSS must be positive")
        if self.max_cwnd < self.mss:
            raise ValueError("max cwnd below one MSS")
        if not 0 < self.rto_min <= self.rto_initial <= self.rto_max:
            raise ValueError("need 0 < rto_min <= rto_initial <= rto_max")


@dataclass
class FlowCompletionRecord:
    flow_id: int
    traffic_class: TrafficClass
    size: int
    start: int
    end: int
    retransmissions: int
    facks: int
    src: str = ""
    dst: str = ""

    @property
    def fct(self) -> int:
        return self.end - self.start


class Sender:
    """Sending side of one flow."""

    def __init__(
        self,
        flow_id: int,
        five_tuple: tuple[int, int, int, int, int],
        size: int,
        traffic_class: TrafficClass,
        cfg: TransportConfig,
        loop: EventLoop,
        emit: Callable[[Packet], None],
        new_uid: Callable[[], int],
        on_done: Callable[["Sender"], None] | None = None,
    ) -> None:
        if size < 1:
            raise ValueError("flow size must be positive")
        self.flow_id = flow_id
        self.src_addr, self.src_port, self.dst_addr, self.dst_port, self.flow_label = five_tuple
        self.size = size
        self.traffic_class = traffic_class
        self.cfg = cfg
        self.loop = loop
        self.emit = emit
        self.new_uid = new_uid
        self.on_done = on_done
        mss = cfg.mss
        self.state = FlowState.ACTIVE
        self.next_seq = 0
        self.highest_acked = 0
        self.snd_max = 0
        self.cwnd = min(cfg.init_cwnd_segments * mss, cfg.max_cwnd)
        self.ssthresh = cfg.max_cwnd
        self.dup_ack_count = 0
        self.in_recovery = False
        self.recover = 0
        self.last_window_cut_seq = -1
        self.rto = cfg.rto_initial
        self.srtt: int | None = None
        self.rttvar = 0
        self._rtt_seq = -1
        self._rtt_sent = 0
        self._deadline = 0
        self._timer_armed = False
        self.start_time = 0
        self.end_time = -1
        self.retransmissions = 0
        self.wire_data = 0
        self.facks = 0
        self.timeouts = 0
        self.fast_retransmits = 0
        self.cwnd_floor_ok = True
        self.rtt_sum = 0
        self.rtt_samples = 0

    # -- sending

    def start(self, now: int) -> None:
        self.start_time = now
        self.sender_tick(now)

    def _segment(self, seq: int, now: int) -> Packet:
        cfg = self.cfg
        length = min(cfg.mss, self.size - seq)
        pkt = Packet(
            self.new_uid(), self.src_addr, self.dst_addr, self.src_port, self.dst_port,
            self.traffic_class, length + cfg.header_bytes,
            flow_label=self.flow_label, payload=length, seq=seq, window=self.cwnd,
            echo=self.highest_acked, flow_id=self.flow_id,
        )
        self.wire_data += 1
        if seq < self.snd_max:
            self.retransmissions += 1
            if self._rtt_seq >= 0 and seq <= self._rtt_seq:
                self._rtt_seq = -1  # Karn: no samples across retransmitted data
        else:
            if self._rtt_seq < 0:
                self._rtt_seq = seq
                self._rtt_sent = now
            self.snd_max = seq + length
        return pkt

    def sender_tick(self, now: int) -> list[Packet]:
        """Inject every segment the window allows; returns what was sent."""
        sent: list[Packet] = []
        if self.state is FlowState.DONE:
            return sent
        while self.next_seq < self.size and self.next_seq - self.highest_acked < self.cwnd:
            pkt = self._segment(self.next_seq, now)
            self.next_seq += pkt.payload
            sent.append(pkt)
        for pkt in sent:
            self.emit(pkt)
        if sent and not self._timer_armed:
            self._arm(now)
        return sent

    def _retransmit_head(self, now: int) -> None:
        pkt = self._segment(self.highest_acked, now)
        self.emit(pkt)
        if not self._timer_armed:
            self._arm(now)

    # -- timer: one pending event at a time; a later deadline re-arms on expiry

    def _arm(self, now: int) -> None:
        self._deadline = now + self.rto
        if not self._timer_armed:
            self._timer_armed = True
            self.loop.call_at(self._deadline, self._timer_fired)

    def _timer_fired(self) -> None:
        now = self.loop.now
        if self.state is FlowState.DONE or not self._timer_armed:
            self._timer_armed = False
            return
        if now < self._deadline:
            self.loop.call_at(self._deadline, self._timer_fired)
            return
        self._timer_armed = False
        self.on_timeout(now)

    def _disarm(self) -> None:
        self._timer_armed = False

    def on_timeout(self, now: int) -> None:
        if self.state is FlowState.DONE or self.highest_acked >= self.next_seq:
            return
        mss = self.cfg.mss
        self.timeouts += 1
        self.ssthresh = max(self.cwnd // 2, mss)
        self.cwnd = mss
        self.next_seq = self.highest_acked
        self.in_recovery = False
        self.dup_ack_count = 0
        self.rto = min(self.rto * 2, self.cfg.rto_max)
        self._rtt_seq = -1
        self.sender_tick(now)

    # -- acks

    def _rtt_sample(self, now: int) -> None:
        r = now - self._rtt_sent
        self.rtt_sum += r
        self.rtt_samples += 1
        if self.srtt is None:
            self.srtt = r
            self.rttvar = r // 2
        else:
            self.rttvar = (3 * self.rttvar + abs(self.srtt - r)) // 4
            self.srtt = (7 * self.srtt + r) // 8
        rto = self.srtt + max(4 * self.rttvar, 1_000_000)
        self.rto = min(max(rto, self.cfg.rto_min), self.cfg.rto_max)
        self._rtt_seq = -1

    def _on_duplicate(self, now: int) -> None:
        if self.highest_acked >= self.next_seq:
            return
        self.dup_ack_count += 1
        if self.dup_ack_count == self.cfg.dupack_threshold and not self.in_recovery:
            mss = self.cfg.mss
            flight = self.next_seq - self.highest_acked
            self.ssthresh = max(flight // 2, 2 * mss)
            self.cwnd = max(min(self.cwnd, self.ssthresh), mss)
            self.in_recovery = True
            self.recover = self.next_seq
            self.fast_retransmits += 1
            self._retransmit_head(now)

    def on_ack(self, pkt: Packet, now: int) -> None:
        if self.state is FlowState.DONE:
            return
        cfg = self.cfg
        mss = cfg.mss
        flags = pkt.flags
        ack = pkt.ack
        if flags & Flag.FACK:
            self.facks += 1
            self.cwnd = max(min(self.cwnd, pkt.window), mss)
            if ack <= self.highest_acked:
                self._on_duplicate(now)
            self.sender_tick(now)
            return

        if ack > self.highest_acked:
            if ack > self.snd_max:
                ack = self.snd_max
            if self._rtt_seq >= 0 and ack > self._rtt_seq:
                self._rtt_sample(now)
            self.highest_acked = ack
            if self.next_seq < ack:
                self.next_seq = ack
            self.dup_ack_count = 0
            if self.in_recovery:
                if ack >= self.recover:
                    self.in_recovery = False
                    self.cwnd = max(self.ssthresh, mss)
                else:
                    self._retransmit_head(now)
            elif flags & Flag.ECN_ECHO and ack > self.last_window_cut_seq:
                self.cwnd = max(self.cwnd // 2, mss)
                self.ssthresh = self.cwnd
                self.last_window_cut_seq = self.next_seq
            elif self.cwnd < self.ssthresh:
                self.cwnd += mss
            else:
                self.cwnd += max(mss * mss // self.cwnd, 1)
            if self.cwnd > cfg.max_cwnd:
                self.cwnd = cfg.max_cwnd
            if ack >= self.size:
                self._complete(now)
                return
            if self.highest_acked < self.next_seq:
                self._arm(now)
            else:
                self._disarm()
        else:
            if flags & Flag.ECN_ECHO and self.highest_acked > self.last_window_cut_seq and not self.in_recovery:
                self.cwnd = max(self.cwnd // 2, mss)
                self.ssthresh = self.cwnd
                self.last_window_cut_seq = self.next_seq
            self._on_duplicate(now)
        if self.cwnd < mss:
            self.cwnd_floor_ok = False
        self.sender_tick(now)

    def _complete(self, now: int) -> None:
        self.state = FlowState.DONE
        self.end_time = now
        self._disarm()
        if self.on_done is not None:
            self.on_done(self)

    def record(self) -> FlowCompletionRecord:
        if self.state is not FlowState.DONE:
            raise RuntimeError(f"flow {self.flow_id} has not completed")
        return FlowCompletionRecord(
            self.flow_id, self.traffic_class, self.size, self.start_time, self.end_time,
            self.retransmissions, self.facks,
        )


class Receiver:
    """Receiving side: cumulative acks, out-of-order buffering, ECN echo."""

    def __init__(self, flow_id: int, emit: Callable[[Packet], None], new_uid: Callable[[], int],
                 ack_bytes: int) -> None:
        self.flow_id = flow_id
        self.emit = emit
        self.new_uid = new_uid
        self.ack_bytes = ack_bytes
        self.rcv_nxt = 0
        self.ooo: dict[int, int] = {}
        self.delivered = 0
        self.duplicates = 0

    def receiver_on_data(self, pkt: Packet, now: int) -> Packet:
        seq, length = pkt.seq, pkt.payload
        if seq == self.rcv_nxt:
            self.rcv_nxt += length
            self.delivered += length
            ooo = self.ooo
            while self.rcv_nxt in ooo:
                n = ooo.pop(self.rcv_nxt)
                self.rcv_nxt += n
                self.delivered += n
        elif seq > self.rcv_nxt:
            if seq in self.ooo:
                self.duplicates += 1
            else:
                self.ooo[seq] = length
        else:
            self.duplicates += 1
        flags = Flag.ACK
        if pkt.flags & Flag.ECN_CE:
            flags |= Flag.ECN_ECHO
        ack = Packet(
            self.new_uid(), pkt.dst_addr, pkt.src_addr, pkt.dst_port, pkt.src_port,
            pkt.traffic_class, self.ack_bytes, flow_label=pkt.flow_label,
            ack=self.rcv_nxt, flags=flags, flow_id=pkt.flow_id,
        )
        self.emit(ack)
        return ack
