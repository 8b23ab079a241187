"""Per-switch P4TE packet pipeline stages.

Stages, in packet order:

* ingress class-rate monitoring (one srTCM per ingress port and class)
* downward lookup (longest prefix match), else upward path selection
* egress monitoring of queue depth and link utilization, which emits
  traffic events for the control plane and recirculates utilization changes
  back to the ingress stage
* rate-control decision and FACK generation
"""

from __future__ import annotations

from dataclasses import dataclass, field
from enum import Enum
from fractions import Fraction
from typing import Iterable, Sequence

from .control import EventKind, TrafficEvent, UpwardTable
from .meters import SrTcmMeter, TrTcmMeter, as_fraction
from .packet import CONTROL_PACKET_BYTES, Color, Flag, Packet, TrafficClass
from .topology import ADDR_BITS

GREEN, YELLOW, RED = Color.GREEN, Color.YELLOW, Color.RED
_M64 = (1 << 64) - 1
NEVER = -(1 << 62)


def mix64(x: int) -> int:
    """splitmix64 finalizer."""
    x = (x + 0x9E3779B97F4A7C15) & _M64
    x = ((x ^ (x >> 30)) * 0xBF58476D1CE4E5B9) & _M64
    x = ((x ^ (x >> 27)) * 0x94D049BB133111EB) & _M64
    return x ^ (x >> 31)


def flow_hash(src_addr: int, src_port: int, dst_addr: int, dst_port: int, flow_label: int) -> int:
    """64-bit hash of the 5-tuple; independent of PYTHONHASHSEED."""
    h = mix64(src_addr)
    h = mix64(h ^ (src_port << 32 | dst_port))
    h = mix64(h ^ dst_addr)
    return mix64(h ^ flow_label)


def packet_hash(pkt: Packet) -> int:
    return flow_hash(pkt.src_addr, pkt.src_port, pkt.dst_addr, pkt.dst_port, pkt.flow_label)


# --------------------------------------------------------------------------
# downward lookup


class DownwardTable:
    """Longest-prefix-match table of (prefix, length) -> port."""

    def __init__(self, entries: Iterable[tuple[int, int, int]] = ()) -> None:
        self._by_len: dict[int, dict[int, int]] = {}
        self._lens: list[int] = []
        for value, plen, port in entries:
            self.add(value, plen, port)

    def add(self, value: int, plen: int, port: int) -> None:
        shift = ADDR_BITS - plen
        self._by_len.setdefault(plen, {})[value >> shift] = port
        self._lens = sorted(self._by_len, reverse=True)

    def lookup(self, addr: int) -> int | None:
        for plen in self._lens:
            port = self._by_len[plen].get(addr >> (ADDR_BITS - plen))
            if port is not None:
                return port
        return None


def downward_lookup(pkt: Packet, mat_down: DownwardTable) -> int | None:
    return mat_down.lookup(pkt.dst_addr)


# --------------------------------------------------------------------------
# flowlets


class FlowletState:
    """Register arrays indexed by the low bits of the 5-tuple hash.

    Flows whose hashes collide share a slot, as with P4 register arrays.
    """

    def __init__(self, gap_threshold: int, table_bits: int = 16) -> None:
        self.gap_threshold = gap_threshold
        self.table_size = 1 << table_bits
        self.mask = self.table_size - 1
        self.last_seen = [NEVER] * self.table_size
        self.last_used_ports = [-1] * self.table_size
        # bumped whenever a slot starts a new flowlet; used by the reorder checker
        self.epoch = [0] * self.table_size
        self.new_flowlets = 0

    def touch(self, h: int, now: int) -> tuple[int, bool]:
        """Record a packet in slot ``h``; returns (slot, starts_new_flowlet)."""
        slot = h & self.mask
        last = self.last_seen[slot]
        self.last_seen[slot] = now
        return slot, now - last >= self.gap_threshold

    def start(self, slot: int, port: int) -> int:
        self.last_used_ports[slot] = port
        self.epoch[slot] += 1
        self.new_flowlets += 1
        return port


def upward_path_select(
    pkt: Packet,
    mat_up_queuedepth: UpwardTable,
    mat_up_linkutil: UpwardTable,
    flowlets: FlowletState,
    port_utilizations: dict[int, Color],
    now: int,
    h: int | None = None,
) -> int:
    """P4TE upward selection at flowlet granularity.

    Short flows prefer the least-queued port unless it is marked busy, in
    which case they take the least-utilized one; large flows prefer the
    least-utilized port unless even that one is not GREEN.
    """
    if h is None:
        h = packet_hash(pkt)
    low_qd = mat_up_queuedepth.select(h)
    low_util = mat_up_linkutil.select(h)
    slot, new = flowlets.touch(h, now)
    if not new:
        return flowlets.last_used_ports[slot]
    if pkt.traffic_class == TrafficClass.SHORT:
        port = low_qd if port_utilizations.get(low_qd, GREEN) == GREEN else low_util
    else:
        port = low_util if port_utilizations.get(low_util, GREEN) == GREEN else low_qd
    return flowlets.start(slot, port)


# --------------------------------------------------------------------------
# monitoring


class IngressMonitorState:
    """Per (ingress port, class) safe-rate meters plus recirculated port colors."""

    def __init__(
        self,
        port_rates: dict[int, Fraction],
        safe_split: dict[TrafficClass, Fraction],
        burst_frac: Fraction = Fraction(1, 20),
        min_burst: int = 1,
        upward_ports: Sequence[int] = (),
    ) -> None:
        total = sum(safe_split.values(), Fraction(0))
        if total > 1:
            raise ValueError("safe-rates of all classes exceed the port bandwidth")
        self.meters: dict[tuple[int, int], SrTcmMeter] = {}
        for port, rate in port_rates.items():
            rate = as_fraction(rate)
            burst = max(rate * burst_frac, Fraction(min_burst))
            for tc, share in safe_split.items():
                self.meters[(port, int(tc))] = SrTcmMeter(rate * share, burst)
        self.port_utilizations: dict[int, Color] = {p: GREEN for p in upward_ports}


def ingress_class_monitor(pkt: Packet, state: IngressMonitorState, now: int, cost: int = 1) -> Packet:
    meter = state.meters[(pkt.md_ingress_port, int(pkt.traffic_class))]
    pkt.md_incoming_color = meter.mark(now, cost)
    return pkt


class EgressMonitorState:
    def __init__(self, delta: int, meters: dict[int, TrTcmMeter]) -> None:
        if delta < 1:
            raise ValueError("delta must be >= 1")
        self.delta = delta
        self.meters = meters
        self.old_queue_depths = {p: 0 for p in meters}
        self.old_packet_colors = {p: GREEN for p in meters}


@dataclass
class MonitorResult:
    events: list[TrafficEvent] = field(default_factory=list)
    feedback_to_cp: Packet | None = None
    recirculate: Packet | None = None


NO_EVENTS = MonitorResult()


def egress_stage_monitor(
    pkt: Packet, state: EgressMonitorState, now: int, cost: int = 1, uid: int = -1
) -> MonitorResult:
    """Queue-depth and utilization event detection on the packet's egress port.

    A depth event fires when the observed depth moved by at least delta from
    the last reported depth; a utilization event fires when the meter color
    differs from the last color seen on the port. Returns the shared
    ``NO_EVENTS`` result when nothing fired.
    """
    port = pkt.md_egress_port
    depth = pkt.md_queue_depth
    stored = state.old_queue_depths[port]
    qd_kind = None
    if depth >= stored + state.delta:
        qd_kind = EventKind.QUEUE_DEPTH_INCREASE
        state.old_queue_depths[port] = depth
    elif depth <= stored - state.delta:
        qd_kind = EventKind.QUEUE_DEPTH_DECREASE
        state.old_queue_depths[port] = depth

    last_color = state.old_packet_colors[port]
    color = state.meters[port].mark(now, cost)
    state.old_packet_colors[port] = color
    util_kind = None
    if color > last_color:
        util_kind = EventKind.UTILIZATION_RATE_INCREASE
    elif color < last_color:
        util_kind = EventKind.UTILIZATION_RATE_DECREASE

    if qd_kind is None and util_kind is None:
        return NO_EVENTS
    res = MonitorResult()
    if qd_kind is not None:
        res.events.append(TrafficEvent(port, qd_kind, depth, now))
    if util_kind is not None:
        res.events.append(TrafficEvent(port, util_kind, color, now))
    fb = pkt.clone(uid)
    fb.flags |= Flag.FEEDBACK
    res.feedback_to_cp = fb
    if util_kind is not None:
        res.recirculate = fb
    return res


# --------------------------------------------------------------------------
# rate adaptation


class Decision(Enum):
    NONE = 0
    DECREASE = 1
    INCREASE = 2


def resize_window(w: int, decision: Decision, mss: int) -> int:
    """Halve (shift right by one) or grow by a quarter (w + w>>2), floored at one MSS."""
    if decision is Decision.DECREASE:
        w = w >> 1
    elif decision is Decision.INCREASE:
        w = w + (w >> 2)
    return w if w > mss else mss


def flow_key(pkt: Packet) -> tuple[int, int, int, int]:
    """Key of the data direction of the packet's flow."""
    if pkt.flags & (Flag.ACK | Flag.FACK):
        return (pkt.dst_addr, pkt.dst_port, pkt.src_addr, pkt.src_port)
    return (pkt.src_addr, pkt.src_port, pkt.dst_addr, pkt.dst_port)


class RateControlFlowRecords:
    """Leaf-switch record of the sequence number where rate control last applied.

    Data entering from a host within ``window`` bytes of the record is marked
    RATE_CTRL_EXEMPT. A packet outside the window is left eligible for rate
    control and becomes the new record, which makes every eligible packet of
    a flow at least ``window`` bytes past the previous one.
    """

    def __init__(self, window: int) -> None:
        if window < 1:
            raise ValueError("rate-control window must be positive")
        self.window = window
        self.records: dict[tuple[int, int, int, int], int] = {}

    def recorded(self, key: tuple[int, int, int, int]) -> int | None:
        return self.records.get(key)

    def within_window(self, pkt: Packet) -> bool:
        rec = self.records.get(flow_key(pkt))
        return rec is not None and pkt.seq < rec + self.window

    def mark_ingress(self, pkt: Packet) -> bool:
        """Apply the window to a data packet entering from a host. Returns True if exempted."""
        key = (pkt.src_addr, pkt.src_port, pkt.dst_addr, pkt.dst_port)
        rec = self.records.get(key)
        if rec is not None and pkt.seq < rec + self.window:
            pkt.flags |= Flag.RATE_CTRL_EXEMPT
            return True
        self.records[key] = pkt.seq
        return False

    def observe_ack(self, ack_pkt: Packet) -> None:
        key = flow_key(ack_pkt)
        rec = self.records.get(key)
        if rec is None or ack_pkt.ack > rec:
            self.records[key] = ack_pkt.ack


def leaf_observe_ack(ack_pkt: Packet, records: RateControlFlowRecords) -> RateControlFlowRecords:
    records.observe_ack(ack_pkt)
    return records


def rate_control_decide(
    pkt: Packet, egress_color: Color, leaf_records: RateControlFlowRecords | None = None
) -> Decision:
    """Pure decision from the class-rate color and the egress port color.

    Only an over-safe-rate class (YELLOW) is acted on: RED egress means
    decrease, GREEN egress means increase. Packets already handled upstream
    (APPLIED) or inside a leaf's rate-control window (EXEMPT) are skipped.
    """
    if pkt.flags & (Flag.RATE_CTRL_APPLIED | Flag.RATE_CTRL_EXEMPT):
        return Decision.NONE
    if leaf_records is not None and leaf_records.within_window(pkt):
        return Decision.NONE
    if pkt.md_incoming_color != YELLOW:
        return Decision.NONE
    if egress_color == RED:
        return Decision.DECREASE
    if egress_color == GREEN:
        return Decision.INCREASE
    return Decision.NONE


def generate_fack(pkt: Packet, decision: Decision, mss: int, uid: int = -1) -> Packet:
    """Fabricate a FACK toward the flow source and mark the original as handled."""
    if decision is Decision.NONE:
        raise ValueError("no FACK for a NONE decision")
    f = pkt.clone(uid)
    f.src_addr, f.dst_addr = pkt.dst_addr, pkt.src_addr
    f.src_port, f.dst_port = pkt.dst_port, pkt.src_port
    f.flags = Flag.ACK | Flag.FACK
    f.payload = 0
    f.size_bytes = CONTROL_PACKET_BYTES
    f.ack = pkt.echo
    f.window = resize_window(pkt.window, decision, mss)
    f.flowlet_epoch = -1
    f.leaf_order = -1
    f.reset_metadata()
    pkt.flags |= Flag.RATE_CTRL_APPLIED
    return f
