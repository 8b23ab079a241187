"""Simulated packets: header fields plus per-hop switch metadata."""

from __future__ import annotations

from enum import IntEnum


class TrafficClass(IntEnum):
    SHORT = 0
    LARGE = 1


class Color(IntEnum):
    """Meter colors. The integer value is the utilization rank."""

    GREEN = 0
    YELLOW = 1
    RED = 2


class Flag:
    """Header flag bits (plain ints; these are tested on every hop)."""

    NONE = 0
    ACK = 1
    FACK = 2
    ECN_CE = 4
    ECN_ECHO = 8
    RATE_CTRL_APPLIED = 16
    RATE_CTRL_EXEMPT = 32
    PROBE = 64
    FEEDBACK = 128

    @staticmethod
    def names(flags: int) -> str:
        out = [k for k, v in vars(Flag).items() if isinstance(v, int) and v and flags & v]
        return "|".join(out) or "NONE"


# header-only packets (ACK, FACK, probe) in byte mode
CONTROL_PACKET_BYTES = 64
HEADER_BYTES = 40


class Packet:
    """A packet in flight.

    ``payload`` is the number of transport bytes carried (0 for pure ACKs,
    FACKs and probes). ``echo`` is the highest cumulative ack the sender had
    seen when it emitted the packet; switches copy it into FACKs.

    The ``md_*`` attributes are switch-local metadata and are cleared by
    :meth:`reset_metadata` at every hop.
    """

    __slots__ = (
        "uid", "src_addr", "dst_addr", "src_port", "dst_port", "flow_label",
        "traffic_class", "size_bytes", "payload", "seq", "ack", "window",
        "flags", "echo", "flow_id",
        "probe_origin", "probe_util",
        "flowlet_epoch", "leaf_order",
        "md_ingress_timestamp", "md_ingress_port", "md_egress_port",
        "md_queue_depth", "md_incoming_color",
    )

    def __init__(
        self,
        uid: int,
        src_addr: int,
        dst_addr: int,
        src_port: int,
        dst_port: int,
        traffic_class: TrafficClass,
        size_bytes: int,
        *,
        flow_label: int = 0,
        payload: int = 0,
        seq: int = 0,
        ack: int = 0,
        window: int = 0,
        flags: int = 0,
        echo: int = 0,
        flow_id: int = -1,
    ) -> None:
        if size_bytes <= 0:
            raise ValueError("packet size must be positive")
        self.uid = uid
        self.src_addr = src_addr
        self.dst_addr = dst_addr
        self.src_port = src_port
        self.dst_port = dst_port
        self.flow_label = flow_label
        self.traffic_class = traffic_class
        self.size_bytes = size_bytes
        self.payload = payload
        self.seq = seq
        self.ack = ack
        self.window = window
        self.flags = flags
        self.echo = echo
        self.flow_id = flow_id
        self.probe_origin = -1
        self.probe_util = 0.0
        self.flowlet_epoch = -1
        self.leaf_order = -1
        self.reset_metadata()

    def reset_metadata(self) -> None:
        self.md_ingress_timestamp = 0
        self.md_ingress_port = -1
        self.md_egress_port = -1
        self.md_queue_depth = 0
        self.md_incoming_color = Color.GREEN

    @property
    def is_data(self) -> bool:
        return self.payload > 0

    def five_tuple(self) -> tuple[int, int, int, int, int]:
        return (self.src_addr, self.src_port, self.dst_addr, self.dst_port, self.flow_label)

    def clone(self, uid: int) -> "Packet":
        p = Packet.__new__(Packet)
        for name in Packet.__slots__:
            setattr(p, name, getattr(self, name))
        p.uid = uid
        return p

    def __repr__(self) -> str:
        return (
            f"Packet(uid={self.uid}, {self.src_addr:#x}:{self.src_port}->"
            f"{self.dst_addr:#x}:{self.dst_port}, seq={self.seq}, ack={self.ack}, "
            f"payload={self.payload}, flags={Flag.names(self.flags)})"
        )
