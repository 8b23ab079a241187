"""Unidirectional links with a FIFO tail-drop queue.

A link serializes one packet at a time. Serialization cost is expressed in
integer *units*: in pps mode a data packet costs ``UNITS_PER_PACKET`` units
and a header-only packet (ACK, FACK, probe) costs ``control_units``; in
byte mode the cost is the packet size in bytes.
"""

from __future__ import annotations

from collections import deque
from typing import Callable

from .engine import NS_PER_SEC, EventLoop
from .packet import Packet

UNITS_PER_PACKET = 16

DROPPED = -1


class Link:
    """One direction of a cable, owned by the transmitting node's port."""

    __slots__ = (
        "name", "loop", "rate_units", "bandwidth_pps", "prop_delay", "queue_capacity",
        "rx_delay", "receiver", "rx_port", "tx_busy_until", "_departures",
        "enq", "deq", "drop", "bytes", "tx_data", "_ser_cache", "unit_buffer", "_costs", "_queued",
    )

    def __init__(
        self,
        name: str,
        loop: EventLoop,
        rate_units: int,
        prop_delay: int,
        queue_capacity: int,
        *,
        bandwidth_pps: float = 0.0,
        unit_buffer: int = 0,
    ) -> None:
        if rate_units <= 0:
            raise ValueError("link rate must be positive")
        if queue_capacity < 1:
            raise ValueError("queue capacity must be at least one packet")
        self.name = name
        self.loop = loop
        self.rate_units = rate_units
        self.bandwidth_pps = bandwidth_pps
        self.prop_delay = prop_delay
        self.queue_capacity = queue_capacity
        self.rx_delay = 0
        self.receiver: Callable[[Packet, int], None] | None = None
        self.rx_port = -1
        self.tx_busy_until = 0
        self._departures: deque[int] = deque()
        self.enq = 0
        self.deq = 0
        self.drop = 0
        self.bytes = 0
        self.tx_data = 0
        self._ser_cache: dict[int, int] = {}
        # with unit_buffer > 0 the buffer holds queue_capacity * unit_buffer cost
        # units and depth is reported in whole-packet equivalents
        self.unit_buffer = unit_buffer
        self._costs: deque[int] = deque()
        self._queued = 0

    def connect(self, receiver: Callable[[Packet, int], None], rx_port: int, rx_delay: int = 0) -> None:
        """Attach the far end. ``rx_delay`` is added on arrival (switch port-to-port latency)."""
        self.receiver = receiver
        self.rx_port = rx_port
        self.rx_delay = rx_delay

    def serialization_ns(self, cost: int) -> int:
        ns = self._ser_cache.get(cost)
        if ns is None:
            ns = cost * NS_PER_SEC // self.rate_units
            self._ser_cache[cost] = ns
        return ns

    def _drain(self, now: int) -> None:
        d = self._departures
        if self.unit_buffer:
            c = self._costs
            while d and d[0] <= now:
                d.popleft()
                self._queued -= c.popleft()
                self.deq += 1
        else:
            while d and d[0] <= now:
                d.popleft()
                self.deq += 1

    def occupancy(self) -> int:
        if self.unit_buffer:
            return -(-self._queued // self.unit_buffer)
        return len(self._departures)

    def depth(self, now: int) -> int:
        """Packets (or packet equivalents) queued or in transmission at ``now``."""
        self._drain(now)
        return self.occupancy()

    def enqueue(self, pkt: Packet, now: int, cost: int) -> int:
        """Tail-drop enqueue. Returns the occupancy seen before insertion, or DROPPED."""
        self._drain(now)
        d = self._departures
        depth = self.occupancy()
        self.enq += 1
        if self.unit_buffer:
            if self._queued + cost > self.queue_capacity * self.unit_buffer:
                self.drop += 1
                return DROPPED
            self._queued += cost
            self._costs.append(cost)
        elif depth >= self.queue_capacity:
            self.drop += 1
            return DROPPED
        start = self.tx_busy_until if self.tx_busy_until > now else now
        done = start + self.serialization_ns(cost)
        self.tx_busy_until = done
        d.append(done)
        self.bytes += pkt.size_bytes
        if pkt.payload:
            self.tx_data += 1
        self.loop.call_at(done + self.prop_delay + self.rx_delay, self.receiver, pkt, self.rx_port)
        return depth

    def check_conservation(self, now: int) -> bool:
        self._drain(now)
        q = len(self._departures)
        return self.enq == self.deq + self.drop + q and self.occupancy() <= self.queue_capacity

    @property
    def tx(self) -> int:
        """Packets accepted for transmission."""
        return self.enq - self.drop

    def __repr__(self) -> str:
        return f"Link({self.name}, enq={self.enq}, drop={self.drop})"
