"""Comparison schemes: flowlet ECMP with ECN marking, and HULA."""

from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import Sequence

from .dataplane import FlowletState, packet_hash
from .packet import Flag, Packet, TrafficClass

log = logging.getLogger(__name__)


@dataclass(frozen=True)
class EcnConfig:
    threshold: int

    def __post_init__(self) -> None:
        if self.threshold < 1:
            raise ValueError("ECN threshold must be >= 1 packet")


def ecn_mark(pkt: Packet, queue_depth: int, cfg: EcnConfig) -> Packet:
    if queue_depth >= cfg.threshold:
        pkt.flags |= Flag.ECN_CE
    return pkt


def ecmp_select(
    pkt: Packet, upward_ports: Sequence[int], flowlets: FlowletState, now: int, h: int | None = None
) -> int:
    """Hash the 5-tuple over the sorted upward ports, with the same flowlet gap test as P4TE."""
    if h is None:
        h = packet_hash(pkt)
    slot, new = flowlets.touch(h, now)
    if not new:
        return flowlets.last_used_ports[slot]
    return flowlets.start(slot, upward_ports[h % len(upward_ports)])


class UtilEstimator:
    """Per-port transmit-rate estimate with a linear-decay time constant ``tau``.

    ``est`` converges to rate x tau for a steady rate, so dividing by the
    port's capacity x tau yields a utilization fraction.
    """

    __slots__ = ("tau", "capacity", "est", "last")

    def __init__(self, tau: int, capacity_units: int) -> None:
        self.tau = tau
        self.capacity = capacity_units * tau / 1e9
        self.est = 0.0
        self.last = 0

    def _decayed(self, now: int) -> float:
        dt = now - self.last
        if dt <= 0:
            return self.est
        k = 1.0 - dt / self.tau
        return self.est * k if k > 0 else 0.0

    def update(self, now: int, cost: int) -> None:
        self.est = self._decayed(now) + cost
        self.last = now

    def utilization(self, now: int) -> float:
        return self._decayed(now) / self.capacity


class HulaState:
    """Best next hop per destination leaf, learned from probes.

    For each (destination leaf, upward port) the latest probe utilization is
    kept; the best hop is the minimum over entries younger than ``aging``,
    ties going to the lowest port id.
    """

    def __init__(self, ports: Sequence[int], port_capacity: dict[int, int], probe_interval: int,
                 aging: int | None = None) -> None:
        self.probe_interval = probe_interval
        self.aging = aging if aging is not None else 3 * probe_interval
        self.estimators = {p: UtilEstimator(probe_interval, port_capacity[p]) for p in ports}
        self.latest: dict[int, dict[int, tuple[float, int]]] = {}
        self.best_hop: dict[int, tuple[int, float]] = {}
        self.fallbacks = 0

    def on_transmit(self, port: int, now: int, cost: int) -> None:
        self.estimators[port].update(now, cost)

    def link_util(self, port: int, now: int) -> float:
        return self.estimators[port].utilization(now)

    def learn(self, dst_leaf: int, port: int, path_util: float, now: int) -> tuple[int, float]:
        per_port = self.latest.setdefault(dst_leaf, {})
        per_port[port] = (path_util, now)
        horizon = now - self.aging
        best = None
        for p in sorted(per_port):
            u, at = per_port[p]
            if at < horizon:
                continue
            if best is None or u < best[1]:
                best = (p, u)
        self.best_hop[dst_leaf] = best
        return best


def make_probe(uid: int, origin_leaf: int, src_addr: int, size_bytes: int) -> Packet:
    p = Packet(uid, src_addr, 0, 0, 0, TrafficClass.SHORT, size_bytes, flags=Flag.PROBE)
    p.probe_origin = origin_leaf
    p.probe_util = 0.0
    return p


def hula_probe_cycle(origin_leaf: int, src_addr: int, upward_ports: Sequence[int], next_uid,
                     size_bytes: int) -> list[tuple[int, Packet]]:
    """One probe per upward port of ``origin_leaf``, carrying zero utilization."""
    return [(port, make_probe(next_uid(), origin_leaf, src_addr, size_bytes)) for port in upward_ports]


def hula_select(
    pkt: Packet,
    state: HulaState,
    flowlets: FlowletState,
    now: int,
    dst_leaf: int,
    upward_ports: Sequence[int],
    h: int | None = None,
) -> int:
    if h is None:
        h = packet_hash(pkt)
    slot, new = flowlets.touch(h, now)
    if not new:
        return flowlets.last_used_ports[slot]
    best = state.best_hop.get(dst_leaf)
    if best is None:
        state.fallbacks += 1
        log.debug("no HULA entry for leaf %d yet; hashing", dst_leaf)
        port = upward_ports[h % len(upward_ports)]
    else:
        port = best[0]
    return flowlets.start(slot, port)
