"""Switch-local control plane: routing-group tables for upward ports."""

from __future__ import annotations

import bisect
import logging
from dataclasses import dataclass, field
from enum import Enum
from typing import Sequence

from .packet import Color
from .topology import ConfigError

log = logging.getLogger(__name__)


class Metric(Enum):
    QUEUE_DEPTH = "queue_depth"
    LINK_UTIL = "link_util"


class EventKind(Enum):
    QUEUE_DEPTH_INCREASE = "qd_inc"
    QUEUE_DEPTH_DECREASE = "qd_dec"
    UTILIZATION_RATE_INCREASE = "util_inc"
    UTILIZATION_RATE_DECREASE = "util_dec"

    @property
    def metric(self) -> Metric:
        if self in (EventKind.QUEUE_DEPTH_INCREASE, EventKind.QUEUE_DEPTH_DECREASE):
            return Metric.QUEUE_DEPTH
        return Metric.LINK_UTIL


@dataclass(frozen=True)
class TrafficEvent:
    port: int
    kind: EventKind
    event_data: int | Color
    at: int


@dataclass
class RoutingGroup:
    id: int
    priority: int
    members: set[int] = field(default_factory=set)


def depth_ranges(delta: int, n_ranges: int = 4) -> list[int]:
    """Inclusive upper bounds of all but the last (open-ended) depth range.

    ``delta=2`` gives ``[2, 4, 6]``: ranges [0-2], [3-4], [5-6], [7-rest].
    """
    if delta < 1:
        raise ConfigError("queue-depth delta must be >= 1")
    if n_ranges < 1:
        raise ConfigError("need at least one queue-depth range")
    return [delta * (i + 1) for i in range(n_ranges - 1)]


class UpwardTable:
    """Priority-ordered routing groups over the upward ports for one metric.

    Group 0 has the highest priority. ``bounds`` are the inclusive upper
    bounds of every group but the last; the last group catches everything
    above. Lookups are a binary search over ``bounds``.
    """

    def __init__(self, metric: Metric, bounds: Sequence[int], upward_ports: Sequence[int]) -> None:
        if not upward_ports:
            raise ConfigError("upward table needs at least one port")
        self.metric = metric
        self.bounds = list(bounds)
        if self.bounds != sorted(self.bounds):
            raise ConfigError("range boundaries must be ascending")
        n = len(self.bounds) + 1
        self.groups = [RoutingGroup(i, n - 1 - i) for i in range(n)]
        self.port_to_group: dict[int, int] = {}
        self._sorted: list[tuple[int, ...]] = [() for _ in range(n)]
        self.version = 0
        for p in upward_ports:
            self._insert(p, 0)

    def group_for(self, value: int) -> int:
        return bisect.bisect_left(self.bounds, int(value))

    def _insert(self, port: int, gid: int) -> None:
        self.groups[gid].members.add(port)
        self.port_to_group[port] = gid
        self._sorted[gid] = tuple(sorted(self.groups[gid].members))

    def _remove(self, port: int) -> None:
        gid = self.port_to_group.pop(port)
        self.groups[gid].members.discard(port)
        self._sorted[gid] = tuple(sorted(self.groups[gid].members))

    def best_group(self) -> tuple[int, ...]:
        """Members of the highest-priority non-empty group, sorted."""
        for members in self._sorted:
            if members:
                return members
        raise RuntimeError(f"{self.metric.value} table has no ports; initialization order bug")

    def select(self, flow_hash: int) -> int:
        members = self.best_group()
        return members[flow_hash % len(members)]

    def reconfigure(self, port: int, event_data: int) -> bool:
        """Move ``port`` to the group matching ``event_data``. Returns True if it moved."""
        if port not in self.port_to_group:
            log.info("dropping stale feedback for port %s not in %s table", port, self.metric.value)
            return False
        new = self.group_for(event_data)
        if new == self.port_to_group[port]:
            return False
        self._remove(port)
        self._insert(port, new)
        self.version += 1
        return True

    def remove_port(self, port: int) -> None:
        if port in self.port_to_group:
            self._remove(port)
            self.version += 1

    def add_port(self, port: int) -> None:
        """(Re-)insert a port. Recovered links start in the highest-priority group."""
        if port in self.port_to_group:
            return
        self._insert(port, 0)
        self.version += 1

    def check_partition(self, live_ports: Sequence[int]) -> bool:
        seen: list[int] = []
        for g in self.groups:
            seen.extend(g.members)
        return sorted(seen) == sorted(live_ports) and len(set(seen)) == len(seen)

    def snapshot(self) -> list[list[int]]:
        return [list(s) for s in self._sorted]


def init_tables(
    upward_ports: Sequence[int],
    depth_bounds: Sequence[int],
    util_colors: Sequence[Color] = (Color.GREEN, Color.YELLOW, Color.RED),
) -> tuple[UpwardTable, UpwardTable]:
    """Build the queue-depth and link-utilization tables with every port in group 0."""
    if not depth_bounds:
        raise ConfigError("queue-depth range list is empty")
    colors = sorted(int(c) for c in util_colors)
    qd = UpwardTable(Metric.QUEUE_DEPTH, depth_bounds, upward_ports)
    lu = UpwardTable(Metric.LINK_UTIL, colors[:-1], upward_ports)
    return qd, lu


class ControlPlane:
    """Applies traffic events to a switch's two upward tables."""

    def __init__(self, qd: UpwardTable, lu: UpwardTable) -> None:
        self.tables = {Metric.QUEUE_DEPTH: qd, Metric.LINK_UTIL: lu}
        self.events_processed = 0
        self.moves = 0

    def reconfigure_priority(self, event: TrafficEvent) -> bool:
        self.events_processed += 1
        moved = self.tables[event.kind.metric].reconfigure(event.port, int(event.event_data))
        self.moves += moved
        return moved

    def remove_port(self, port: int) -> None:
        for t in self.tables.values():
            t.remove_port(port)

    def add_port(self, port: int) -> None:
        for t in self.tables.values():
            t.add_port(port)
