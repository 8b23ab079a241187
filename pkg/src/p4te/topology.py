"""Leaf-spine topology with hierarchical addressing."""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from enum import Enum


class ConfigError(ValueError):
    """Invalid experiment or topology configuration."""


class Direction(Enum):
    UPWARD = "up"
    DOWNWARD = "down"


ADDR_BITS = 32
DCN_PREFIX = (10 << 24, 8)
LEAF_PREFIX_LEN = 16


def prefix_match(addr: int, prefix: tuple[int, int]) -> bool:
    value, plen = prefix
    if plen == 0:
        return True
    shift = ADDR_BITS - plen
    return (addr >> shift) == (value >> shift)


def format_addr(addr: int) -> str:
    return ".".join(str((addr >> s) & 0xFF) for s in (24, 16, 8, 0))


@dataclass
class Topology:
    leaf_switches: list[str]
    spine_switches: list[str]
    hosts: list[str]
    hosts_per_leaf: int
    edge_bw: float
    core_bw: float
    adjacency: dict[tuple[str, int], tuple[str, int]] = field(default_factory=dict)
    addresses: dict[str, int] = field(default_factory=dict)
    leaf_prefix: dict[str, tuple[int, int]] = field(default_factory=dict)
    dcn_prefix: tuple[int, int] = DCN_PREFIX
    host_leaf: dict[str, str] = field(default_factory=dict)
    ports: dict[str, list[int]] = field(default_factory=dict)

    @property
    def switches(self) -> list[str]:
        return self.leaf_switches + self.spine_switches

    def is_leaf(self, node: str) -> bool:
        return node in self.leaf_prefix

    def is_host(self, node: str) -> bool:
        return node in self.addresses

    def peer(self, node: str, port: int) -> tuple[str, int]:
        return self.adjacency[(node, port)]

    def port_bandwidth(self, node: str, port: int) -> float:
        """Egress bandwidth (pps) of ``node``'s ``port``."""
        a, b = node, self.adjacency[(node, port)][0]
        if self.is_host(a) or self.is_host(b):
            return self.edge_bw
        return self.core_bw

    def port_direction(self, switch: str, port: int) -> Direction:
        if (switch, port) not in self.adjacency or self.is_host(switch):
            raise KeyError(f"{switch} has no switch port {port}")
        if switch in self.spine_switches:
            return Direction.DOWNWARD
        peer = self.adjacency[(switch, port)][0]
        return Direction.DOWNWARD if self.is_host(peer) else Direction.UPWARD

    def upward_ports(self, switch: str) -> list[int]:
        return [p for p in self.ports[switch] if self.port_direction(switch, p) is Direction.UPWARD]

    def downward_ports(self, switch: str) -> list[int]:
        return [p for p in self.ports[switch] if self.port_direction(switch, p) is Direction.DOWNWARD]

    def leaf_index_of_addr(self, addr: int) -> int | None:
        for i, leaf in enumerate(self.leaf_switches):
            if prefix_match(addr, self.leaf_prefix[leaf]):
                return i
        return None

    def host_index(self, host: str) -> tuple[int, int]:
        """(leaf index, position under the leaf) of a host."""
        leaf = self.host_leaf[host]
        li = self.leaf_switches.index(leaf)
        peer_port = self.adjacency[(host, 0)][1]
        return li, peer_port

    def host_at(self, leaf_index: int, position: int) -> str:
        return self.adjacency[(self.leaf_switches[leaf_index], position)][0]

    def core_capacity_pps(self) -> float:
        """Aggregate leaf-to-spine capacity in one direction."""
        return len(self.leaf_switches) * len(self.spine_switches) * self.core_bw

    def enumerate_paths(self, src: str, dst: str) -> list[list[str]]:
        """All loop-free host-to-host paths that go up then down."""
        ls, ld = self.host_leaf[src], self.host_leaf[dst]
        if ls == ld:
            return [[src, ls, dst]]
        paths = []
        for s in self.spine_switches:
            paths.append([src, ls, s, ld, dst])
        return paths


def build_leaf_spine(
    n_leaf: int,
    n_spine: int,
    hosts_per_leaf: int,
    edge_bw: float,
    core_bw: float,
    ports_per_switch: int | None = None,
) -> Topology:
    """Build a two-layer leaf-spine fabric.

    Leaf ports ``0..hosts_per_leaf-1`` face hosts, the following ``n_spine``
    ports face spines. Spine port ``j`` faces leaf ``j``. Host ``i`` of leaf
    ``j`` gets address ``10.j.0.(i+1)`` inside the leaf's ``10.j.0.0/16``.
    """
    for name, v in (("n_leaf", n_leaf), ("n_spine", n_spine), ("hosts_per_leaf", hosts_per_leaf)):
        if v < 1:
            raise ConfigError(f"{name} must be >= 1, got {v}")
    if edge_bw <= 0 or core_bw <= 0:
        raise ConfigError("link bandwidths must be positive")
    if ports_per_switch is not None:
        if hosts_per_leaf + n_spine > ports_per_switch:
            raise ConfigError(
                f"{n_spine} spines need {n_spine} upward ports but a leaf with "
                f"{hosts_per_leaf} hosts has only {ports_per_switch - hosts_per_leaf} left"
            )
        if n_leaf > ports_per_switch:
            raise ConfigError(f"spines have {ports_per_switch} ports, cannot reach {n_leaf} leaves")
    if n_leaf > 255 or hosts_per_leaf > 254:
        raise ConfigError("address plan supports at most 255 leaves and 254 hosts per leaf")

    leaves = [f"L{j}" for j in range(n_leaf)]
    spines = [f"S{k}" for k in range(n_spine)]
    topo = Topology(leaves, spines, [], hosts_per_leaf, float(edge_bw), float(core_bw))
    base = DCN_PREFIX[0]
    h = itertools.count()
    for j, leaf in enumerate(leaves):
        topo.leaf_prefix[leaf] = (base | (j << 16), LEAF_PREFIX_LEN)
        topo.ports[leaf] = list(range(hosts_per_leaf + n_spine))
        for i in range(hosts_per_leaf):
            host = f"H{next(h)}"
            topo.hosts.append(host)
            topo.host_leaf[host] = leaf
            topo.addresses[host] = base | (j << 16) | (i + 1)
            topo.ports[host] = [0]
            topo.adjacency[(host, 0)] = (leaf, i)
            topo.adjacency[(leaf, i)] = (host, 0)
    for k, spine in enumerate(spines):
        topo.ports[spine] = list(range(n_leaf))
        for j, leaf in enumerate(leaves):
            up = hosts_per_leaf + k
            topo.adjacency[(leaf, up)] = (spine, j)
            topo.adjacency[(spine, j)] = (leaf, up)
    return topo
