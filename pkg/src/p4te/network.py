"""Assembles topology, links, switches and hosts into a runnable simulation."""

from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from fractions import Fraction

import numpy as np

from . import dataplane as dp
from .baselines import EcnConfig, HulaState, ecmp_select, hula_probe_cycle, hula_select
from .config import ExperimentConfig
from .control import ControlPlane, depth_ranges, init_tables
from .engine import NS_PER_MS, NS_PER_SEC, NS_PER_US, EventLoop
from .link import DROPPED, UNITS_PER_PACKET, Link
from .meters import as_fraction, link_meter
from .packet import CONTROL_PACKET_BYTES, Color, Flag, Packet, TrafficClass
from .topology import Topology, build_leaf_spine
from .transport import FlowCompletionRecord, Receiver, Sender, TransportConfig
from .workload import FlowSpec

log = logging.getLogger(__name__)

APPLIED_OR_EXEMPT = Flag.RATE_CTRL_APPLIED | Flag.RATE_CTRL_EXEMPT


class InvariantViolation(AssertionError):
    """A runtime invariant tripped; the run's outputs are not trustworthy."""


@dataclass
class NetCounters:
    injected: int = 0
    delivered: int = 0
    arrivals: int = 0
    facks_generated: int = 0
    feedback_packets: int = 0
    recirculations: int = 0
    cp_events: int = 0
    probes: int = 0
    reorders: int = 0
    checked_in_order: int = 0


@dataclass
class RateModel:
    """How packets are charged on links."""

    byte_mode: bool
    control_units: int
    mss: int
    meter_full_packets: bool = True

    def link_rate(self, pps: float) -> int:
        if self.byte_mode:
            return round(pps * self.mss)
        return round(pps * UNITS_PER_PACKET)

    def cost(self, pkt: Packet) -> int:
        if self.byte_mode:
            return pkt.size_bytes
        return UNITS_PER_PACKET if pkt.payload else self.control_units

    def meter_cost(self, pkt: Packet) -> int:
        if self.byte_mode:
            return pkt.size_bytes
        return UNITS_PER_PACKET if pkt.payload or self.meter_full_packets else self.control_units

    @property
    def data_cost(self) -> int:
        return self.mss if self.byte_mode else UNITS_PER_PACKET


class Switch:
    def __init__(self, net: "Network", name: str) -> None:
        self.net = net
        self.name = name
        self.loop = net.loop
        topo = net.topo
        cfg = net.cfg
        self.scheme = net.scheme
        self.is_leaf = topo.is_leaf(name)
        self.ports = topo.ports[name]
        self.up_ports = tuple(sorted(topo.upward_ports(name)))
        self.up_set = frozenset(self.up_ports)
        self.n_host_ports = topo.hosts_per_leaf if self.is_leaf else 0
        self.links: dict[int, Link] = {}
        self.down = dp.DownwardTable()
        if self.is_leaf:
            for p in range(topo.hosts_per_leaf):
                host = topo.peer(name, p)[0]
                self.down.add(topo.addresses[host], 32, p)
        else:
            for p in self.ports:
                leaf = topo.peer(name, p)[0]
                value, plen = topo.leaf_prefix[leaf]
                self.down.add(value, plen, p)
        self.leaf_index = topo.leaf_switches.index(name) if self.is_leaf else -1
        self.leaf_order = 0

        self.p4te = self.scheme in ("p4te", "p4te-nra")
        self.rate_control = self.scheme == "p4te"
        self.hula_on = self.scheme == "hula"
        self.ecn_on = cfg.ecmp.ecn and (self.scheme == "ecmp" or (self.hula_on and cfg.ecmp.ecn_on_hula))
        self.mss = cfg.transport.mss
        gap = round(cfg.p4te.flowlet_gap_ms * NS_PER_MS)
        self.flowlets = dp.FlowletState(gap, cfg.p4te.flowlet_bits)
        self.cp_delay = round(cfg.p4te.cp_delay_us * NS_PER_US)
        self.recirc_delay = cfg.sim.recirc_delay_ns
        self.records: dp.RateControlFlowRecords | None = None
        self.hula: HulaState | None = None
        self.cp: ControlPlane | None = None
        self.ecn_thr: dict[int, int] = {}

    def attach(self, port: int, link: Link) -> None:
        self.links[port] = link

    def finish_setup(self) -> None:
        net, cfg = self.net, self.net.cfg
        rates = {p: self.links[p].rate_units for p in self.ports}
        # ingress rate of port p is the rate of the link arriving on p, which is symmetric
        if self.p4te:
            pc = cfg.p4te
            burst = as_fraction(pc.burst_frac)
            meters = {
                p: link_meter(rates[p], as_fraction(pc.cir_frac), as_fraction(pc.pir_frac),
                              max(burst, Fraction(net.rates.data_cost, rates[p])))
                for p in self.ports
            }
            self.egress = dp.EgressMonitorState(pc.delta, meters)
            self.ingress = dp.IngressMonitorState(
                {p: Fraction(rates[p]) for p in self.ports},
                {TrafficClass.SHORT: as_fraction(pc.safe_short), TrafficClass.LARGE: as_fraction(pc.safe_large)},
                burst_frac=burst, min_burst=net.rates.data_cost, upward_ports=self.up_ports,
            )
            if self.up_ports:
                qd, lu = init_tables(self.up_ports, depth_ranges(pc.delta, pc.n_ranges))
                self.cp = ControlPlane(qd, lu)
                self.qd_table, self.lu_table = qd, lu
            if self.is_leaf and self.rate_control:
                self.records = dp.RateControlFlowRecords(net.rc_window)
        if self.ecn_on:
            for p, link in self.links.items():
                self.ecn_thr[p] = min(cfg.ecmp.ecn_threshold, max(link.queue_capacity - 1, 1))
        if self.hula_on:
            self.hula = HulaState(self.ports, rates, net.probe_interval,
                                  round(net.probe_interval * cfg.hula.aging_intervals))

    # -- packet path

    def receive(self, pkt: Packet, in_port: int) -> None:
        net = self.net
        net.c.arrivals += 1
        now = self.loop.now
        flags = pkt.flags
        if flags & Flag.PROBE:
            self._on_probe(pkt, in_port, now)
            return
        pkt.md_ingress_timestamp = now
        pkt.md_ingress_port = in_port
        pkt.md_egress_port = -1
        pkt.md_queue_depth = 0
        if self.p4te:
            meter = self.ingress.meters[(in_port, int(pkt.traffic_class))]
            pkt.md_incoming_color = meter.mark(now, net.rates.meter_cost(pkt))
        from_host = in_port < self.n_host_ports
        if from_host and pkt.payload and self.records is not None:
            self.records.mark_ingress(pkt)
        port = self.down.lookup(pkt.dst_addr)
        if port is None:
            port = self.select_up(pkt, now)
            if from_host and pkt.payload:
                pkt.flowlet_epoch = self.flowlets.epoch[dp.packet_hash(pkt) & self.flowlets.mask]
                pkt.leaf_order = self.leaf_order
                self.leaf_order += 1
        elif flags & Flag.FACK and self.records is not None:
            self.records.observe_ack(pkt)
        self.forward(pkt, port, now)

    def select_up(self, pkt: Packet, now: int) -> int:
        h = dp.packet_hash(pkt)
        if self.p4te:
            return dp.upward_path_select(pkt, self.qd_table, self.lu_table, self.flowlets,
                                         self.ingress.port_utilizations, now, h)
        if self.hula_on:
            dst_leaf = self.net.topo.leaf_index_of_addr(pkt.dst_addr)
            return hula_select(pkt, self.hula, self.flowlets, now, dst_leaf, self.up_ports, h)
        return ecmp_select(pkt, self.up_ports, self.flowlets, now, h)

    def forward(self, pkt: Packet, port: int, now: int) -> None:
        net = self.net
        cost = net.rates.cost(pkt)
        depth = self.links[port].enqueue(pkt, now, cost)
        if depth == DROPPED:
            return
        if self.ecn_on and pkt.payload and depth >= self.ecn_thr[port]:
            pkt.flags |= Flag.ECN_CE
        if self.hula is not None:
            self.hula.on_transmit(port, now, cost)
            return
        if not self.p4te:
            return
        pkt.md_egress_port = port
        pkt.md_queue_depth = depth
        res = dp.egress_stage_monitor(pkt, self.egress, now, net.rates.meter_cost(pkt))
        if res is not dp.NO_EVENTS:
            self._on_monitor(res, port, now)
        if self.rate_control and pkt.payload and not pkt.flags & APPLIED_OR_EXEMPT:
            decision = dp.rate_control_decide(pkt, self.egress.old_packet_colors[port])
            if decision is not dp.Decision.NONE:
                fack = dp.generate_fack(pkt, decision, self.mss, net.next_uid())
                net.c.facks_generated += 1
                net.c.injected += 1
                out = self.down.lookup(fack.dst_addr)
                if out is None:
                    out = self.select_up(fack, now)
                self.forward(fack, out, now)

    def _on_monitor(self, res: dp.MonitorResult, port: int, now: int) -> None:
        net = self.net
        net.c.feedback_packets += 1
        res.feedback_to_cp.uid = net.next_uid()
        if port in self.up_set:
            for ev in res.events:
                net.c.cp_events += 1
                self.loop.call_at(now + self.cp_delay, self._apply_event, ev)
        if res.recirculate is not None:
            net.c.recirculations += 1
            color = self.egress.old_packet_colors[port]
            self.loop.call_at(now + self.recirc_delay, self._recirculated, port, color)

    def _apply_event(self, ev) -> None:
        self.cp.reconfigure_priority(ev)

    def _recirculated(self, port: int, color: Color) -> None:
        self.ingress.port_utilizations[port] = color

    # -- HULA probes

    def probe_tick(self) -> None:
        net = self.net
        now = self.loop.now
        for port, probe in hula_probe_cycle(self.leaf_index, 0, self.up_ports, net.next_uid,
                                            net.cfg.hula.probe_bytes):
            net.c.injected += 1
            net.c.probes += 1
            self.forward(probe, port, now)
        self.loop.call_at(now + net.probe_interval, self.probe_tick)

    def _on_probe(self, pkt: Packet, in_port: int, now: int) -> None:
        net = self.net
        net.c.delivered += 1
        if self.hula is None:
            return
        util = max(pkt.probe_util, self.hula.link_util(in_port, now))
        if self.is_leaf:
            if pkt.probe_origin != self.leaf_index:
                self.hula.learn(pkt.probe_origin, in_port, util, now)
            return
        for p in self.ports:
            if p == in_port:
                continue
            copy = pkt.clone(net.next_uid())
            copy.probe_util = util
            net.c.injected += 1
            self.forward(copy, p, now)


class Host:
    def __init__(self, net: "Network", name: str) -> None:
        self.net = net
        self.name = name
        self.addr = net.topo.addresses[name]
        self.nic: Link | None = None
        self.senders: dict[tuple[int, int, int], Sender] = {}
        self.receivers: dict[tuple[int, int, int], Receiver] = {}
        self.order: dict[tuple[int, int], int] = {}

    def send(self, pkt: Packet) -> None:
        net = self.net
        net.c.injected += 1
        self.nic.enqueue(pkt, net.loop.now, net.rates.cost(pkt))

    def receive(self, pkt: Packet, in_port: int) -> None:
        net = self.net
        c = net.c
        c.arrivals += 1
        c.delivered += 1
        now = net.loop.now
        if pkt.flags & Flag.ACK:
            s = self.senders.get((pkt.dst_port, pkt.src_addr, pkt.src_port))
            if s is None:
                log.debug("%s: ack for unknown flow dropped", self.name)
                return
            s.on_ack(pkt, now)
            return
        key = (pkt.src_addr, pkt.src_port, pkt.dst_port)
        r = self.receivers.get(key)
        if r is None:
            r = Receiver(pkt.flow_id, self.send, net.next_uid, net.ack_bytes)
            self.receivers[key] = r
        if pkt.flowlet_epoch >= 0:
            okey = (pkt.flow_id, pkt.flowlet_epoch)
            last = self.order.get(okey, -1)
            c.checked_in_order += 1
            if pkt.leaf_order < last:
                c.reorders += 1
            else:
                self.order[okey] = pkt.leaf_order
        r.receiver_on_data(pkt, now)


@dataclass
class RunResult:
    records: list[FlowCompletionRecord]
    incomplete: int
    counters: NetCounters
    links: list[dict]
    upward_tx: dict[str, list[int]]
    sim_time: int
    events: int
    injected_flows: int
    rc_window: int
    checks: dict[str, bool] = field(default_factory=dict)


class Network:
    def __init__(self, cfg: ExperimentConfig, scheme: str | None = None) -> None:
        self.cfg = cfg
        self.scheme = scheme or cfg.experiment.scheme
        t = cfg.topology
        self.topo: Topology = build_leaf_spine(t.n_leaf, t.n_spine, t.hosts_per_leaf, t.edge_bw, t.core_bw,
                                               t.ports_per_switch)
        self.loop = EventLoop()
        self.c = NetCounters()
        self._uid = 0
        tr = cfg.transport
        self.rates = RateModel(cfg.sim.byte_mode, cfg.sim.control_units, tr.mss)
        self.ack_bytes = CONTROL_PACKET_BYTES
        mean_rtt = cfg.p4te.mean_rtt_ms / 1e3
        bdp = mean_rtt * t.core_bw * tr.mss
        self.rc_window = max(1, round(bdp))
        self.probe_interval = round((cfg.hula.probe_interval_ms or cfg.p4te.mean_rtt_ms) * NS_PER_MS)
        max_cwnd = max(round(cfg.transport.max_cwnd_bdp * bdp), tr.mss * tr.init_cwnd, tr.mss)
        self.tcfg = TransportConfig(
            mss=tr.mss, init_cwnd_segments=tr.init_cwnd, max_cwnd=max_cwnd,
            rto_initial=round(tr.rto_ms * NS_PER_MS), rto_min=round(tr.rto_min_ms * NS_PER_MS),
            rto_max=round(tr.rto_max_ms * NS_PER_MS),
        )
        self.switches = {name: Switch(self, name) for name in self.topo.switches}
        self.hosts = {name: Host(self, name) for name in self.topo.hosts}
        self.links: list[Link] = []
        self._wire()
        for sw in self.switches.values():
            sw.finish_setup()
        self.senders: list[Sender] = []
        self.completed: list[Sender] = []
        self._pending_starts = 0

    def next_uid(self) -> int:
        self._uid += 1
        return self._uid

    def _wire(self) -> None:
        sim = self.cfg.sim
        topo = self.topo
        host_prop = round(sim.host_prop_delay_us * NS_PER_US)
        core_prop = round(sim.core_prop_delay_us * NS_PER_US)
        for (node, port), (peer, peer_port) in sorted(topo.adjacency.items()):
            bw = topo.port_bandwidth(node, port)
            is_host = topo.is_host(node)
            edge = is_host or topo.is_host(peer)
            cap = sim.host_queue_pkts if is_host else max(1, round(sim.buffer_frac * bw))
            link = Link(f"{node}:{port}->{peer}:{peer_port}", self.loop, self.rates.link_rate(bw),
                        host_prop if edge else core_prop, cap, bandwidth_pps=bw,
                        unit_buffer=self.rates.data_cost if sim.unit_buffers else 0)
            if topo.is_host(peer):
                link.connect(self.hosts[peer].receive, peer_port, 0)
            else:
                link.connect(self.switches[peer].receive, peer_port, sim.port_latency_ns)
            if is_host:
                self.hosts[node].nic = link
            else:
                self.switches[node].attach(port, link)
            self.links.append(link)

    # -- flows

    def add_flows(self, flows: list[FlowSpec], seed: int) -> None:
        rng = np.random.default_rng([seed, 0x5EED])
        dports = rng.integers(1024, 65536, len(flows))
        labels = rng.integers(0, 1 << 20, len(flows))
        for k, spec in enumerate(flows):
            src, dst = self.hosts[spec.src], self.hosts[spec.dst]
            sport = 1024 + spec.flow_id % 64000
            tup = (src.addr, sport, dst.addr, int(dports[k]), int(labels[k]))
            s = Sender(spec.flow_id, tup, spec.size, spec.traffic_class, self.tcfg, self.loop,
                       src.send, self.next_uid, self._flow_done)
            s.src_name, s.dst_name = spec.src, spec.dst
            key = (sport, dst.addr, int(dports[k]))
            if key in src.senders:
                raise InvariantViolation(f"duplicate flow key {key} at {spec.src}")
            src.senders[key] = s
            self.senders.append(s)
            self._pending_starts += 1
            self.loop.call_at(spec.start, self._start_flow, s)

    def _start_flow(self, s: Sender) -> None:
        self._pending_starts -= 1
        s.start(self.loop.now)

    def _flow_done(self, s: Sender) -> None:
        self.completed.append(s)
        if self._pending_starts == 0 and len(self.completed) == len(self.senders):
            self.loop.halted = True

    # -- running

    def run(self, duration: int | None = None, drain: int | None = None) -> RunResult:
        sim = self.cfg.sim
        if duration is None:
            duration = round(sim.duration_s * NS_PER_SEC)
        if drain is None:
            drain = round(sim.drain_s * NS_PER_SEC)
        if self.scheme == "hula":
            n = len(self.topo.leaf_switches)
            for i, leaf in enumerate(self.topo.leaf_switches):
                self.loop.call_at(i * self.probe_interval // n, self.switches[leaf].probe_tick)
        if not self.senders and self.scheme != "hula":
            self.loop.halted = True
        self.loop.run_until(duration + drain)
        return self.result()

    def in_flight(self) -> int:
        return sum(l.tx for l in self.links) - self.c.arrivals

    def check_invariants(self) -> dict[str, bool]:
        now = self.loop.now
        c = self.c
        dropped = sum(l.drop for l in self.links)
        checks: dict[str, bool] = {}
        checks["conservation"] = c.injected == c.delivered + dropped + self.in_flight()
        checks["link_conservation"] = all(l.check_conservation(now) for l in self.links)
        part = True
        meters_ok = True
        for sw in self.switches.values():
            if sw.cp is not None:
                for t in sw.cp.tables.values():
                    part &= t.check_partition(sw.up_ports)
            if sw.p4te:
                for m in sw.egress.meters.values():
                    meters_ok &= 0 <= m.tc <= m._cbs_s and 0 <= m.tp <= m._pbs_s
                for m in sw.ingress.meters.values():
                    meters_ok &= 0 <= m.tokens_s <= m._burst_s
        checks["group_partition"] = part
        checks["meter_bounds"] = meters_ok
        checks["cwnd_floor"] = all(s.cwnd >= s.cfg.mss and s.cwnd_floor_ok for s in self.senders)
        checks["fack_window"] = all(
            s.facks <= math.ceil(s.size / self.rc_window) for s in self.senders
        ) if self.scheme == "p4te" else True
        checks["no_reorder"] = c.reorders == 0
        return checks

    def result(self) -> RunResult:
        records = []
        for s in self.completed:
            r = s.record()
            r.src, r.dst = s.src_name, s.dst_name
            records.append(r)
        records.sort(key=lambda r: r.flow_id)
        links = [
            {"link": l.name, "bandwidth_pps": l.bandwidth_pps, "enq": l.enq, "deq": l.deq, "drop": l.drop,
             "tx": l.tx, "tx_data": l.tx_data, "bytes": l.bytes}
            for l in self.links
        ]
        upward_tx = {
            leaf: [self.switches[leaf].links[p].tx for p in self.switches[leaf].up_ports]
            for leaf in self.topo.leaf_switches
        }
        return RunResult(
            records=records,
            incomplete=len(self.senders) - len(self.completed),
            counters=self.c,
            links=links,
            upward_tx=upward_tx,
            sim_time=self.loop.now,
            events=self.loop.dispatched,
            injected_flows=len(self.senders),
            rc_window=self.rc_window,
            checks=self.check_invariants(),
        )
