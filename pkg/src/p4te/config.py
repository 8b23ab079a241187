"""Experiment configuration: INI-style sections mapped onto dataclasses.

Every key has a default, so an empty file is a valid configuration. Unknown
sections or keys, and values that fail to parse, raise :class:`ConfigError`
with the file name and line number.
"""

from __future__ import annotations

import configparser
import dataclasses
import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Any

from .topology import ConfigError

SCHEMES = ("p4te", "p4te-nra", "ecmp", "hula")


@dataclass
class TopologyConfig:
    n_leaf: int = 4
    n_spine: int = 4
    hosts_per_leaf: int = 4
    edge_bw: float = 40.0
    core_bw: float = 20.0
    ports_per_switch: int = 8


@dataclass
class SimConfig:
    duration_s: float = 500.0
    # extra simulated time allowed for started flows to finish
    drain_s: float = 600.0
    host_prop_delay_us: float = 1.0
    core_prop_delay_us: float = 1.0
    port_latency_ns: int = 652
    recirc_delay_ns: int = 75
    buffer_frac: float = 0.2
    host_queue_pkts: int = 1000
    byte_mode: bool = False
    # cost of a header-only packet, in 1/16ths of a data-packet slot (pps mode)
    control_units: int = 1
    # buffers sized in cost units, so header-only packets take a fraction of a slot
    unit_buffers: bool = False


@dataclass
class P4teConfig:
    delta: int = 2
    n_ranges: int = 4
    cir_frac: float = 0.9
    pir_frac: float = 1.0
    burst_frac: float = 0.05
    safe_short: float = 0.9
    safe_large: float = 0.1
    flowlet_gap_ms: float = 40.0
    flowlet_bits: int = 16
    mean_rtt_ms: float = 70.0
    cp_delay_us: float = 10.0


@dataclass
class EcmpConfig:
    ecn_threshold: int = 6
    # ECN marking for the baselines (ECMP, and HULA when ecn_on_hula is set)
    ecn: bool = True
    ecn_on_hula: bool = True


@dataclass
class HulaConfig:
    # 0 means one mean RTT
    probe_interval_ms: float = 0.0
    probe_bytes: int = 64
    aging_intervals: float = 3.0


@dataclass
class TransportSection:
    mss: int = 1024
    init_cwnd: int = 2
    max_cwnd_bdp: float = 4.0
    rto_ms: float = 200.0
    rto_min_ms: float = 200.0
    rto_max_ms: float = 2000.0


@dataclass
class WorkloadConfig:
    name: str = "websearch"
    cdf: str = ""
    load: float = 0.8
    stride_offset: int = 1
    incast_victim: str = ""
    # "leaf": load is a fraction of one leaf's uplink capacity (n_spine x core_bw);
    # "fabric": a fraction of all leaf-to-spine links
    load_basis: str = "leaf"


@dataclass
class ExperimentSection:
    scheme: str = "p4te"
    seed: int = 1
    seeds: str = "1,2,3,4,5"
    loads: str = "0.4,0.6,0.8"
    schemes: str = ""
    out: str = "results"


SECTIONS: dict[str, type] = {
    "topology": TopologyConfig,
    "sim": SimConfig,
    "p4te": P4teConfig,
    "ecmp": EcmpConfig,
    "hula": HulaConfig,
    "transport": TransportSection,
    "workload": WorkloadConfig,
    "experiment": ExperimentSection,
}


@dataclass
class ExperimentConfig:
    topology: TopologyConfig = field(default_factory=TopologyConfig)
    sim: SimConfig = field(default_factory=SimConfig)
    p4te: P4teConfig = field(default_factory=P4teConfig)
    ecmp: EcmpConfig = field(default_factory=EcmpConfig)
    hula: HulaConfig = field(default_factory=HulaConfig)
    transport: TransportSection = field(default_factory=TransportSection)
    workload: WorkloadConfig = field(default_factory=WorkloadConfig)
    experiment: ExperimentSection = field(default_factory=ExperimentSection)

    def copy(self, **overrides: Any) -> "ExperimentConfig":
        """Deep copy with ``section__key=value`` overrides."""
        new = ExperimentConfig(**{name: dataclasses.replace(getattr(self, name)) for name in SECTIONS})
        for k, v in overrides.items():
            section, key = k.split("__", 1)
            set_value(new, section, key, v)
        new.validate()
        return new

    @property
    def seeds(self) -> list[int]:
        return _int_list(self.experiment.seeds, "experiment.seeds")

    @property
    def loads(self) -> list[float]:
        return _float_list(self.experiment.loads, "experiment.loads")

    @property
    def schemes(self) -> list[str]:
        if not self.experiment.schemes.strip():
            return [self.experiment.scheme]
        return [s.strip() for s in self.experiment.schemes.split(",") if s.strip()]

    def validate(self) -> None:
        for s in self.schemes:
            if s not in SCHEMES:
                raise ConfigError(f"experiment.scheme: unknown scheme {s!r}; choose from {', '.join(SCHEMES)}")
        fractions = {
            "sim.buffer_frac": self.sim.buffer_frac,
            "p4te.cir_frac": self.p4te.cir_frac,
            "p4te.pir_frac": self.p4te.pir_frac,
            "p4te.burst_frac": self.p4te.burst_frac,
            "p4te.safe_short": self.p4te.safe_short,
            "p4te.safe_large": self.p4te.safe_large,
            "workload.load": self.workload.load,
        }
        for name, v in fractions.items():
            if not 0 < v <= 1:
                raise ConfigError(f"{name} must be in (0, 1], got {v}")
        for ld in self.loads:
            if not 0 < ld <= 1:
                raise ConfigError(f"experiment.loads: load must be in (0, 1], got {ld}")
        if self.p4te.cir_frac > self.p4te.pir_frac:
            raise ConfigError("p4te.cir_frac exceeds p4te.pir_frac")
        if self.p4te.safe_short + self.p4te.safe_large > 1 + 1e-12:
            raise ConfigError("p4te safe-rates sum to more than the port bandwidth")
        if self.p4te.delta < 1 or self.p4te.n_ranges < 1:
            raise ConfigError("p4te.delta and p4te.n_ranges must be >= 1")
        if self.ecmp.ecn_threshold < 1:
            raise ConfigError("ecmp.ecn_threshold must be >= 1")
        if self.transport.mss < 1 or self.transport.init_cwnd < 1:
            raise ConfigError("transport.mss and transport.init_cwnd must be >= 1")
        if self.sim.duration_s < 0 or self.sim.drain_s < 0:
            raise ConfigError("sim.duration_s and sim.drain_s must be >= 0")
        if self.workload.load_basis not in ("leaf", "fabric"):
            raise ConfigError(f"workload.load_basis must be 'leaf' or 'fabric', got {self.workload.load_basis!r}")
        if self.workload.cdf and not Path(self.workload.cdf).exists():
            raise ConfigError(f"workload.cdf: file {self.workload.cdf} does not exist")


def _int_list(text: str, name: str) -> list[int]:
    try:
        return [int(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated integers, got {text!r}") from None


def _float_list(text: str, name: str) -> list[float]:
    try:
        return [float(x) for x in text.split(",") if x.strip()]
    except ValueError:
        raise ConfigError(f"{name}: expected comma-separated numbers, got {text!r}") from None


def _convert(tp: Any, raw: Any) -> Any:
    if not isinstance(raw, str):
        raw = str(raw)
    raw = raw.strip()
    if tp in (bool, "bool"):
        low = raw.lower()
        if low in ("1", "true", "yes", "on"):
            return True
        if low in ("0", "false", "no", "off"):
            return False
        raise ValueError(f"not a boolean: {raw!r}")
    if tp in (int, "int"):
        return int(raw)
    if tp in (float, "float"):
        return float(raw)
    return raw


def set_value(cfg: ExperimentConfig, section: str, key: str, raw: Any, where: str = "") -> None:
    prefix = f"{where}: " if where else ""
    if section not in SECTIONS:
        raise ConfigError(f"{prefix}unknown section [{section}]")
    obj = getattr(cfg, section)
    types = {f.name: f.type for f in dataclasses.fields(obj)}
    if key not in types:
        raise ConfigError(f"{prefix}unknown key {key!r} in [{section}]")
    try:
        setattr(obj, key, _convert(types[key], raw))
    except ValueError as e:
        raise ConfigError(f"{prefix}bad value for {section}.{key}: {e}") from None


def _line_index(text: str) -> dict[tuple[str, str], int]:
    index: dict[tuple[str, str], int] = {}
    section = ""
    sec_re = re.compile(r"^\s*\[([^\]]+)\]")
    key_re = re.compile(r"^\s*([^=:#;\s][^=:]*?)\s*[=:]")
    for n, line in enumerate(text.splitlines(), 1):
        m = sec_re.match(line)
        if m:
            section = m.group(1).strip()
            index.setdefault((section, ""), n)
            continue
        m = key_re.match(line)
        if m:
            index[(section, m.group(1).strip().lower())] = n
    return index


def parse_config(text: str, source: str = "<config>") -> ExperimentConfig:
    parser = configparser.ConfigParser(interpolation=None, inline_comment_prefixes=("#", ";"))
    try:
        parser.read_string(text, source=source)
    except configparser.Error as e:
        raise ConfigError(f"{source}: {e}".replace("\n", " ")) from None
    lines = _line_index(text)
    cfg = ExperimentConfig()
    for section in parser.sections():
        if section not in SECTIONS:
            raise ConfigError(f"{source}:{lines.get((section, ''), 0)}: unknown section [{section}]")
        for key, raw in parser.items(section):
            set_value(cfg, section, key, raw, f"{source}:{lines.get((section, key), 0)}")
    try:
        cfg.validate()
    except ConfigError as e:
        raise ConfigError(f"{source}: {e}") from None
    return cfg


def load_config(path: str | Path | None) -> ExperimentConfig:
    if path is None:
        cfg = ExperimentConfig()
        cfg.validate()
        return cfg
    p = Path(path)
    if not p.exists():
        raise ConfigError(f"config file {p} not found")
    return parse_config(p.read_text(), str(p))


def apply_overrides(cfg: ExperimentConfig, pairs: list[str]) -> ExperimentConfig:
    """Apply ``section.key=value`` strings from the command line."""
    for item in pairs:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"override {item!r}: expected section.key=value")
        lhs, value = item.split("=", 1)
        section, key = lhs.strip().split(".", 1)
        set_value(cfg, section, key, value, f"--set {item}")
    cfg.validate()
    return cfg


def dump_config(cfg: ExperimentConfig) -> str:
    out = []
    for name in SECTIONS:
        out.append(f"[{name}]")
        for f in dataclasses.fields(getattr(cfg, name)):
            out.append(f"{f.name} = {getattr(getattr(cfg, name), f.name)}")
        out.append("")
    return "\n".join(out)
