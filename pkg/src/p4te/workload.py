"""Flow generation: empirical size distributions, Poisson arrivals, stride pairs, incast."""

from __future__ import annotations

import bisect
import math
from dataclasses import dataclass
from importlib import resources
from pathlib import Path

import numpy as np

from .packet import TrafficClass
from .topology import ConfigError, Topology

BUILTIN = ("websearch", "datamining")


@dataclass(frozen=True)
class FlowSpec:
    flow_id: int
    src: str
    dst: str
    size: int
    traffic_class: TrafficClass
    start: int


class FlowSizeDistribution:
    """Piecewise-linear CDF over flow sizes in bytes."""

    def __init__(self, name: str, points: list[tuple[float, float]]) -> None:
        if len(points) < 2:
            raise ConfigError(f"{name}: a CDF needs at least two points")
        xs = [float(x) for x, _ in points]
        ps = [float(p) for _, p in points]
        if any(b < a for a, b in zip(xs, xs[1:])) or any(b < a for a, b in zip(ps, ps[1:])):
            raise ConfigError(f"{name}: CDF points must be ascending")
        if ps[-1] != 1.0 or ps[0] < 0 or xs[0] <= 0:
            raise ConfigError(f"{name}: CDF must start at a positive size and end at probability 1.0")
        self.name = name
        self.sizes = xs
        self.probs = ps

    @classmethod
    def load(cls, name_or_path: str) -> "FlowSizeDistribution":
        if name_or_path in BUILTIN:
            text = resources.files("p4te").joinpath(f"data/{name_or_path}.cdf").read_text()
            name = name_or_path
        else:
            path = Path(name_or_path)
            if not path.exists():
                raise ConfigError(f"distribution file {path} not found")
            text = path.read_text()
            name = path.stem
        points = []
        for lineno, line in enumerate(text.splitlines(), 1):
            line = line.split("#", 1)[0].strip()
            if not line:
                continue
            try:
                s, p = line.split()
                points.append((float(s), float(p)))
            except ValueError:
                raise ConfigError(f"{name}:{lineno}: expected 'size_bytes cumulative_prob'") from None
        return cls(name, points)

    def cdf(self, x: float) -> float:
        xs, ps = self.sizes, self.probs
        if x < xs[0]:
            return 0.0
        if x >= xs[-1]:
            return 1.0
        i = bisect.bisect_right(xs, x) - 1
        x0, x1, p0, p1 = xs[i], xs[i + 1], ps[i], ps[i + 1]
        return p0 + (p1 - p0) * (x - x0) / (x1 - x0)

    def quantile(self, u: np.ndarray | float) -> np.ndarray:
        """Inverse CDF (linear interpolation between points)."""
        # np.interp needs strictly increasing x; drop flat CDF segments
        ps, xs = [self.probs[0]], [self.sizes[0]]
        for x, p in zip(self.sizes[1:], self.probs[1:]):
            if p > ps[-1]:
                ps.append(p)
                xs.append(x)
        return np.interp(u, ps, xs)

    @property
    def p90(self) -> float:
        return float(self.quantile(0.9))

    def percentile(self, q: float) -> float:
        return float(self.quantile(q))

    def mean_bytes(self) -> float:
        m = self.sizes[0] * self.probs[0]
        for (x0, p0), (x1, p1) in zip(zip(self.sizes, self.probs), zip(self.sizes[1:], self.probs[1:])):
            m += (p1 - p0) * (x0 + x1) / 2
        return m

    def mean_packets(self, mss: int) -> float:
        """E[ceil(size / mss)], the mean of the quantized distribution."""
        total, k = 0.0, 0
        while k * mss < self.sizes[-1]:
            total += 1.0 - self.cdf(k * mss)
            k += 1
        return total

    def large_byte_fraction(self, mss: int) -> float:
        """Fraction of bytes carried by flows above p90, after quantization."""
        thr = math.ceil(self.p90 / mss)
        big = tot = 0.0
        k = 1
        while (k - 1) * mss < self.sizes[-1]:
            pk = self.cdf(k * mss) - self.cdf((k - 1) * mss)
            tot += pk * k
            if k > thr:
                big += pk * k
            k += 1
        return big / tot


def quantize(sizes: np.ndarray, mss: int) -> np.ndarray:
    return np.maximum(np.ceil(sizes / mss), 1).astype(np.int64) * mss


def stride_destination(topo: Topology, src: str, offset: int = 1) -> str:
    """Host i on leaf j sends to host (i+k) mod H on leaf (j+k) mod L."""
    j, i = topo.host_index(src)
    n_leaf = len(topo.leaf_switches)
    dst = topo.host_at((j + offset) % n_leaf, (i + offset) % topo.hosts_per_leaf)
    if dst == src:
        raise ConfigError(f"stride offset {offset} maps {src} onto itself")
    return dst


def gen_empirical(
    dist: FlowSizeDistribution,
    load: float,
    duration: int,
    topology: Topology,
    seed: int,
    *,
    mss: int = 1024,
    stride_offset: int = 1,
    first_id: int = 0,
    capacity_pps: float | None = None,
) -> list[FlowSpec]:
    """Poisson flow arrivals offering ``load`` of ``capacity_pps``.

    The capacity defaults to the aggregate leaf-to-spine capacity of the fabric.
    """
    if not 0 < load <= 1:
        raise ConfigError(f"load must be in (0, 1], got {load}")
    if duration <= 0:
        return []
    rng = np.random.default_rng(seed)
    if capacity_pps is None:
        capacity_pps = topology.core_capacity_pps()
    lam = load * capacity_pps / dist.mean_packets(mss)
    horizon = duration / 1e9
    # draw in chunks until past the horizon
    n_guess = int(lam * horizon * 1.2) + 16
    times: list[float] = []
    t = 0.0
    while True:
        gaps = rng.exponential(1.0 / lam, n_guess)
        arr = t + np.cumsum(gaps)
        keep = arr[arr < horizon]
        times.extend(keep.tolist())
        if len(keep) < len(arr):
            break
        t = float(arr[-1])
    n = len(times)
    sizes = quantize(dist.quantile(rng.random(n)), mss)
    srcs = rng.integers(0, len(topology.hosts), n)
    thr = dist.p90
    flows = []
    for k in range(n):
        src = topology.hosts[srcs[k]]
        size = int(sizes[k])
        tc = TrafficClass.LARGE if size > thr else TrafficClass.SHORT
        flows.append(FlowSpec(first_id + k, src, stride_destination(topology, src, stride_offset),
                              size, tc, round(times[k] * 1e9)))
    return flows


def gen_incast(
    topology: Topology,
    seed: int,
    *,
    victim: str | None = None,
    n_short: int = 24,
    n_large: int = 8,
    short_size: int = 512 * 1024,
    large_size: int = 1024 * 1024,
    n_sources: int = 12,
    start: int = 0,
) -> list[FlowSpec]:
    """Synchronized many-to-one traffic from hosts under other leaves to one victim."""
    victim = victim or topology.hosts[0]
    vleaf = topology.host_leaf[victim]
    candidates = [h for h in topology.hosts if topology.host_leaf[h] != vleaf]
    if len(candidates) < n_sources:
        raise ConfigError(
            f"incast needs {n_sources} sources outside the victim's leaf, topology has {len(candidates)}"
        )
    if n_sources * topology.edge_bw <= topology.edge_bw:
        raise ConfigError("incast sources cannot overload the victim link")
    rng = np.random.default_rng(seed)
    sources = [candidates[i] for i in sorted(rng.choice(len(candidates), n_sources, replace=False))]
    kinds = [(short_size, TrafficClass.SHORT)] * n_short + [(large_size, TrafficClass.LARGE)] * n_large
    flows = []
    for k, (size, tc) in enumerate(kinds):
        flows.append(FlowSpec(k, sources[k % n_sources], victim, size, tc, start))
    return flows
