"""Experiment orchestration: one cell per (scheme, load, seed), sweeps, aggregation."""

from __future__ import annotations

import json
import logging
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable

import numpy as np

from .config import ExperimentConfig, dump_config
from .engine import NS_PER_SEC
from .network import InvariantViolation, Network, RunResult
from .report import class_means, emit_cdf, fmt, upward_load_stddev, write_csv, write_json
from .topology import ConfigError
from .workload import FlowSizeDistribution, FlowSpec, gen_empirical, gen_incast

log = logging.getLogger(__name__)


@dataclass
class CellResult:
    scheme: str
    workload: str
    load: float
    seed: int
    run: RunResult
    summary: dict


def load_basis_pps(cfg: ExperimentConfig, net: Network) -> float:
    """Capacity that a load fraction refers to."""
    if cfg.workload.load_basis == "fabric":
        return net.topo.core_capacity_pps()
    # one leaf's uplink capacity
    return cfg.topology.n_spine * cfg.topology.core_bw


def make_flows(cfg: ExperimentConfig, net: Network, load: float, seed: int) -> list[FlowSpec]:
    w = cfg.workload
    if w.name == "incast":
        return gen_incast(net.topo, seed, victim=w.incast_victim or None)
    dist = FlowSizeDistribution.load(w.cdf or w.name)
    return gen_empirical(dist, load, round(cfg.sim.duration_s * NS_PER_SEC), net.topo, seed,
                         mss=cfg.transport.mss, stride_offset=w.stride_offset,
                         capacity_pps=load_basis_pps(cfg, net))


def summarize(run: RunResult, scheme: str, workload: str, load: float, seed: int) -> dict:
    c = run.counters
    s = {
        "scheme": scheme,
        "workload": workload,
        "load": load,
        "seed": seed,
        "flows": run.injected_flows,
        "completed": len(run.records),
        "incomplete": run.incomplete,
        "retransmissions": sum(r.retransmissions for r in run.records),
        "facks_received": sum(r.facks for r in run.records),
        "facks_generated": c.facks_generated,
        "feedback_packets": c.feedback_packets,
        "recirculations": c.recirculations,
        "probes": c.probes,
        "reorders": c.reorders,
        "checked_in_order": c.checked_in_order,
        "drops": sum(l["drop"] for l in run.links),
        "injected_packets": c.injected,
        "delivered_packets": c.delivered,
        "sim_time_s": run.sim_time / NS_PER_SEC,
        "events": run.events,
        "rc_window_bytes": run.rc_window,
        "upward_stddev": {leaf: upward_load_stddev(v) for leaf, v in run.upward_tx.items()},
        "checks": run.checks,
    }
    s.update(class_means(run.records))
    return s


def run_cell(cfg: ExperimentConfig, scheme: str | None = None, load: float | None = None,
             seed: int | None = None, strict: bool = True) -> CellResult:
    scheme = scheme or cfg.experiment.scheme
    load = cfg.workload.load if load is None else load
    seed = cfg.experiment.seed if seed is None else seed
    net = Network(cfg, scheme)
    flows = make_flows(cfg, net, load, seed)
    net.add_flows(flows, seed)
    run = net.run()
    summary = summarize(run, scheme, cfg.workload.name, load, seed)
    bad = [k for k, ok in run.checks.items() if not ok]
    if bad and strict:
        raise InvariantViolation(f"{scheme} load={load} seed={seed}: invariant(s) failed: {', '.join(bad)}")
    return CellResult(scheme, cfg.workload.name, load, seed, run, summary)


def _cell_task(args) -> CellResult:
    cfg, scheme, load, seed = args
    return run_cell(cfg, scheme, load, seed)


def cell_dir(out: Path, cell: CellResult) -> Path:
    return out / f"{cell.workload}_{cell.scheme}_load{cell.load:g}_seed{cell.seed}"


def write_cell(out: Path, cell: CellResult, cfg: ExperimentConfig | None = None) -> Path:
    d = cell_dir(Path(out), cell)
    d.mkdir(parents=True, exist_ok=True)
    run = cell.run
    write_csv(d / "fct.csv", ["flow_id", "src", "dst", "class", "size_bytes", "start_s", "end_s", "fct_s",
                              "retransmissions", "facks"],
              ([r.flow_id, r.src, r.dst, r.traffic_class.name, r.size, fmt(r.start / 1e9), fmt(r.end / 1e9),
                fmt(r.fct / 1e9), r.retransmissions, r.facks] for r in run.records))
    if run.records:
        cdf = emit_cdf(run.records)
        write_csv(d / "fct_cdf.csv", ["class", "fct_s", "cum_fraction"],
                  ([name, fmt(x), fmt(p)] for name, pts in cdf.items() for x, p in pts))
    write_csv(d / "links.csv", ["link", "bandwidth_pps", "enq", "deq", "drop", "tx", "tx_data", "bytes"],
              ([l["link"], l["bandwidth_pps"], l["enq"], l["deq"], l["drop"], l["tx"], l["tx_data"], l["bytes"]]
               for l in run.links))
    write_csv(d / "upward_load.csv", ["leaf", "port_tx_counts", "stddev"],
              ([leaf, " ".join(map(str, v)), fmt(upward_load_stddev(v))] for leaf, v in run.upward_tx.items()))
    write_json(d / "summary.json", cell.summary)
    if cfg is not None:
        (d / "config.ini").write_text(dump_config(cfg))
    return d


NUMERIC_KEYS = ("mean_fct_short", "mean_fct_large", "mean_fct_all", "retransmissions", "facks_received",
                "facks_generated", "feedback_packets", "drops", "probes", "incomplete", "completed")


def aggregate(summaries: Iterable[dict]) -> list[dict]:
    """Arithmetic mean over seeds for each (workload, scheme, load)."""
    groups: dict[tuple, list[dict]] = {}
    for s in summaries:
        groups.setdefault((s["workload"], s["scheme"], s["load"]), []).append(s)
    out = []
    for (workload, scheme, load), rows in sorted(groups.items()):
        agg = {"workload": workload, "scheme": scheme, "load": load, "seeds": sorted(r["seed"] for r in rows)}
        for k in NUMERIC_KEYS:
            vals = [r[k] for r in rows if k in r and not (isinstance(r[k], float) and math.isnan(r[k]))]
            agg[k] = float(np.mean(vals)) if vals else float("nan")
        leaves = sorted(rows[0]["upward_stddev"])
        agg["upward_stddev"] = {leaf: float(np.mean([r["upward_stddev"][leaf] for r in rows])) for leaf in leaves}
        agg["checks_passed"] = all(all(r["checks"].values()) for r in rows)
        out.append(agg)
    return out


def write_aggregate(out: Path, agg: list[dict]) -> None:
    out = Path(out)
    out.mkdir(parents=True, exist_ok=True)
    write_json(out / "aggregate.json", agg)
    leaves = sorted({leaf for a in agg for leaf in a["upward_stddev"]})
    write_csv(out / "aggregate.csv",
              ["workload", "scheme", "load", "n_seeds", *NUMERIC_KEYS, *(f"stddev_{l}" for l in leaves)],
              ([a["workload"], a["scheme"], a["load"], len(a["seeds"]), *(fmt(a[k]) for k in NUMERIC_KEYS),
                *(fmt(a["upward_stddev"].get(l, float("nan"))) for l in leaves)] for a in agg))


def sweep(cfg: ExperimentConfig, schemes: list[str] | None = None, loads: list[float] | None = None,
          seeds: list[int] | None = None, out: Path | None = None, jobs: int = 1) -> list[CellResult]:
    schemes = schemes or cfg.schemes
    loads = loads or (cfg.loads if cfg.workload.name != "incast" else [1.0])
    seeds = seeds or cfg.seeds
    tasks = [(cfg, s, ld, sd) for s in schemes for ld in loads for sd in seeds]
    if jobs > 1:
        with ProcessPoolExecutor(jobs) as ex:
            cells = list(ex.map(_cell_task, tasks))
    else:
        cells = [_cell_task(t) for t in tasks]
    if out is not None:
        for c in cells:
            write_cell(out, c, cfg)
        write_aggregate(out, aggregate(c.summary for c in cells))
    return cells


def load_summaries(out: Path) -> list[dict]:
    out = Path(out)
    files = sorted(out.glob("*/summary.json"))
    if not files:
        raise ConfigError(f"no run summaries under {out}")
    return [json.loads(f.read_text()) for f in files]
