import filecmp

import pytest

from p4te.config import ExperimentConfig, SCHEMES
from p4te.engine import NS_PER_SEC
from p4te.experiment import aggregate, run_cell, write_cell
from p4te.network import Network
from p4te.packet import TrafficClass
from p4te.workload import FlowSpec

SMALL = dict(workload__name="websearch", sim__duration_s=20.0, sim__drain_s=200.0)


@pytest.fixture(scope="module")
def cells():
    cfg = ExperimentConfig().copy(**SMALL)
    return {s: run_cell(cfg, s, 0.6, 1) for s in SCHEMES}


def test_all_invariants_hold(cells):
    for s, c in cells.items():
        assert c.run.checks and all(c.run.checks.values()), (s, c.run.checks)


def test_every_flow_finishes(cells):
    for c in cells.values():
        assert c.run.incomplete == 0
        assert c.summary["completed"] == c.summary["flows"] > 0


def test_totals_reconcile(cells):
    for s, c in cells.items():
        run = c.run
        tx = sum(l["tx"] for l in run.links)
        drops = sum(l["drop"] for l in run.links)
        in_flight = tx - run.counters.arrivals
        assert run.counters.injected == run.counters.delivered + drops + in_flight
        # only HULA keeps probing after the last flow, everything else has landed
        assert in_flight == 0 if s != "hula" else in_flight >= 0
        for l in run.links:
            assert l["enq"] == l["tx"] + l["drop"]


def test_scheme_specific_counters(cells):
    assert cells["ecmp"].summary["facks_generated"] == 0 and cells["ecmp"].summary["probes"] == 0
    assert cells["hula"].summary["probes"] > 0
    assert cells["p4te"].summary["feedback_packets"] > 0
    assert cells["p4te-nra"].summary["facks_generated"] == 0
    assert cells["p4te-nra"].summary["feedback_packets"] > 0


def test_same_flows_for_every_scheme(cells):
    ids = {s: [(r.flow_id, r.size, r.start) for r in c.run.records] for s, c in cells.items()}
    assert len({tuple(v) for v in ids.values()}) == 1


def test_outputs_byte_identical(tmp_path):
    cfg = ExperimentConfig().copy(**SMALL)
    dirs = []
    for rep in ("a", "b"):
        dirs.append(write_cell(tmp_path / rep, run_cell(cfg, "p4te", 0.6, 7), cfg))
    files = sorted(p.name for p in dirs[0].iterdir())
    assert {"fct.csv", "fct_cdf.csv", "links.csv", "summary.json", "upward_load.csv", "config.ini"} <= set(files)
    match, mismatch, errors = filecmp.cmpfiles(dirs[0], dirs[1], files, shallow=False)
    assert mismatch == [] and errors == []


def test_seed_changes_outcome():
    cfg = ExperimentConfig().copy(**SMALL)
    a = run_cell(cfg, "ecmp", 0.6, 1).run.records
    b = run_cell(cfg, "ecmp", 0.6, 2).run.records
    assert [r.start for r in a] != [r.start for r in b]


def test_single_flow_in_empty_network():
    cfg = ExperimentConfig().copy(sim__duration_s=1.0)
    net = Network(cfg, "p4te")
    net.add_flows([FlowSpec(0, "H0", "H5", 40 * 1024, TrafficClass.SHORT, 0)], seed=1)
    run = net.run()
    (r,) = run.records
    assert r.retransmissions == 0
    assert all(run.checks.values())
    # 40 packets through a 20 pps core link take at least two seconds
    assert r.fct >= 2 * NS_PER_SEC


def test_aggregate_means_over_seeds():
    cfg = ExperimentConfig().copy(**SMALL)
    rows = [run_cell(cfg, "ecmp", 0.4, sd).summary for sd in (1, 2)]
    (agg,) = aggregate(rows)
    assert agg["seeds"] == [1, 2]
    assert agg["mean_fct_short"] == pytest.approx((rows[0]["mean_fct_short"] + rows[1]["mean_fct_short"]) / 2)
    assert agg["checks_passed"]
